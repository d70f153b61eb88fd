#include "handoff/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace handoff::sim {

using nlohmann::json;

long Scenario::frame_count() const {
  return static_cast<long>(std::floor(fps * duration + 1e-9));
}

const Camera* Scenario::find_camera(std::string_view id) const {
  for (const auto& c : cameras)
    if (c.id == id) return &c;
  return nullptr;
}

const Camera& Scenario::camera(std::string_view id) const {
  if (const auto* c = find_camera(id)) return *c;
  throw std::invalid_argument("unknown camera '" + std::string(id) + "'");
}

int Scenario::agent_index(std::string_view id) const {
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (agents[i].id == id) return static_cast<int>(i);
  return -1;
}

namespace {

bool rects_overlap(const Rect& a, const Rect& b) {
  return std::min(a.x + a.w, b.x + b.w) > std::max(a.x, b.x) &&
         std::min(a.y + a.h, b.y + b.h) > std::max(a.y, b.y);
}

// Area of the union of boxes, by coordinate compression. Inputs are few.
double union_area(const std::vector<BBox>& boxes) {
  std::vector<double> xs, ys;
  for (const auto& b : boxes) {
    if (b.empty()) continue;
    xs.push_back(b.x);
    xs.push_back(b.right());
    ys.push_back(b.y);
    ys.push_back(b.bottom());
  }
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double mx = 0.5 * (xs[i] + xs[i + 1]);
      const double my = 0.5 * (ys[j] + ys[j + 1]);
      const bool covered = std::any_of(boxes.begin(), boxes.end(), [&](const BBox& b) {
        return !b.empty() && mx > b.x && mx < b.right() && my > b.y && my < b.bottom();
      });
      if (covered) total += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
    }
  }
  return total;
}

Rect agent_rect(const Agent& a, const Vec2& p) {
  return {p.x - 0.5 * a.width, p.y - 0.5 * a.height, a.width, a.height};
}

void fill(Image& img, const PixelRect& r, Rgb color) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) img.set(x, y, color);
}

Rgb parse_rgb(const json& j) {
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 3) throw ScenarioError("color must have three components");
  Rgb c{};
  for (int i = 0; i < 3; ++i) {
    if (v[i] < 0 || v[i] > 255) throw ScenarioError("color component out of range");
    c[i] = static_cast<std::uint8_t>(v[i]);
  }
  return c;
}

Rect parse_rect(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw ScenarioError("rect must be [x, y, w, h]");
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace

void validate(const Scenario& s) {
  if (!(s.fps > 0.0)) throw ScenarioError("fps must be positive");
  if (!(s.duration > 0.0)) throw ScenarioError("duration must be positive");
  std::set<std::string> ids;
  for (const auto& c : s.cameras) {
    if (!ids.insert(c.id).second) throw ScenarioError("duplicate camera id '" + c.id + "'");
    if (c.width <= 0 || c.height <= 0) throw ScenarioError("camera '" + c.id + "' has no pixels");
    if (!(c.fov.w > 0.0 && c.fov.h > 0.0)) throw ScenarioError("camera '" + c.id + "' has an empty field of view");
  }
  for (std::size_t i = 0; i < s.cameras.size(); ++i)
    for (std::size_t j = i + 1; j < s.cameras.size(); ++j)
      if (rects_overlap(s.cameras[i].fov, s.cameras[j].fov))
        throw ScenarioError("fields of view overlap: '" + s.cameras[i].id + "' and '" + s.cameras[j].id + "'");
  ids.clear();
  for (const auto& a : s.agents) {
    if (!ids.insert(a.id).second) throw ScenarioError("duplicate agent id '" + a.id + "'");
    if (!(a.width > 0.0 && a.height > 0.0)) throw ScenarioError("agent '" + a.id + "' has no size");
    if (a.waypoints.empty()) throw ScenarioError("agent '" + a.id + "' has no waypoints");
    for (std::size_t k = 1; k < a.waypoints.size(); ++k)
      if (!(a.waypoints[k].t > a.waypoints[k - 1].t))
        throw ScenarioError("agent '" + a.id + "' waypoint times must strictly increase");
  }
  for (const auto& [from, tos] : s.adjacency) {
    if (!s.find_camera(from)) throw ScenarioError("camera graph names unknown camera '" + from + "'");
    for (const auto& to : tos)
      if (!s.find_camera(to)) throw ScenarioError("camera graph names unknown camera '" + to + "'");
  }
  if (s.selection) {
    if (!s.find_camera(s.selection->camera)) throw ScenarioError("selection names an unknown camera");
    if (s.selection->frame < 0 || s.selection->frame >= s.frame_count())
      throw ScenarioError("selection frame outside the scenario");
  }
}

std::optional<Vec2> agent_pose(const Scenario& s, std::string_view agent_id, double t) {
  const int idx = s.agent_index(agent_id);
  if (idx < 0) throw std::invalid_argument("unknown agent '" + std::string(agent_id) + "'");
  const auto& wps = s.agents[static_cast<std::size_t>(idx)].waypoints;
  if (wps.empty() || t < wps.front().t || t > wps.back().t) return std::nullopt;
  for (std::size_t k = 0; k < wps.size(); ++k) {
    if (t == wps[k].t) return Vec2{wps[k].x, wps[k].y};
    if (k + 1 < wps.size() && t < wps[k + 1].t) {
      const auto& a = wps[k];
      const auto& b = wps[k + 1];
      const double u = (t - a.t) / (b.t - a.t);
      return Vec2{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
    }
  }
  return Vec2{wps.back().x, wps.back().y};
}

BBox project(const Camera& cam, const Rect& r) {
  const double sx = cam.width / cam.fov.w;
  const double sy = cam.height / cam.fov.h;
  return {(r.x - cam.fov.x) * sx, (r.y - cam.fov.y) * sy, r.w * sx, r.h * sy};
}

namespace {

struct Projected {
  int agent = -1;
  BBox box;  // unclipped
};

std::vector<Projected> project_agents(const Scenario& s, const Camera& cam, long frame_index) {
  std::vector<Projected> out;
  const double t = s.time_of(frame_index);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto pose = agent_pose(s, s.agents[i].id, t);
    if (!pose) continue;
    out.push_back({static_cast<int>(i), project(cam, agent_rect(s.agents[i], *pose))});
  }
  return out;
}

void check_frame(const Scenario& s, long frame_index) {
  if (frame_index < 0 || frame_index >= s.frame_count())
    throw std::invalid_argument("frame index " + std::to_string(frame_index) + " outside the scenario");
}

}  // namespace

Image render(const Scenario& s, std::string_view camera_id, long frame_index) {
  const Camera& cam = s.camera(camera_id);
  check_frame(s, frame_index);
  Image img(cam.width, cam.height, s.background);
  for (const auto& p : project_agents(s, cam, frame_index))
    fill(img, rasterize(p.box, cam.width, cam.height), s.agents[static_cast<std::size_t>(p.agent)].color);
  for (const auto& o : s.occluders) fill(img, rasterize(project(cam, o.rect), cam.width, cam.height), o.color);
  return img;
}

std::vector<GroundTruthEntry> ground_truth(const Scenario& s, std::string_view camera_id, long frame_index) {
  const Camera& cam = s.camera(camera_id);
  check_frame(s, frame_index);
  const auto projected = project_agents(s, cam, frame_index);
  std::vector<BBox> occluder_boxes;
  for (const auto& o : s.occluders) occluder_boxes.push_back(project(cam, o.rect));

  std::vector<GroundTruthEntry> out;
  for (std::size_t k = 0; k < projected.size(); ++k) {
    const auto& p = projected[k];
    const BBox clipped = clip_to(p.box, cam.width, cam.height);
    if (clipped.empty()) continue;
    // Anything painted after this agent hides it: occluders and later agents.
    std::vector<BBox> covers;
    for (const auto& o : occluder_boxes) covers.push_back(intersection(o, clipped));
    for (std::size_t m = k + 1; m < projected.size(); ++m) covers.push_back(intersection(projected[m].box, clipped));
    const double visible = clipped.area() - union_area(covers);
    const double fraction = p.box.area() > 0.0 ? std::clamp(visible / p.box.area(), 0.0, 1.0) : 0.0;
    out.push_back({s.agents[static_cast<std::size_t>(p.agent)].id, clipped, fraction});
  }
  return out;
}

std::optional<GroundTruthEntry> ground_truth_for(const Scenario& s, std::string_view camera_id, long frame_index,
                                                 std::string_view agent_id) {
  for (auto& e : ground_truth(s, camera_id, frame_index))
    if (e.agent_id == agent_id) return e;
  return std::nullopt;
}

std::optional<int> dominant_agent(const Scenario& s, std::string_view camera_id, long frame_index, const BBox& box,
                                  double min_share) {
  const Camera& cam = s.camera(camera_id);
  check_frame(s, frame_index);
  const PixelRect crop = rasterize(box, cam.width, cam.height);
  if (crop.empty()) return std::nullopt;
  const int cw = crop.x1 - crop.x0;
  std::vector<int> label(static_cast<std::size_t>(crop.area()), -1);
  const auto paint = [&](const BBox& b, int value) {
    const PixelRect r = rasterize(b, cam.width, cam.height);
    for (int y = std::max(r.y0, crop.y0); y < std::min(r.y1, crop.y1); ++y)
      for (int x = std::max(r.x0, crop.x0); x < std::min(r.x1, crop.x1); ++x)
        label[static_cast<std::size_t>((y - crop.y0) * cw + (x - crop.x0))] = value;
  };
  for (const auto& p : project_agents(s, cam, frame_index)) paint(p.box, p.agent);
  for (const auto& o : s.occluders) paint(project(cam, o.rect), -1);

  std::vector<long> counts(s.agents.size(), 0);
  for (int l : label)
    if (l >= 0) ++counts[static_cast<std::size_t>(l)];
  const auto best = std::max_element(counts.begin(), counts.end());
  if (best == counts.end() || *best == 0) return std::nullopt;
  if (static_cast<double>(*best) < min_share * static_cast<double>(crop.area())) return std::nullopt;
  return static_cast<int>(best - counts.begin());
}

Scenario scenario_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  Scenario s;
  try {
    s.name = j.value("name", std::string{});
    if (j.contains("world_size")) {
      const auto ws = j.at("world_size").get<std::vector<double>>();
      if (ws.size() != 2) throw ScenarioError("world_size must be [w, h]");
      s.world_size = {ws[0], ws[1]};
    }
    s.fps = j.value("fps", 30.0);
    s.duration = j.at("duration").get<double>();
    if (j.contains("background")) s.background = parse_rgb(j.at("background"));
    for (const auto& ja : j.value("agents", json::array())) {
      Agent a;
      a.id = ja.at("id").get<std::string>();
      a.color = parse_rgb(ja.at("color"));
      const auto size = ja.at("size").get<std::vector<double>>();
      if (size.size() != 2) throw ScenarioError("agent size must be [w, h]");
      a.width = size[0];
      a.height = size[1];
      for (const auto& w : ja.at("waypoints")) {
        const auto v = w.get<std::vector<double>>();
        if (v.size() != 3) throw ScenarioError("waypoint must be [t, x, y]");
        a.waypoints.push_back({v[0], v[1], v[2]});
      }
      s.agents.push_back(std::move(a));
    }
    for (const auto& jo : j.value("occluders", json::array()))
      s.occluders.push_back({parse_rect(jo.at("rect")), parse_rgb(jo.at("color"))});
    for (const auto& jc : j.at("cameras")) {
      Camera c;
      c.id = jc.at("id").get<std::string>();
      c.fov = parse_rect(jc.at("fov"));
      const auto res = jc.value("resolution", std::vector<int>{640, 360});
      if (res.size() != 2) throw ScenarioError("resolution must be [W, H]");
      c.width = res[0];
      c.height = res[1];
      s.cameras.push_back(std::move(c));
    }
    if (j.contains("selection")) {
      const auto& js = j.at("selection");
      const auto b = js.at("bbox").get<std::vector<double>>();
      if (b.size() != 4) throw ScenarioError("selection bbox must be [x, y, w, h]");
      s.selection = Selection{js.at("camera").get<std::string>(), js.at("frame").get<long>(),
                              BBox{b[0], b[1], b[2], b[3]}, js.value("agent", std::string{})};
    }
    if (j.contains("camera_graph"))
      s.adjacency = j.at("camera_graph").value("adjacency", json::object()).get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  validate(s);
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["world_size"] = {s.world_size.x, s.world_size.y};
  j["fps"] = s.fps;
  j["duration"] = s.duration;
  j["background"] = s.background;
  j["agents"] = json::array();
  for (const auto& a : s.agents) {
    json wps = json::array();
    for (const auto& w : a.waypoints) wps.push_back({w.t, w.x, w.y});
    j["agents"].push_back({{"id", a.id}, {"color", a.color}, {"size", {a.width, a.height}}, {"waypoints", wps}});
  }
  j["occluders"] = json::array();
  for (const auto& o : s.occluders)
    j["occluders"].push_back({{"rect", {o.rect.x, o.rect.y, o.rect.w, o.rect.h}}, {"color", o.color}});
  j["cameras"] = json::array();
  for (const auto& c : s.cameras)
    j["cameras"].push_back(
        {{"id", c.id}, {"fov", {c.fov.x, c.fov.y, c.fov.w, c.fov.h}}, {"resolution", {c.width, c.height}}});
  if (s.selection) {
    const auto& sel = *s.selection;
    j["selection"] = {{"camera", sel.camera},
                      {"frame", sel.frame},
                      {"bbox", {sel.box.x, sel.box.y, sel.box.w, sel.box.h}},
                      {"agent", sel.agent}};
  }
  if (!s.adjacency.empty()) {
    json cams = json::array();
    for (const auto& c : s.cameras) cams.push_back(c.id);
    j["camera_graph"] = {{"cameras", cams}, {"adjacency", s.adjacency}};
  }
  return j.dump(2) + "\n";
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

Scenario resolve_scenario(const std::string& spec) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.rfind(prefix, 0) == 0) return builtin_scenario(std::string_view(spec).substr(prefix.size()));
  return load_scenario(spec);
}

}  // namespace handoff::sim
