#include "handoff/coordinator.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace handoff {

using nlohmann::json;

std::string Track::current_camera() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, IntraPhase>) return p.camera;
        else if constexpr (std::is_same_v<P, SearchingPhase>) return p.state.origin;
        else return p.last_camera;
      },
      phase);
}

Track select_target(std::string track_id, const Frame& frame, const BBox& user_box, const Embedder& embedder,
                    const CoordinatorConfig& config) {
  if (!frame.image || frame.image->empty()) throw std::invalid_argument("selection frame has no pixels");
  if (!user_box.valid() || user_box.empty()) throw std::invalid_argument("selection box has zero area");
  const BBox clipped = clip_to(user_box, frame.width(), frame.height());
  if (clipped.empty()) throw std::invalid_argument("selection box lies outside the frame");

  Track t;
  t.id = std::move(track_id);
  t.target_crop = frame.image->crop(clipped);
  t.target_features = embedder.embed(frame, clipped);
  t.phase = IntraPhase{frame.camera_id, intra::IntraState(config.intra)};
  t.phases.push_back({frame.index, frame.camera_id, "intra"});
  t.clock = frame.index + 1;
  t.last_update = {t.id, "acquiring", std::nullopt, frame.camera_id, frame.index};
  return t;
}

std::vector<std::string> required_cameras(const Track& track, const inter::CameraGraph& graph) {
  if (const auto* p = std::get_if<IntraPhase>(&track.phase)) return {p->camera};
  if (const auto* p = std::get_if<SearchingPhase>(&track.phase)) return inter::recommend_cameras(graph, p->state);
  return {};
}

namespace {

TrackUpdate tick_intra(Track& t, IntraPhase& p, long frame_index, const Frame& frame, const Pipeline& pl) {
  const std::string camera = p.camera;
  const auto r = intra::intra_step(p.state, frame, pl.detector, pl.embedder, t.target_features);
  TrackUpdate u{t.id, "", std::nullopt, camera, frame_index};
  switch (r.status) {
    case intra::Status::Reacquired:
      t.trajectory.push_back({camera, frame_index, *r.box, "reacquired"});
      u.state = "acquiring";
      u.bbox = r.box;
      break;
    case intra::Status::Tracking:
      t.trajectory.push_back({camera, frame_index, *r.box, "tracking"});
      u.state = "tracking";
      u.bbox = r.box;
      break;
    case intra::Status::LowConfidence:
      u.state = "low_confidence";
      u.bbox = r.box;
      break;
    case intra::Status::OcclusionDetected:
      u.state = "occluded";
      break;
    case intra::Status::AcquiringFailed:
      u.state = "acquiring";
      break;
    case intra::Status::Exited:
      // Replaces `p`; nothing below may touch it.
      t.phase = SearchingPhase{inter::SearchState{camera, 1, {}}};
      t.phases.push_back({frame_index, camera, "searching"});
      u.state = "searching";
      break;
  }
  return u;
}

TrackUpdate tick_search(Track& t, SearchingPhase& p, long frame_index, const std::map<std::string, Frame>& frames,
                        const Pipeline& pl) {
  const auto outcome =
      inter::search_step(p.state, pl.graph, frames, pl.detector, pl.embedder, t.target_features, pl.config.search_s_min);
  if (outcome.hit) {
    const std::string camera = outcome.hit->camera;
    t.phase = IntraPhase{camera, intra::IntraState(pl.config.intra)};
    t.phases.push_back({frame_index, camera, "intra"});
    return {t.id, "acquiring", std::nullopt, camera, frame_index};
  }
  return {t.id, "searching", std::nullopt, p.state.origin, frame_index};
}

}  // namespace

TrackUpdate process_tick(Track& track, long frame_index, const std::map<std::string, Frame>& frames,
                         const Pipeline& pipeline) {
  if (track.done()) return track.last_update;

  if (auto* p = std::get_if<IntraPhase>(&track.phase)) {
    const auto it = frames.find(p->camera);
    if (it == frames.end() || !it->second.image) {
      ++track.stalls;
      return track.last_update;
    }
    track.last_update = tick_intra(track, *p, frame_index, it->second, pipeline);
  } else {
    auto& s = std::get<SearchingPhase>(track.phase);
    const auto wanted = inter::recommend_cameras(pipeline.graph, s.state);
    const bool any = std::any_of(wanted.begin(), wanted.end(), [&](const std::string& c) { return frames.count(c) > 0; });
    if (!any) {
      ++track.stalls;
      return track.last_update;
    }
    track.last_update = tick_search(track, s, frame_index, frames, pipeline);
  }
  track.clock = frame_index + 1;
  return track.last_update;
}

void finalize(Track& track, long last_frame) {
  if (track.done()) return;
  const std::string camera = track.current_camera();
  track.phase = DonePhase{camera};
  track.phases.push_back({last_frame, camera, "done"});
  track.last_update = {track.id, "done", std::nullopt, camera, last_frame};
}

// ---------------------------------------------------------------------------

std::string results_to_json(const Track& track) {
  json entries = json::array();
  for (const auto& e : track.trajectory)
    entries.push_back({{"camera", e.camera},
                       {"frame", e.frame},
                       {"x", e.box.x},
                       {"y", e.box.y},
                       {"w", e.box.w},
                       {"h", e.box.h},
                       {"status", e.status}});
  json phases = json::array();
  for (const auto& p : track.phases) phases.push_back({{"frame", p.frame}, {"camera", p.camera}, {"phase", p.phase}});
  return json{{"track_id", track.id}, {"entries", entries}, {"phases", phases}}.dump(2) + "\n";
}

Results results_from_json(std::string_view text) {
  Results r;
  try {
    const json j = json::parse(text);
    r.track_id = j.at("track_id").get<std::string>();
    for (const auto& e : j.at("entries"))
      r.entries.push_back({e.at("camera").get<std::string>(), e.at("frame").get<long>(),
                           BBox{e.at("x").get<double>(), e.at("y").get<double>(), e.at("w").get<double>(),
                                e.at("h").get<double>()},
                           e.at("status").get<std::string>()});
    for (const auto& p : j.value("phases", json::array()))
      r.phases.push_back({p.at("frame").get<long>(), p.at("camera").get<std::string>(), p.at("phase").get<std::string>()});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed results file: ") + e.what());
  }
  return r;
}

Results load_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open results file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return results_from_json(ss.str());
}

std::string update_to_json(const TrackUpdate& u) {
  json j{{"track_id", u.track_id}, {"state", u.state}, {"camera_id", u.camera_id}, {"frame", u.frame}};
  if (u.bbox) j["bbox"] = {{"x", u.bbox->x}, {"y", u.bbox->y}, {"w", u.bbox->w}, {"h", u.bbox->h}};
  return j.dump();
}

// ---------------------------------------------------------------------------

MapLayout layout_from_scenario(const sim::Scenario& s, double map_w, double map_h) {
  MapLayout layout;
  if (s.cameras.empty()) return layout;
  double x0 = s.cameras.front().fov.x, y0 = s.cameras.front().fov.y;
  double x1 = x0, y1 = y0;
  for (const auto& c : s.cameras) {
    x0 = std::min(x0, c.fov.x);
    y0 = std::min(y0, c.fov.y);
    x1 = std::max(x1, c.fov.x + c.fov.w);
    y1 = std::max(y1, c.fov.y + c.fov.h);
  }
  const double margin = 60.0;
  const double sx = (map_w - 2 * margin) / std::max(x1 - x0, 1e-9);
  const double sy = (map_h - 2 * margin) / std::max(y1 - y0, 1e-9);
  for (const auto& c : s.cameras)
    layout[c.id] = {margin + (c.fov.x + 0.5 * c.fov.w - x0) * sx, margin + (c.fov.y + 0.5 * c.fov.h - y0) * sy};
  return layout;
}

std::vector<CameraVisit> camera_visits(const std::vector<TrajectoryEntry>& trajectory) {
  std::vector<CameraVisit> visits;
  for (const auto& e : trajectory) {
    if (visits.empty() || visits.back().camera != e.camera) visits.push_back({e.camera, e.frame, e.frame});
    else visits.back().last_frame = e.frame;
  }
  return visits;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_trajectory_map(const std::vector<TrajectoryEntry>& trajectory, const MapLayout& layout,
                                  double map_w, double map_h) {
  const auto visits = camera_visits(trajectory);
  std::vector<std::string> missing;
  for (const auto& v : visits)
    if (!layout.count(v.camera) && std::find(missing.begin(), missing.end(), v.camera) == missing.end())
      missing.push_back(v.camera);
  if (!missing.empty()) {
    std::string msg = "cameras missing from map layout:";
    for (const auto& m : missing) msg += " " + m;
    throw std::invalid_argument(msg);
  }

  std::map<std::string, std::vector<std::string>> ranges;
  for (const auto& v : visits) ranges[v.camera].push_back(fmt::format("f{}-{}", v.first_frame, v.last_frame));

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      map_w, map_h, map_w, map_h);
  svg += fmt::format("  <rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n", map_w, map_h);

  if (visits.size() >= 2) {
    svg += "  <polyline class=\"trajectory\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"3\" points=\"";
    for (std::size_t i = 0; i < visits.size(); ++i) {
      const auto& p = layout.at(visits[i].camera);
      svg += fmt::format("{}{:.1f},{:.1f}", i ? " " : "", p.x, p.y);
    }
    svg += "\"/>\n";
  }

  for (const auto& [cam, p] : layout) {
    const bool visited = ranges.count(cam) > 0;
    svg += fmt::format(
        "  <g class=\"camera{}\" id=\"node-{}\">\n"
        "    <circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"18\" fill=\"{}\" stroke=\"#333333\" stroke-width=\"2\"/>\n"
        "    <text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        visited ? " visited" : "", xml_escape(cam), p.x, p.y, visited ? "#ffbf00" : "#dddddd", p.x, p.y + 4.5,
        xml_escape(cam));
    if (visited) {
      double dy = 34.0;
      for (const auto& r : ranges.at(cam)) {
        svg += fmt::format(
            "    <text class=\"frames\" x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
            "text-anchor=\"middle\">{}</text>\n",
            p.x, p.y + dy, r);
        dy += 13.0;
      }
    }
    svg += "  </g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace handoff
