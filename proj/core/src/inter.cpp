#include "handoff/inter.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace handoff::inter {

using nlohmann::json;

void CameraGraph::validate() const {
  std::set<std::string> seen;
  for (const auto& c : cameras)
    if (!seen.insert(c).second) throw std::invalid_argument("duplicate camera '" + c + "' in camera graph");
  for (const auto& [from, tos] : adjacency) {
    if (!contains(from)) throw std::invalid_argument("camera graph edge from undeclared camera '" + from + "'");
    for (const auto& to : tos) {
      if (!contains(to)) throw std::invalid_argument("camera graph edge to undeclared camera '" + to + "'");
      if (to == from) throw std::invalid_argument("camera graph self-loop on '" + from + "'");
    }
  }
}

bool CameraGraph::contains(std::string_view id) const {
  return std::find(cameras.begin(), cameras.end(), id) != cameras.end();
}

namespace {

std::map<std::string, int> hop_distances(const CameraGraph& g, const std::string& origin) {
  std::map<std::string, int> dist{{origin, 0}};
  std::deque<std::string> queue{origin};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    const auto it = g.adjacency.find(cur);
    if (it == g.adjacency.end()) continue;
    for (const auto& next : it->second) {
      if (dist.count(next)) continue;
      dist[next] = dist[cur] + 1;
      queue.push_back(next);
    }
  }
  return dist;
}

}  // namespace

int CameraGraph::diameter() const {
  int d = 0;
  for (const auto& c : cameras)
    for (const auto& [_, hops] : hop_distances(*this, c)) d = std::max(d, hops);
  return d;
}

CameraGraph CameraGraph::from_json(std::string_view text) {
  CameraGraph g;
  try {
    const json j = json::parse(text);
    // A scenario file may carry its graph under "camera_graph".
    const json& root = j.contains("camera_graph") ? j.at("camera_graph") : j;
    g.cameras = root.at("cameras").get<std::vector<std::string>>();
    g.adjacency = root.value("adjacency", json::object()).get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed camera graph: ") + e.what());
  }
  g.validate();
  return g;
}

CameraGraph CameraGraph::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open camera graph '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

CameraGraph CameraGraph::from_scenario(const sim::Scenario& scenario) {
  CameraGraph g;
  for (const auto& c : scenario.cameras) g.cameras.push_back(c.id);
  g.adjacency = scenario.adjacency;
  g.validate();
  return g;
}

std::string CameraGraph::to_json() const {
  return json{{"cameras", cameras}, {"adjacency", adjacency}}.dump(2) + "\n";
}

std::vector<std::string> recommend_cameras(const CameraGraph& graph, const SearchState& state) {
  if (!graph.contains(state.origin))
    throw std::invalid_argument("search origin '" + state.origin + "' is not in the camera graph");
  if (state.iteration < 1) throw std::invalid_argument("search iteration starts at 1");

  const auto dist = hop_distances(graph, state.origin);
  std::vector<std::pair<int, std::size_t>> ring;  // (hops, declaration index)
  for (std::size_t i = 0; i < graph.cameras.size(); ++i) {
    const auto it = dist.find(graph.cameras[i]);
    if (it != dist.end() && it->second >= 1 && it->second <= state.iteration) ring.emplace_back(it->second, i);
  }
  std::vector<std::string> out;
  if (ring.empty() || state.iteration > graph.diameter()) {
    for (const auto& c : graph.cameras)
      if (c != state.origin) out.push_back(c);
    return out;
  }
  std::sort(ring.begin(), ring.end());
  for (const auto& [_, idx] : ring) out.push_back(graph.cameras[idx]);
  return out;
}

namespace {

struct CameraCandidates {
  std::string camera;
  std::vector<BBox> boxes;
  std::vector<AppearanceVector> features;
  bool failed = false;
};

CameraCandidates gather(const std::string& camera, const Frame& frame, const Detector& detector,
                        const Embedder& embedder) {
  CameraCandidates out{camera, {}, {}, false};
  try {
    const auto raw = detector.detect(frame);
    for (const auto& d : filter_persons(raw)) {
      const BBox box = clip_to(d.bbox, frame.width(), frame.height());
      if (box.empty()) continue;
      out.features.push_back(embedder.embed(frame, box));
      out.boxes.push_back(box);
    }
  } catch (const DetectorUnavailable&) {
    out = CameraCandidates{camera, {}, {}, true};
  }
  return out;
}

}  // namespace

SearchOutcome search_step(SearchState& state, const CameraGraph& graph, const std::map<std::string, Frame>& frames,
                          const Detector& detector, const Embedder& embedder,
                          const AppearanceVector& target_features, double s_min) {
  const auto recommended = recommend_cameras(graph, state);

  std::vector<std::future<CameraCandidates>> jobs;
  for (const auto& cam : recommended) {
    const auto it = frames.find(cam);
    if (it == frames.end() || !it->second.image) continue;
    jobs.push_back(std::async(std::launch::async, gather, std::cref(cam), std::cref(it->second), std::cref(detector),
                              std::cref(embedder)));
  }

  SearchOutcome outcome;
  std::vector<AppearanceVector> pool;
  std::vector<std::pair<std::string, BBox>> owners;
  for (auto& job : jobs) {
    auto cands = job.get();
    if (cands.failed) {
      outcome.unavailable.push_back(cands.camera);
      continue;
    }
    outcome.searched.push_back(cands.camera);
    state.visited.insert(cands.camera);
    for (std::size_t i = 0; i < cands.boxes.size(); ++i) {
      pool.push_back(std::move(cands.features[i]));
      owners.emplace_back(cands.camera, cands.boxes[i]);
    }
  }
  outcome.candidates = pool.size();

  if (const auto best = perform_reid(pool, target_features, s_min)) {
    outcome.hit = Hit{owners[*best].first, owners[*best].second, similarity(pool[*best], target_features)};
  } else {
    ++state.iteration;
  }
  return outcome;
}

}  // namespace handoff::inter
