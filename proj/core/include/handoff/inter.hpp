#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "handoff/perception.hpp"
#include "handoff/simworld.hpp"

namespace handoff::inter {

// Directed camera adjacency. `cameras` fixes declaration order, which breaks
// ties between cameras at the same hop distance.
struct CameraGraph {
  std::vector<std::string> cameras;
  std::map<std::string, std::vector<std::string>> adjacency;

  void validate() const;
  bool contains(std::string_view id) const;
  // Longest finite shortest-path hop count over all ordered pairs.
  int diameter() const;

  static CameraGraph from_json(std::string_view text);
  static CameraGraph load(const std::string& path);
  static CameraGraph from_scenario(const sim::Scenario& scenario);
  std::string to_json() const;
};

struct SearchState {
  std::string origin;
  int iteration = 1;
  std::set<std::string> visited;
};

// Cameras within `iteration` hops of the origin ordered by (hops, declaration
// order); every other camera once the ring is empty or the iteration passes
// the graph diameter.
std::vector<std::string> recommend_cameras(const CameraGraph& graph, const SearchState& state);

struct Hit {
  std::string camera;
  BBox box;
  double similarity = 0.0;
};

struct SearchOutcome {
  std::optional<Hit> hit;
  std::vector<std::string> searched;     // cameras that had a frame and answered
  std::vector<std::string> unavailable;  // detector/embedder failures, skipped
  std::size_t candidates = 0;
};

// One search round over the recommended cameras. All person crops of all
// searched cameras form a single candidate pool matched against the original
// target features. On failure the iteration advances.
SearchOutcome search_step(SearchState& state, const CameraGraph& graph, const std::map<std::string, Frame>& frames,
                          const Detector& detector, const Embedder& embedder,
                          const AppearanceVector& target_features, double s_min = 0.6);

}  // namespace handoff::inter
