#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "handoff/geometry.hpp"
#include "handoff/image.hpp"

namespace handoff::sim {

// World coordinates are meters; each camera maps its field of view (an
// axis-aligned world rectangle) onto its full pixel raster.

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct Waypoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct Agent {
  std::string id;
  Rgb color{};
  double width = 0.6;
  double height = 1.2;
  std::vector<Waypoint> waypoints;
};

struct Occluder {
  Rect rect;
  Rgb color{};
};

struct Camera {
  std::string id;
  Rect fov;
  int width = 640;
  int height = 360;
};

// Optional operator selection stored alongside a scenario so reference runs
// are self-describing.
struct Selection {
  std::string camera;
  long frame = 0;
  BBox box;
  std::string agent;
};

struct Scenario {
  std::string name;
  Vec2 world_size{64.0, 36.0};
  double fps = 30.0;
  double duration = 10.0;
  Rgb background{128, 128, 128};
  std::vector<Agent> agents;
  std::vector<Occluder> occluders;
  std::vector<Camera> cameras;
  std::optional<Selection> selection;
  // Directed camera adjacency, serialized under "camera_graph" with the same
  // schema as a standalone camera graph file. Empty when not given.
  std::map<std::string, std::vector<std::string>> adjacency;

  long frame_count() const;
  double time_of(long frame_index) const { return static_cast<double>(frame_index) / fps; }
  const Camera& camera(std::string_view id) const;
  const Camera* find_camera(std::string_view id) const;
  int agent_index(std::string_view id) const;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ScenarioError naming the offending element (e.g. the two cameras whose FOVs overlap).
void validate(const Scenario& scenario);

Scenario scenario_from_json(std::string_view text);
std::string scenario_to_json(const Scenario& scenario);
Scenario load_scenario(const std::string& path);

std::optional<Vec2> agent_pose(const Scenario& scenario, std::string_view agent_id, double t);

// Unclipped pixel projection of an agent standing at `pose`.
BBox project(const Camera& camera, const Rect& world_rect);

Image render(const Scenario& scenario, std::string_view camera_id, long frame_index);

struct GroundTruthEntry {
  std::string agent_id;
  BBox bbox;  // clipped to the frame
  double visible_fraction = 0.0;
};

std::vector<GroundTruthEntry> ground_truth(const Scenario& scenario, std::string_view camera_id,
                                           long frame_index);

std::optional<GroundTruthEntry> ground_truth_for(const Scenario& scenario, std::string_view camera_id,
                                                 long frame_index, std::string_view agent_id);

// Index of the agent owning the largest share of rendered pixels inside `box`,
// provided that share reaches `min_share` of the crop; nullopt for background.
std::optional<int> dominant_agent(const Scenario& scenario, std::string_view camera_id, long frame_index,
                                  const BBox& box, double min_share = 0.25);

// Built-in scenarios: "crossing" (group crossing in front of the target),
// "calm" (no crossings), "handoff" (route cam0 -> cam2 -> cam5 over six cameras).
Scenario builtin_scenario(std::string_view name);
std::vector<std::string> builtin_scenario_names();

// Accepts a file path or "builtin:<name>".
Scenario resolve_scenario(const std::string& spec);

}  // namespace handoff::sim
