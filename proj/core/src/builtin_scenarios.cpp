#include "handoff/simworld.hpp"

#include <cmath>

namespace handoff::sim {

namespace {

constexpr Rgb kTargetColor{200, 40, 40};

Agent walker(std::string id, Rgb color, std::vector<Waypoint> wps, double w = 0.7, double h = 1.4) {
  return Agent{std::move(id), color, w, h, std::move(wps)};
}

Camera camera(std::string id, double x, double y) { return Camera{std::move(id), Rect{x, y, 16.0, 9.0}, 640, 360}; }

void select_agent(Scenario& s, const std::string& cam, long frame, const std::string& agent) {
  const auto gt = ground_truth_for(s, cam, frame, agent);
  if (!gt) throw ScenarioError("builtin selection agent not visible");
  s.selection = Selection{cam, frame, gt->bbox, agent};
}

// Three pedestrians abreast, centered on x, running along y from y0 to y1.
std::vector<Agent> group(const std::string& prefix, const std::vector<Rgb>& colors, double x, double t0, double y0,
                         double t1, double y1) {
  std::vector<Agent> out;
  const double offsets[] = {-0.35, 0.35, 0.0};  // middle one painted last
  for (int i = 0; i < 3; ++i)
    out.push_back(walker(prefix + std::to_string(i), colors[static_cast<std::size_t>(i)],
                         {{t0, x + offsets[i], y0}, {t1, x + offsets[i], y1}}, 0.8, 1.6));
  return out;
}

// One camera; the target walks left to right while two groups run across its
// path, hiding it completely for a few frames each time.
Scenario crossing() {
  Scenario s;
  s.name = "crossing";
  s.world_size = {16.0, 9.0};
  s.duration = 11.0;
  s.cameras = {camera("cam0", 0.0, 0.0)};
  s.agents = {walker("target", kTargetColor, {{0.0, 1.5, 5.0}, {11.0, 15.0, 5.0}})};
  // The target passes x=6 at t=3.67 s and x=11 at t=7.74 s.
  for (auto& a : group("down", {{40, 60, 200}, {40, 170, 60}, {90, 110, 230}}, 6.0, 1.51, -1.5, 5.22, 11.5))
    s.agents.push_back(std::move(a));
  for (auto& a : group("up", {{220, 200, 40}, {160, 60, 180}, {230, 140, 40}}, 11.0, 6.18, 11.5, 9.89, -1.5))
    s.agents.push_back(std::move(a));
  s.occluders = {{Rect{0.5, 0.5, 0.6, 0.6}, {90, 90, 90}}};
  select_agent(s, "cam0", 5, "target");
  return s;
}

// Same target route with bystanders that never come near it.
Scenario calm() {
  Scenario s;
  s.name = "calm";
  s.world_size = {16.0, 9.0};
  s.duration = 11.0;
  s.cameras = {camera("cam0", 0.0, 0.0)};
  s.agents = {
      walker("target", kTargetColor, {{0.0, 1.5, 5.0}, {11.0, 15.0, 5.0}}),
      walker("bystander_a", {40, 60, 200}, {{0.0, 14.0, 1.2}, {11.0, 2.0, 1.2}}),
      walker("bystander_b", {40, 170, 60}, {{0.0, 2.0, 8.0}, {11.0, 14.0, 8.0}}),
  };
  select_agent(s, "cam0", 5, "target");
  return s;
}

// Six disjoint cameras; the target walks cam0 -> cam2 -> cam5 through
// unobserved corridors while bystanders wander in every camera.
Scenario handoff_route() {
  Scenario s;
  s.name = "handoff";
  s.world_size = {64.0, 46.0};
  s.duration = 34.0;
  s.cameras = {camera("cam0", 0.0, 0.0),   camera("cam1", 0.0, 24.0),  camera("cam2", 24.0, 12.0),
               camera("cam3", 48.0, 0.0),  camera("cam4", 24.0, 36.0), camera("cam5", 48.0, 24.0)};
  const double v = 2.5;
  std::vector<Waypoint> route;
  double t = 0.0;
  const std::vector<Vec2> pts{{3.0, 4.5}, {20.0, 4.5}, {20.0, 16.5}, {44.0, 16.5}, {44.0, 28.5}, {62.0, 28.5}};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) t += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y) / v;
    route.push_back({t, pts[i].x, pts[i].y});
  }
  s.agents = {
      walker("target", kTargetColor, route),
      walker("cam1_walker", {40, 60, 200}, {{0.0, 2.0, 28.0}, {34.0, 14.0, 30.0}}),
      walker("cam2_walker", {40, 170, 60}, {{0.0, 38.0, 13.2}, {34.0, 26.0, 13.2}}),
      walker("cam3_walker", {220, 200, 40}, {{0.0, 50.0, 2.0}, {34.0, 62.0, 7.0}}),
      walker("cam4_walker", {160, 60, 180}, {{0.0, 38.0, 44.0}, {34.0, 26.0, 38.0}}),
      walker("cam5_walker", {30, 190, 190}, {{0.0, 62.0, 31.8}, {34.0, 50.0, 31.8}}),
  };
  s.adjacency = {{"cam0", {"cam1", "cam2"}},         {"cam1", {"cam0", "cam4"}},
                 {"cam2", {"cam0", "cam3", "cam5"}}, {"cam3", {"cam2", "cam5"}},
                 {"cam4", {"cam1", "cam5"}},         {"cam5", {"cam2", "cam3", "cam4"}}};
  select_agent(s, "cam0", 10, "target");
  return s;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() { return {"crossing", "calm", "handoff"}; }

Scenario builtin_scenario(std::string_view name) {
  Scenario s;
  if (name == "crossing") s = crossing();
  else if (name == "calm") s = calm();
  else if (name == "handoff") s = handoff_route();
  else throw ScenarioError("unknown builtin scenario '" + std::string(name) + "'");
  validate(s);
  return s;
}

}  // namespace handoff::sim
