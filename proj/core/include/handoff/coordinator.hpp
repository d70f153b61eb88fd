#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "handoff/inter.hpp"
#include "handoff/intra.hpp"
#include "handoff/perception.hpp"

namespace handoff {

struct TrajectoryEntry {
  std::string camera;
  long frame = 0;
  BBox box;
  std::string status;  // "reacquired" | "tracking"

  friend bool operator==(const TrajectoryEntry&, const TrajectoryEntry&) = default;
};

struct PhaseEvent {
  long frame = 0;
  std::string camera;
  std::string phase;  // "intra" | "searching" | "done"

  friend bool operator==(const PhaseEvent&, const PhaseEvent&) = default;
};

struct IntraPhase {
  std::string camera;
  intra::IntraState state;
};
struct SearchingPhase {
  inter::SearchState state;
};
struct DonePhase {
  std::string last_camera;
};
using TrackPhase = std::variant<IntraPhase, SearchingPhase, DonePhase>;

// What a client sees after a tick: the wire-level state name, the box when
// there is one, and the camera the state refers to.
struct TrackUpdate {
  std::string track_id;
  std::string state;  // acquiring | tracking | low_confidence | occluded | searching | exited | done
  std::optional<BBox> bbox;
  std::string camera_id;
  long frame = 0;
};

struct Track {
  std::string id;
  Image target_crop;
  AppearanceVector target_features;
  TrackPhase phase;
  std::vector<TrajectoryEntry> trajectory;
  std::vector<PhaseEvent> phases;
  long clock = 0;  // next frame index the track expects
  long stalls = 0;
  TrackUpdate last_update;

  bool done() const { return std::holds_alternative<DonePhase>(phase); }
  // Camera the track is currently bound to (the search origin while searching).
  std::string current_camera() const;
};

struct CoordinatorConfig {
  intra::IntraConfig intra;
  double search_s_min = 0.6;
};

// Everything a tick needs besides the track and the frames.
struct Pipeline {
  const Detector& detector;
  const Embedder& embedder;
  const inter::CameraGraph& graph;
  CoordinatorConfig config;
};

// Stores the crop and its embedding as the permanent target appearance; the
// first tick re-acquires the target rather than trusting the possibly stale box.
// Throws std::invalid_argument for a degenerate box or one outside the frame.
Track select_target(std::string track_id, const Frame& frame, const BBox& user_box, const Embedder& embedder,
                    const CoordinatorConfig& config = {});

// Cameras whose frame at `track.clock` the next tick consumes.
std::vector<std::string> required_cameras(const Track& track, const inter::CameraGraph& graph);

// Advances the track by one frame. A missing frame for the bound camera (or for
// every recommended camera while searching) records a stall and changes nothing else.
TrackUpdate process_tick(Track& track, long frame_index, const std::map<std::string, Frame>& frames,
                         const Pipeline& pipeline);

// End of input: the track becomes Done at `last_frame`.
void finalize(Track& track, long last_frame);

std::string results_to_json(const Track& track);

struct Results {
  std::string track_id;
  std::vector<TrajectoryEntry> entries;
  std::vector<PhaseEvent> phases;
};
Results results_from_json(std::string_view text);
Results load_results(const std::string& path);

std::string update_to_json(const TrackUpdate& update);

struct MapPoint {
  double x = 0.0;
  double y = 0.0;
};
using MapLayout = std::map<std::string, MapPoint>;

// Camera FOV centers scaled into a map of the given size.
MapLayout layout_from_scenario(const sim::Scenario& scenario, double map_w, double map_h);

// Maximal runs of consecutive same-camera trajectory entries: (camera, first frame, last frame).
struct CameraVisit {
  std::string camera;
  long first_frame = 0;
  long last_frame = 0;
};
std::vector<CameraVisit> camera_visits(const std::vector<TrajectoryEntry>& trajectory);

// SVG node-path map: one labeled node per camera, visited nodes highlighted, a
// polyline through the visit sequence and per-visit frame ranges. Throws
// std::invalid_argument naming any visited camera missing from `layout`.
std::string render_trajectory_map(const std::vector<TrajectoryEntry>& trajectory, const MapLayout& layout,
                                  double map_w, double map_h);

}  // namespace handoff
