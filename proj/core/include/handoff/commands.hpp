#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "handoff/coordinator.hpp"
#include "handoff/geometry.hpp"
#include "handoff/inter.hpp"
#include "handoff/perception.hpp"
#include "handoff/service.hpp"
#include "handoff/simworld.hpp"

namespace handoff::cmd {

// Bad input from the user (exit code 1). Anything else that escapes is a
// runtime failure (exit code 2).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string scenario = "builtin:crossing";
  std::uint64_t seed = 0;
  bool occlusion = true;
  // "oracle[:key=value,...]", "file:<path>", "remote:<url>"
  std::string detector = "oracle";
  // "oracle[:key=value,...]", "histogram", "remote:<url>"
  std::string embedder = "oracle";
  std::optional<double> iou_threshold;
  std::optional<double> search_s_min;
  std::optional<double> acquire_s_min;
  std::optional<std::string> graph;  // camera graph file; defaults to the scenario's
  std::optional<std::string> select;  // "camera:frame:x,y,w,h"; defaults to the scenario's
  std::string out_dir;
};

struct Backends {
  std::shared_ptr<const Detector> detector;
  std::shared_ptr<const Embedder> embedder;
};

std::shared_ptr<const sim::Scenario> load_scenario_checked(const std::string& spec);
Backends make_backends(const RunConfig& config, const std::shared_ptr<const sim::Scenario>& scenario);
inter::CameraGraph make_graph(const RunConfig& config, const sim::Scenario& scenario);
CoordinatorConfig make_coordinator_config(const RunConfig& config);

// "cam0:12:100,80,40,90" -> Selection (agent left empty).
sim::Selection parse_selection(const std::string& text);
// The --select value if given, else the scenario's stored selection; checked against the scenario.
sim::Selection resolve_selection(const RunConfig& config, const sim::Scenario& scenario);

struct TrackRun {
  Track track;
  std::string results_json;
  std::string map_svg;
  long ticks = 0;
};

// Offline run over the whole scenario. Writes results.json and map.svg when
// config.out_dir is set.
TrackRun run_track(const RunConfig& config);

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr double kGroundTruthMinVisible = 0.3;

// Ground truth for one target: (camera, frame) -> box.
struct GroundTruth {
  std::map<std::string, std::map<long, BBox>> boxes;

  std::optional<BBox> at(const std::string& camera, long frame) const;
  std::vector<std::string> cameras() const;
};

// Target boxes from the simulator; frames where less than `min_visible` of the
// target shows are absent.
GroundTruth ground_truth_from_scenario(const sim::Scenario& scenario, const std::string& agent,
                                       double min_visible = kGroundTruthMinVisible);
// The per-camera CSV written by `simulate` (frame_index,agent_id,x,y,w,h,visible_fraction).
GroundTruth ground_truth_from_csv(const std::string& path, const std::string& camera, const std::string& agent,
                                  double min_visible = kGroundTruthMinVisible);
// OTB style: line i holds frame i as x,y,w,h separated by commas, tabs or spaces.
// A zero-area line means the target is absent.
GroundTruth ground_truth_from_otb(std::string_view text, const std::string& camera);

struct EvalRow {
  std::string camera;
  EvalReport report;
};

struct EvalTable {
  double tau = kDefaultMatchThreshold;
  long first_frame = 0;
  long last_frame = -1;
  std::vector<EvalRow> rows;
  EvalReport mean;     // unweighted mean over cameras with evaluated frames
  EvalReport overall;  // all frames pooled
};

// Scores frames first_frame..last_frame (inclusive) on every camera that has
// predictions or ground truth. Without explicit bounds the window runs from the
// frame after selection to the final phase event.
EvalTable evaluate(const Results& results, const GroundTruth& gt, double tau,
                   std::optional<long> first_frame = std::nullopt, std::optional<long> last_frame = std::nullopt);

std::string eval_to_json(const EvalTable& table);
std::string eval_to_text(const EvalTable& table);

// ---------------------------------------------------------------------------

struct AblationReport {
  EvalTable on;
  EvalTable off;
  std::string results_on;
  std::string results_off;
};

// Runs the tracker with and without occlusion assessment and scores both
// against the scenario's ground truth for the selected agent.
AblationReport run_ablation(const RunConfig& config, double tau = kDefaultMatchThreshold);
std::string ablation_to_json(const AblationReport& report);
std::string ablation_to_text(const AblationReport& report);

struct BenchReport {
  std::string camera;
  int width = 0;
  int height = 0;
  long ticks = 0;
  double total_seconds = 0.0;
  double fps = 0.0;
  double mean_latency_ms = 0.0;
  double p95_latency_ms = 0.0;
};

// Times process_tick over the scenario (rendering excluded). `resolution`
// rescales every camera and the selection box.
BenchReport run_bench(const RunConfig& config, std::optional<std::pair<int, int>> resolution = std::nullopt,
                      std::optional<long> max_ticks = std::nullopt);
std::string bench_to_json(const BenchReport& report);
std::string bench_to_text(const BenchReport& report);

struct SimulateSummary {
  std::vector<std::string> camera_dirs;
  long frames_per_camera = 0;
};

// Writes <out>/<camdir>/{frame:06}.ppm and <out>/<camdir>/gt.csv for every
// camera, plus OTB ground truth for the selected agent when the scenario has one.
SimulateSummary run_simulate(const std::string& scenario_spec, const std::string& out_dir);

std::string camera_dir_name(const std::string& camera_id);

// Service wiring shared by `serve` and in-process tests.
svc::ServiceOptions service_options(const RunConfig& config);

// Pushes the scenario through a running service in frame order, finishes the
// track and returns the served trajectory JSON.
std::string run_replay(const RunConfig& config, const std::string& base_url);

// Reads HANDOFF_LOG (trace|debug|info|warn|error|off) into spdlog.
void init_logging();

}  // namespace handoff::cmd
