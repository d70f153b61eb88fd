#include "handoff/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace handoff::cmd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// "kind:rest" -> (kind, rest)
std::pair<std::string, std::string> split_kind(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, ""};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

std::map<std::string, double> parse_params(const std::string& text, const std::string& what) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError(what + ": expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0') throw ValidationError(what + ": '" + key + "' needs a number");
    out[key] = v;
  }
  return out;
}

template <typename T>
void take(std::map<std::string, double>& params, const std::string& key, T& dst) {
  const auto it = params.find(key);
  if (it == params.end()) return;
  dst = static_cast<T>(it->second);
  params.erase(it);
}

void reject_leftovers(const std::map<std::string, double>& params, const std::string& what) {
  if (!params.empty()) throw ValidationError(what + ": unknown parameter '" + params.begin()->first + "'");
}

Frame render_frame(const sim::Scenario& scenario, const std::string& camera, long index) {
  return Frame{camera, index, std::make_shared<const Image>(sim::render(scenario, camera, index))};
}

std::map<std::string, Frame> render_required(const sim::Scenario& scenario, const std::vector<std::string>& cams,
                                             long index) {
  std::map<std::string, Frame> frames;
  for (const auto& c : cams) frames.emplace(c, render_frame(scenario, c, index));
  return frames;
}

json report_json(const EvalReport& r) {
  return {{"precision", r.precision}, {"recall", r.recall},       {"f1", r.f1},
          {"mean_iou", r.mean_iou},   {"mean_iou_all", r.mean_iou_all}, {"ope", r.ope},
          {"tp", r.tp},               {"fp", r.fp},               {"fn", r.fn},
          {"frames_evaluated", r.frames_evaluated}};
}

std::string report_cells(const EvalReport& r) {
  return fmt::format("{:>9.3f} {:>7.3f} {:>7.3f} {:>7.3f} {:>8.2f} {:>7}", r.precision, r.recall, r.f1, r.mean_iou,
                     r.ope, r.frames_evaluated);
}

constexpr char kTableHeader[] = "{:<12} {:>9} {:>7} {:>7} {:>7} {:>8} {:>7}\n";

}  // namespace

std::shared_ptr<const sim::Scenario> load_scenario_checked(const std::string& spec) {
  try {
    return std::make_shared<const sim::Scenario>(sim::resolve_scenario(spec));
  } catch (const sim::ScenarioError& e) {
    throw ValidationError(std::string("invalid scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

Backends make_backends(const RunConfig& config, const std::shared_ptr<const sim::Scenario>& scenario) {
  Backends b;

  const auto [dkind, drest] = split_kind(config.detector);
  if (dkind == "oracle") {
    auto params = parse_params(drest, "detector");
    OracleDetectorParams p;
    p.seed = config.seed;
    take(params, "jitter", p.jitter_sigma);
    take(params, "dropout", p.dropout_prob);
    take(params, "fp", p.false_positive_rate);
    take(params, "min_visible", p.min_visible_fraction);
    reject_leftovers(params, "detector");
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("detector: ") + e.what());
    }
    b.detector = std::make_shared<OracleDetector>(scenario, p);
  } else if (dkind == "file") {
    if (drest.empty()) throw ValidationError("detector: file needs a path");
    std::map<std::string, FileDetector::Table> tables;
    try {
      if (fs::is_directory(drest)) {
        // One table per camera: <dir>/<camdir>/detections.csv or <dir>/<camera>.csv
        for (const auto& c : scenario->cameras) {
          for (const fs::path& p : {fs::path(drest) / camera_dir_name(c.id) / "detections.csv",
                                   fs::path(drest) / (c.id + ".csv")}) {
            if (fs::exists(p)) {
              tables[c.id] = FileDetector::load(p.string());
              break;
            }
          }
        }
      } else {
        tables["*"] = FileDetector::load(drest);
      }
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("detector: ") + e.what());
    }
    b.detector = std::make_shared<FileDetector>(std::move(tables));
  } else if (dkind == "remote") {
    if (drest.empty()) throw ValidationError("detector: remote needs a URL");
    b.detector = std::make_shared<RemoteDetector>(drest);
  } else {
    throw ValidationError("unknown detector '" + config.detector + "' (oracle, file:<path>, remote:<url>)");
  }

  const auto [ekind, erest] = split_kind(config.embedder);
  if (ekind == "oracle") {
    auto params = parse_params(erest, "embedder");
    OracleEmbedderParams p;
    p.seed = config.seed;
    take(params, "dim", p.dim);
    take(params, "noise", p.noise_sigma);
    take(params, "min_share", p.min_share);
    reject_leftovers(params, "embedder");
    if (p.dim < 2 || p.noise_sigma < 0.0 || p.min_share < 0.0 || p.min_share > 1.0)
      throw ValidationError("embedder: need dim >= 2, noise >= 0 and min_share in [0,1]");
    b.embedder = std::make_shared<OracleEmbedder>(scenario, p);
  } else if (ekind == "histogram") {
    b.embedder = std::make_shared<HistogramEmbedder>();
  } else if (ekind == "remote") {
    if (erest.empty()) throw ValidationError("embedder: remote needs a URL");
    b.embedder = std::make_shared<RemoteEmbedder>(erest);
  } else {
    throw ValidationError("unknown embedder '" + config.embedder + "' (oracle, histogram, remote:<url>)");
  }
  return b;
}

inter::CameraGraph make_graph(const RunConfig& config, const sim::Scenario& scenario) {
  try {
    auto g = config.graph ? inter::CameraGraph::load(*config.graph) : inter::CameraGraph::from_scenario(scenario);
    for (const auto& c : scenario.cameras)
      if (!g.contains(c.id)) throw ValidationError("camera graph does not list scenario camera '" + c.id + "'");
    return g;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

CoordinatorConfig make_coordinator_config(const RunConfig& config) {
  CoordinatorConfig c;
  c.intra.occlusion_assessment = config.occlusion;
  if (config.iou_threshold) c.intra.iou_threshold = *config.iou_threshold;
  if (config.search_s_min) c.search_s_min = *config.search_s_min;
  c.intra.reid_s_min = config.acquire_s_min.value_or(c.search_s_min);
  try {
    c.intra.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (c.search_s_min < -1.0 || c.search_s_min > 1.0) throw ValidationError("--s-min must lie in [-1,1]");
  return c;
}

sim::Selection parse_selection(const std::string& text) {
  static const std::regex re(R"(^([^:]+):(\d+):(-?[0-9.]+),(-?[0-9.]+),(-?[0-9.]+),(-?[0-9.]+)$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw ValidationError("selection must look like camera:frame:x,y,w,h");
  sim::Selection s;
  s.camera = m[1];
  s.frame = std::stol(m[2]);
  s.box = {std::stod(m[3]), std::stod(m[4]), std::stod(m[5]), std::stod(m[6])};
  return s;
}

sim::Selection resolve_selection(const RunConfig& config, const sim::Scenario& scenario) {
  sim::Selection s;
  if (config.select) s = parse_selection(*config.select);
  else if (scenario.selection) s = *scenario.selection;
  else throw ValidationError("scenario has no stored selection; pass --select camera:frame:x,y,w,h");
  if (!scenario.find_camera(s.camera)) throw ValidationError("selection camera '" + s.camera + "' is not in the scenario");
  if (s.frame < 0 || s.frame >= scenario.frame_count())
    throw ValidationError(fmt::format("selection frame {} is beyond the scenario's {} frames", s.frame,
                                      scenario.frame_count()));
  if (!s.box.valid() || s.box.empty()) throw ValidationError("selection box must have positive area");
  const auto& cam = scenario.camera(s.camera);
  if (clip_to(s.box, cam.width, cam.height).empty()) throw ValidationError("selection box lies outside the frame");
  return s;
}

TrackRun run_track(const RunConfig& config) {
  const auto scenario = load_scenario_checked(config.scenario);
  const auto backends = make_backends(config, scenario);
  const auto graph = make_graph(config, *scenario);
  const auto cc = make_coordinator_config(config);
  const auto sel = resolve_selection(config, *scenario);

  TrackRun run;
  run.track = select_target("t-000001", render_frame(*scenario, sel.camera, sel.frame), sel.box,
                            *backends.embedder, cc);
  const Pipeline pipeline{*backends.detector, *backends.embedder, graph, cc};
  const long last = scenario->frame_count() - 1;
  for (long f = sel.frame + 1; f <= last; ++f) {
    const auto frames = render_required(*scenario, required_cameras(run.track, graph), f);
    const auto u = process_tick(run.track, f, frames, pipeline);
    spdlog::debug("frame {} {} {}", f, u.camera_id, u.state);
    ++run.ticks;
  }
  finalize(run.track, last);

  run.results_json = results_to_json(run.track);
  run.map_svg = render_trajectory_map(run.track.trajectory, layout_from_scenario(*scenario, 800, 600), 800, 600);
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_file(fs::path(config.out_dir) / "results.json", run.results_json);
    write_file(fs::path(config.out_dir) / "map.svg", run.map_svg);
  }
  return run;
}

// ---------------------------------------------------------------------------

std::optional<BBox> GroundTruth::at(const std::string& camera, long frame) const {
  const auto c = boxes.find(camera);
  if (c == boxes.end()) return std::nullopt;
  const auto f = c->second.find(frame);
  if (f == c->second.end()) return std::nullopt;
  return f->second;
}

std::vector<std::string> GroundTruth::cameras() const {
  std::vector<std::string> out;
  for (const auto& [c, _] : boxes) out.push_back(c);
  return out;
}

GroundTruth ground_truth_from_scenario(const sim::Scenario& scenario, const std::string& agent, double min_visible) {
  if (scenario.agent_index(agent) < 0) throw ValidationError("scenario has no agent '" + agent + "'");
  GroundTruth gt;
  for (const auto& cam : scenario.cameras) {
    auto& per = gt.boxes[cam.id];
    for (long f = 0; f < scenario.frame_count(); ++f) {
      const auto e = sim::ground_truth_for(scenario, cam.id, f, agent);
      if (e && e->visible_fraction >= min_visible && !e->bbox.empty()) per.emplace(f, e->bbox);
    }
  }
  return gt;
}

GroundTruth ground_truth_from_csv(const std::string& path, const std::string& camera, const std::string& agent,
                                  double min_visible) {
  std::istringstream in(read_file(path));
  GroundTruth gt;
  auto& per = gt.boxes[camera];
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])))) continue;  // header or blank
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 7) throw ValidationError(fmt::format("{}:{}: expected 7 columns", path, lineno));
    if (cols[1] != agent) continue;
    try {
      const long frame = std::stol(cols[0]);
      const BBox b{std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4]), std::stod(cols[5])};
      if (std::stod(cols[6]) >= min_visible && !b.empty()) per[frame] = b;
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}:{}: malformed number", path, lineno));
    }
  }
  return gt;
}

GroundTruth ground_truth_from_otb(std::string_view text, const std::string& camera) {
  GroundTruth gt;
  auto& per = gt.boxes[camera];
  std::istringstream in{std::string(text)};
  std::string line;
  long frame = 0;
  while (std::getline(in, line)) {
    std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == '\t' || c == '\r'; }, ' ');
    std::istringstream ls(line);
    double v[4];
    if (!(ls >> v[0] >> v[1] >> v[2] >> v[3])) {
      if (line.find_first_not_of(' ') == std::string::npos) continue;
      throw ValidationError(fmt::format("OTB ground truth line {}: expected x,y,w,h", frame + 1));
    }
    const BBox b{v[0], v[1], v[2], v[3]};
    if (b.valid() && !b.empty()) per[frame] = b;
    ++frame;
  }
  return gt;
}

EvalTable evaluate(const Results& results, const GroundTruth& gt, double tau, std::optional<long> first_frame,
                   std::optional<long> last_frame) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("--tau must lie in (0,1)");
  EvalTable table;
  table.tau = tau;
  table.first_frame = first_frame.value_or(results.phases.empty() ? 0 : results.phases.front().frame + 1);
  table.last_frame = last_frame.value_or(results.phases.empty() ? -1 : results.phases.back().frame);

  std::map<std::string, std::map<long, BBox>> pred;
  for (const auto& e : results.entries) pred[e.camera][e.frame] = e.box;
  std::set<std::string> cameras;
  for (const auto& [c, _] : pred) cameras.insert(c);
  for (const auto& c : gt.cameras()) cameras.insert(c);

  std::vector<FrameMatch> all;
  double sums[6] = {0, 0, 0, 0, 0, 0};
  int counted = 0;
  for (const auto& cam : cameras) {
    std::vector<FrameMatch> matches;
    const auto pc = pred.find(cam);
    for (long f = table.first_frame; f <= table.last_frame; ++f) {
      std::optional<BBox> p;
      if (pc != pred.end()) {
        const auto it = pc->second.find(f);
        if (it != pc->second.end()) p = it->second;
      }
      matches.push_back(classify_frame(p, gt.at(cam, f), tau));
    }
    const auto r = aggregate(matches);
    all.insert(all.end(), matches.begin(), matches.end());
    if (r.frames_evaluated == 0) continue;
    table.rows.push_back({cam, r});
    sums[0] += r.precision;
    sums[1] += r.recall;
    sums[2] += r.f1;
    sums[3] += r.mean_iou;
    sums[4] += r.mean_iou_all;
    sums[5] += r.ope;
    table.mean.tp += r.tp;
    table.mean.fp += r.fp;
    table.mean.fn += r.fn;
    table.mean.frames_evaluated += r.frames_evaluated;
    ++counted;
  }
  if (counted > 0) {
    table.mean.precision = sums[0] / counted;
    table.mean.recall = sums[1] / counted;
    table.mean.f1 = sums[2] / counted;
    table.mean.mean_iou = sums[3] / counted;
    table.mean.mean_iou_all = sums[4] / counted;
    table.mean.ope = sums[5] / counted;
  }
  table.overall = aggregate(all);
  return table;
}

std::string eval_to_json(const EvalTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json j = report_json(r.report);
    j["camera"] = r.camera;
    rows.push_back(j);
  }
  return json{{"tau", t.tau},
              {"first_frame", t.first_frame},
              {"last_frame", t.last_frame},
              {"cameras", rows},
              {"mean", report_json(t.mean)},
              {"overall", report_json(t.overall)}}
             .dump(2) +
         "\n";
}

std::string eval_to_text(const EvalTable& t) {
  std::string out = fmt::format(kTableHeader, "camera", "precision", "recall", "f1", "iou", "ope", "frames");
  for (const auto& r : t.rows) out += fmt::format("{:<12} {}\n", r.camera, report_cells(r.report));
  out += fmt::format("{:<12} {}\n", "mean", report_cells(t.mean));
  out += fmt::format("{:<12} {}\n", "overall", report_cells(t.overall));
  return out;
}

// ---------------------------------------------------------------------------

AblationReport run_ablation(const RunConfig& config, double tau) {
  const auto scenario = load_scenario_checked(config.scenario);
  const auto sel = resolve_selection(config, *scenario);
  std::string agent = sel.agent;
  if (agent.empty()) {
    const auto owner = sim::dominant_agent(*scenario, sel.camera, sel.frame, sel.box);
    if (!owner) throw ValidationError("selection box does not cover any agent; cannot score the ablation");
    agent = scenario->agents[static_cast<std::size_t>(*owner)].id;
  }
  const auto gt = ground_truth_from_scenario(*scenario, agent);

  AblationReport rep;
  RunConfig on = config, off = config;
  on.occlusion = true;
  off.occlusion = false;
  on.out_dir.clear();
  off.out_dir.clear();
  const auto run_on = run_track(on);
  const auto run_off = run_track(off);
  rep.results_on = run_on.results_json;
  rep.results_off = run_off.results_json;
  rep.on = evaluate(results_from_json(rep.results_on), gt, tau);
  rep.off = evaluate(results_from_json(rep.results_off), gt, tau);

  if (!config.out_dir.empty()) {
    const fs::path dir(config.out_dir);
    fs::create_directories(dir / "on");
    fs::create_directories(dir / "off");
    write_file(dir / "on" / "results.json", rep.results_on);
    write_file(dir / "on" / "map.svg", run_on.map_svg);
    write_file(dir / "off" / "results.json", rep.results_off);
    write_file(dir / "off" / "map.svg", run_off.map_svg);
    write_file(dir / "ablation.json", ablation_to_json(rep));
  }
  return rep;
}

std::string ablation_to_json(const AblationReport& r) {
  const auto& a = r.on.overall;
  const auto& b = r.off.overall;
  return json{{"with_occlusion_assessment", json::parse(eval_to_json(r.on))},
              {"without_occlusion_assessment", json::parse(eval_to_json(r.off))},
              {"delta",
               {{"precision", a.precision - b.precision},
                {"recall", a.recall - b.recall},
                {"f1", a.f1 - b.f1},
                {"mean_iou", a.mean_iou - b.mean_iou},
                {"ope", a.ope - b.ope}}}}
             .dump(2) +
         "\n";
}

std::string ablation_to_text(const AblationReport& r) {
  const auto& a = r.on.overall;
  const auto& b = r.off.overall;
  std::string out = fmt::format(kTableHeader, "occlusion", "precision", "recall", "f1", "iou", "ope", "frames");
  out += fmt::format("{:<12} {}\n", "with", report_cells(a));
  out += fmt::format("{:<12} {}\n", "without", report_cells(b));
  out += fmt::format("{:<12} {:>+9.3f} {:>+7.3f} {:>+7.3f} {:>+7.3f} {:>+8.2f}\n", "delta", a.precision - b.precision,
                     a.recall - b.recall, a.f1 - b.f1, a.mean_iou - b.mean_iou, a.ope - b.ope);
  return out;
}

// ---------------------------------------------------------------------------

BenchReport run_bench(const RunConfig& config, std::optional<std::pair<int, int>> resolution,
                      std::optional<long> max_ticks) {
  auto base = load_scenario_checked(config.scenario);
  auto sel = resolve_selection(config, *base);
  std::shared_ptr<const sim::Scenario> scenario = base;
  if (resolution) {
    if (resolution->first <= 0 || resolution->second <= 0) throw ValidationError("resolution must be positive");
    auto scaled = std::make_shared<sim::Scenario>(*base);
    for (auto& c : scaled->cameras) {
      const double sx = static_cast<double>(resolution->first) / c.width;
      const double sy = static_cast<double>(resolution->second) / c.height;
      if (c.id == sel.camera) sel.box = {sel.box.x * sx, sel.box.y * sy, sel.box.w * sx, sel.box.h * sy};
      c.width = resolution->first;
      c.height = resolution->second;
    }
    scenario = scaled;
  }
  const auto backends = make_backends(config, scenario);
  const auto graph = make_graph(config, *scenario);
  const auto cc = make_coordinator_config(config);

  BenchReport rep;
  rep.camera = sel.camera;
  rep.width = scenario->camera(sel.camera).width;
  rep.height = scenario->camera(sel.camera).height;

  Track track = select_target("bench", render_frame(*scenario, sel.camera, sel.frame), sel.box, *backends.embedder, cc);
  const Pipeline pipeline{*backends.detector, *backends.embedder, graph, cc};
  std::vector<double> latencies;
  for (long f = sel.frame + 1; f < scenario->frame_count(); ++f) {
    if (max_ticks && rep.ticks >= *max_ticks) break;
    const auto frames = render_required(*scenario, required_cameras(track, graph), f);
    const auto t0 = std::chrono::steady_clock::now();
    process_tick(track, f, frames, pipeline);
    const auto t1 = std::chrono::steady_clock::now();
    latencies.push_back(std::chrono::duration<double>(t1 - t0).count());
    ++rep.ticks;
  }
  for (double l : latencies) rep.total_seconds += l;
  if (!latencies.empty()) {
    rep.mean_latency_ms = 1e3 * rep.total_seconds / static_cast<double>(latencies.size());
    std::sort(latencies.begin(), latencies.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(latencies.size()))) - 1;
    rep.p95_latency_ms = 1e3 * latencies[k];
  }
  rep.fps = rep.total_seconds > 0.0 ? static_cast<double>(rep.ticks) / rep.total_seconds : 0.0;
  return rep;
}

std::string bench_to_json(const BenchReport& r) {
  return json{{"camera", r.camera},
              {"width", r.width},
              {"height", r.height},
              {"ticks", r.ticks},
              {"total_seconds", r.total_seconds},
              {"fps", r.fps},
              {"mean_latency_ms", r.mean_latency_ms},
              {"p95_latency_ms", r.p95_latency_ms}}
             .dump(2) +
         "\n";
}

std::string bench_to_text(const BenchReport& r) {
  return fmt::format("camera {} at {}x{}: {} ticks, {:.1f} FPS, mean {:.2f} ms, p95 {:.2f} ms\n", r.camera, r.width,
                     r.height, r.ticks, r.fps, r.mean_latency_ms, r.p95_latency_ms);
}

// ---------------------------------------------------------------------------

std::string camera_dir_name(const std::string& camera_id) {
  return camera_id.rfind("cam", 0) == 0 ? camera_id : "cam" + camera_id;
}

SimulateSummary run_simulate(const std::string& scenario_spec, const std::string& out_dir) {
  const auto scenario = load_scenario_checked(scenario_spec);
  const fs::path root(out_dir);
  fs::create_directories(root);
  write_file(root / "scenario.json", sim::scenario_to_json(*scenario));

  SimulateSummary summary;
  summary.frames_per_camera = scenario->frame_count();
  for (const auto& cam : scenario->cameras) {
    const fs::path dir = root / camera_dir_name(cam.id);
    fs::create_directories(dir);
    summary.camera_dirs.push_back(dir.string());
    std::string csv = "frame_index,agent_id,x,y,w,h,visible_fraction\n";
    std::string otb;
    for (long f = 0; f < scenario->frame_count(); ++f) {
      write_file(dir / fmt::format("{:06}.ppm", f), encode_ppm(sim::render(*scenario, cam.id, f)));
      for (const auto& e : sim::ground_truth(*scenario, cam.id, f))
        csv += fmt::format("{},{},{},{},{},{},{}\n", f, e.agent_id, e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h,
                           e.visible_fraction);
      if (scenario->selection && !scenario->selection->agent.empty()) {
        const auto e = sim::ground_truth_for(*scenario, cam.id, f, scenario->selection->agent);
        if (e && e->visible_fraction >= kGroundTruthMinVisible)
          otb += fmt::format("{},{},{},{}\n", e->bbox.x, e->bbox.y, e->bbox.w, e->bbox.h);
        else
          otb += "0,0,0,0\n";
      }
    }
    write_file(dir / "gt.csv", csv);
    if (!otb.empty()) write_file(dir / fmt::format("groundtruth_{}.txt", scenario->selection->agent), otb);
  }
  return summary;
}

// ---------------------------------------------------------------------------

svc::ServiceOptions service_options(const RunConfig& config) {
  svc::ServiceOptions o;
  o.scenario = load_scenario_checked(config.scenario);
  const auto b = make_backends(config, o.scenario);
  o.detector = b.detector;
  o.embedder = b.embedder;
  o.graph = make_graph(config, *o.scenario);
  o.config = make_coordinator_config(config);
  return o;
}

std::string run_replay(const RunConfig& config, const std::string& base_url) {
  const auto scenario = load_scenario_checked(config.scenario);
  const auto sel = resolve_selection(config, *scenario);
  httplib::Client client(base_url);
  client.set_read_timeout(120, 0);
  client.set_write_timeout(120, 0);

  const auto post = [&](const std::string& path, const json& body, int expect) {
    const auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw std::runtime_error("request to " + base_url + path + " failed: " + httplib::to_string(res.error()));
    if (res->status != expect)
      throw std::runtime_error(fmt::format("{} returned {}: {}", path, res->status, res->body));
    return json::parse(res->body);
  };
  const auto frame_b64 = [&](const std::string& cam, long f) {
    return base64_encode(encode_ppm(sim::render(*scenario, cam, f)));
  };

  const auto created = post("/api/v1/tracks",
                            {{"camera_id", sel.camera},
                             {"frame_index", sel.frame},
                             {"bbox", {{"x", sel.box.x}, {"y", sel.box.y}, {"w", sel.box.w}, {"h", sel.box.h}}},
                             {"frame_b64", frame_b64(sel.camera, sel.frame)}},
                            201);
  const std::string id = created.at("track_id");

  const long last = scenario->frame_count() - 1;
  for (long f = sel.frame + 1; f <= last; ++f)
    for (const auto& cam : scenario->cameras)
      post("/api/v1/cameras/" + cam.id + "/frames",
           {{"camera_id", cam.id}, {"frame_index", f}, {"frame_b64", frame_b64(cam.id, f)}}, 200);
  post("/api/v1/tracks/" + id + "/finish", {{"frame", last}}, 200);

  const auto res = client.Get("/api/v1/tracks/" + id + "/trajectory");
  if (!res || res->status != 200) throw std::runtime_error("cannot fetch trajectory for " + id);
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_file(fs::path(config.out_dir) / "results.json", res->body);
  }
  return res->body;
}

void init_logging() {
  auto logger = spdlog::stderr_color_mt("handoff");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("HANDOFF_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"
    if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
  }
}

}  // namespace handoff::cmd
