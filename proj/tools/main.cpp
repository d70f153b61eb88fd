#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "handoff/commands.hpp"
#include "handoff/service.hpp"

namespace fs = std::filesystem;
using namespace handoff;

namespace {

void add_run_flags(CLI::App* app, cmd::RunConfig& cfg, std::string& occlusion) {
  app->add_option("--scenario", cfg.scenario, "Scenario file or builtin:<name>")->capture_default_str();
  app->add_option("--seed", cfg.seed, "Seed for the simulated perception")->capture_default_str();
  app->add_option("--occlusion", occlusion, "Occlusion assessment")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app->add_option("--detector", cfg.detector, "oracle[:jitter=,dropout=,fp=,min_visible=] | file:<path> | remote:<url>")
      ->capture_default_str();
  app->add_option("--embedder", cfg.embedder, "oracle[:dim=,noise=,min_share=] | histogram | remote:<url>")
      ->capture_default_str();
  app->add_option("--iou-threshold", cfg.iou_threshold, "Detector/filter agreement threshold (default 0.3)");
  app->add_option("--s-min", cfg.search_s_min, "Similarity threshold for inter-camera search (default 0.6)");
  app->add_option("--acquire-s-min", cfg.acquire_s_min,
                  "Similarity threshold for in-camera reacquisition (default -1: best match)");
  app->add_option("--graph", cfg.graph, "Camera graph JSON (defaults to the scenario's)");
  app->add_option("--select", cfg.select, "Target selection camera:frame:x,y,w,h (defaults to the scenario's)");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::pair<int, int> parse_resolution(const std::string& s) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream in(s);
  if (!(in >> w >> x >> h) || x != 'x' || w <= 0 || h <= 0)
    throw cmd::ValidationError("resolution must look like WIDTHxHEIGHT");
  return {w, h};
}

int serve(const cmd::RunConfig& cfg, const std::string& host, int port) {
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  svc::TrackingService service(cmd::service_options(cfg));
  svc::HttpServer server(service);
  int bound = 0;
  try {
    bound = server.bind(host, port);
  } catch (const std::runtime_error& e) {
    spdlog::error("{}", e.what());
    std::cerr << "error: " << e.what() << " (port in use?)\n";
    return 2;
  }
  std::cout << fmt::format("listening on http://{}:{}", host, bound) << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&sigs, &sig);
    spdlog::info("signal {}; shutting down", sig);
    server.stop();
  });
  server.listen_after_bind();
  // listen returned on its own (not via a signal): wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  cmd::init_logging();
  CLI::App app{"Multi-camera person tracking with correlation filters and re-identification handoff"};
  app.require_subcommand(1);

  cmd::RunConfig cfg;
  std::string occlusion = "on";
  std::string out_dir;

  auto* sim = app.add_subcommand("simulate", "Render a scenario to PPM frames and ground-truth CSVs");
  sim->add_option("--scenario", cfg.scenario, "Scenario file or builtin:<name>")->capture_default_str();
  sim->add_option("--out", out_dir, "Output directory")->required();

  auto* track = app.add_subcommand("track", "Run the tracker over a scenario; writes results.json and map.svg");
  add_run_flags(track, cfg, occlusion);
  track->add_option("--out", out_dir, "Output directory")->required();

  std::string results_path, gt_path, gt_format = "scenario", gt_camera, agent;
  double tau = kDefaultMatchThreshold;
  auto* eval = app.add_subcommand("eval", "Score results.json against ground truth");
  eval->add_option("--results", results_path, "results.json from track")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path, "Scenario (file or builtin:<name>), simulate CSV, or OTB text file")->required();
  eval->add_option("--gt-format", gt_format, "How to read --gt")
      ->check(CLI::IsMember({"scenario", "csv", "otb"}))
      ->capture_default_str();
  eval->add_option("--camera", gt_camera, "Camera the csv/otb ground truth belongs to");
  eval->add_option("--agent", agent, "Target agent id (scenario/csv ground truth; defaults to the stored selection)");
  eval->add_option("--tau", tau, "IOU threshold for a true positive")->capture_default_str();
  eval->add_option("--out", out_dir, "Directory for report.json");

  auto* ablate = app.add_subcommand("ablate", "Track with and without occlusion assessment and compare");
  add_run_flags(ablate, cfg, occlusion);
  ablate->add_option("--tau", tau, "IOU threshold for a true positive")->capture_default_str();
  ablate->add_option("--out", out_dir, "Output directory");

  std::string resolution;
  long max_ticks = 0;
  auto* bench = app.add_subcommand("bench", "Measure per-frame tracking throughput (rendering excluded)");
  add_run_flags(bench, cfg, occlusion);
  bench->add_option("--resolution", resolution, "Override every camera's resolution, e.g. 1280x720");
  bench->add_option("--max-ticks", max_ticks, "Stop after this many frames (0: whole scenario)");
  bench->add_option("--out", out_dir, "Directory for bench.json");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* srv = app.add_subcommand("serve", "Host the HTTP API");
  add_run_flags(srv, cfg, occlusion);
  srv->add_option("--host", host, "Bind address")->capture_default_str();
  srv->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();

  std::string url = "http://127.0.0.1:8080";
  auto* replay = app.add_subcommand("replay", "Push a scenario through a running service and save the trajectory");
  add_run_flags(replay, cfg, occlusion);
  replay->add_option("--url", url, "Service base URL")->capture_default_str();
  replay->add_option("--out", out_dir, "Output directory for results.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  cfg.occlusion = occlusion == "on";
  cfg.out_dir = out_dir;

  try {
    if (*sim) {
      const auto s = cmd::run_simulate(cfg.scenario, out_dir);
      std::cout << fmt::format("wrote {} cameras x {} frames to {}\n", s.camera_dirs.size(), s.frames_per_camera,
                               out_dir);
    } else if (*track) {
      const auto run = cmd::run_track(cfg);
      std::cout << fmt::format("{} trajectory entries, {} phase events; wrote {}/results.json and {}/map.svg\n",
                               run.track.trajectory.size(), run.track.phases.size(), out_dir, out_dir);
    } else if (*eval) {
      const auto results = load_results(results_path);
      cmd::GroundTruth gt;
      if (gt_format == "scenario") {
        const auto scenario = cmd::load_scenario_checked(gt_path);
        if (agent.empty() && scenario->selection) agent = scenario->selection->agent;
        if (agent.empty()) throw cmd::ValidationError("--agent is required: the scenario stores no selected agent");
        gt = cmd::ground_truth_from_scenario(*scenario, agent);
      } else {
        if (gt_camera.empty()) throw cmd::ValidationError("--camera is required for csv/otb ground truth");
        if (gt_format == "csv") {
          if (agent.empty()) throw cmd::ValidationError("--agent is required for csv ground truth");
          gt = cmd::ground_truth_from_csv(gt_path, gt_camera, agent);
        } else {
          std::ifstream in(gt_path, std::ios::binary);
          if (!in) throw cmd::ValidationError("cannot open '" + gt_path + "'");
          std::ostringstream ss;
          ss << in.rdbuf();
          gt = cmd::ground_truth_from_otb(ss.str(), gt_camera);
        }
      }
      const auto table = cmd::evaluate(results, gt, tau);
      std::cout << cmd::eval_to_text(table);
      if (!out_dir.empty()) write_text(fs::path(out_dir) / "report.json", cmd::eval_to_json(table));
    } else if (*ablate) {
      const auto rep = cmd::run_ablation(cfg, tau);
      std::cout << cmd::ablation_to_text(rep);
    } else if (*bench) {
      std::optional<std::pair<int, int>> res;
      if (!resolution.empty()) res = parse_resolution(resolution);
      const auto rep = cmd::run_bench(cfg, res, max_ticks > 0 ? std::optional<long>(max_ticks) : std::nullopt);
      std::cout << cmd::bench_to_text(rep);
      if (!out_dir.empty()) write_text(fs::path(out_dir) / "bench.json", cmd::bench_to_json(rep));
    } else if (*srv) {
      return serve(cfg, host, port);
    } else if (*replay) {
      const auto body = cmd::run_replay(cfg, url);
      if (out_dir.empty()) std::cout << body;
    }
  } catch (const cmd::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
