#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "handoff/cftracker.hpp"
#include "handoff/commands.hpp"
#include "handoff/intra.hpp"

using namespace handoff;

namespace {

std::shared_ptr<const sim::Scenario> crossing() {
  static const auto s = cmd::load_scenario_checked("builtin:crossing");
  return s;
}

Image frame_at(long f) { return sim::render(*crossing(), "cam0", f); }

}  // namespace

static void BM_Iou(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0, 100);
  std::vector<BBox> boxes;
  for (int i = 0; i < 1024; ++i) boxes.push_back({d(rng), d(rng), d(rng) + 1, d(rng) + 1});
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou(boxes[i & 1023], boxes[(i + 1) & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

static void BM_OcclusionCheck(benchmark::State& state) {
  const std::vector<double> v{0.8, 0.3, 0.12, 0.05, 0.0, 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(intra::detect_occlusion(v));
}
BENCHMARK(BM_OcclusionCheck);

static void BM_CfInit(benchmark::State& state) {
  const auto img = frame_at(5);
  const auto box = crossing()->selection->box;
  for (auto _ : state) benchmark::DoNotOptimize(cf::cf_init(img, box));
}
BENCHMARK(BM_CfInit)->Unit(benchmark::kMicrosecond);

static void BM_CfUpdate(benchmark::State& state) {
  const auto first = frame_at(5);
  const auto next = frame_at(6);
  const auto model = cf::cf_init(first, crossing()->selection->box);
  for (auto _ : state) {
    auto m = model;
    benchmark::DoNotOptimize(cf::cf_update(m, next));
  }
}
BENCHMARK(BM_CfUpdate)->Unit(benchmark::kMicrosecond);

static void BM_Render(benchmark::State& state) {
  long f = 0;
  for (auto _ : state) benchmark::DoNotOptimize(frame_at(f++ % crossing()->frame_count()));
}
BENCHMARK(BM_Render)->Unit(benchmark::kMicrosecond);

// One pipeline tick per iteration, rendering excluded.
static void BM_PipelineTick(benchmark::State& state) {
  cmd::RunConfig c;
  const auto sc = crossing();
  const auto backends = cmd::make_backends(c, sc);
  const auto graph = cmd::make_graph(c, *sc);
  const auto cc = cmd::make_coordinator_config(c);
  const Pipeline pipeline{*backends.detector, *backends.embedder, graph, cc};
  const auto& sel = *sc->selection;
  std::vector<std::shared_ptr<const Image>> frames;
  for (long f = 0; f < sc->frame_count(); ++f) frames.push_back(std::make_shared<const Image>(frame_at(f)));

  auto fresh = [&] { return select_target("t-000001", Frame{"cam0", sel.frame, frames[sel.frame]}, sel.box, *backends.embedder, cc); };
  Track track = fresh();
  long f = sel.frame + 1;
  for (auto _ : state) {
    if (f >= sc->frame_count()) {
      state.PauseTiming();
      track = fresh();
      f = sel.frame + 1;
      state.ResumeTiming();
    }
    std::map<std::string, Frame> in{{"cam0", Frame{"cam0", f, frames[static_cast<std::size_t>(f)]}}};
    benchmark::DoNotOptimize(process_tick(track, f, in, pipeline));
    ++f;
  }
  state.counters["fps"] = benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_PipelineTick)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
