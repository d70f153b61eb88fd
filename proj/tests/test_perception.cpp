#include <algorithm>
#include <cmath>
#include <memory>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "handoff/perception.hpp"
#include "handoff/simworld.hpp"

using namespace handoff;
using nlohmann::json;

namespace {

std::shared_ptr<const sim::Scenario> crossing() {
  return std::make_shared<const sim::Scenario>(sim::builtin_scenario("crossing"));
}

Frame frame_of(const sim::Scenario& s, const std::string& cam, long index) {
  return {cam, index, std::make_shared<const Image>(sim::render(s, cam, index))};
}

AppearanceVector basis(int dim, int k, double sign = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  v[static_cast<std::size_t>(k)] = sign;
  return AppearanceVector::normalized(v);
}

// Vectors whose similarity to the unit x-axis target equals `s`.
std::vector<AppearanceVector> with_similarities(const std::vector<double>& sims) {
  std::vector<AppearanceVector> out;
  for (double s : sims) out.push_back(AppearanceVector::normalized({s, std::sqrt(1.0 - s * s)}));
  return out;
}

// Runs an httplib server on an ephemeral port for the lifetime of the object.
struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST_CASE("similarity") {
  const auto a = AppearanceVector::normalized({1, 2, 3});
  CHECK(similarity(a, a) == doctest::Approx(1.0));
  CHECK(similarity(basis(4, 0), basis(4, 1)) == doctest::Approx(0.0));
  CHECK(similarity(basis(4, 2), basis(4, 2, -1.0)) == doctest::Approx(-1.0));
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(AppearanceVector::normalized({0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(AppearanceVector::normalized({NAN, 1}), std::invalid_argument);
}

TEST_CASE("perform_reid") {
  const auto target = AppearanceVector::normalized({1, 0});
  auto c = with_similarities({0.2, 0.9, 0.5});
  CHECK(perform_reid(c, target, 0.6) == std::size_t{1});
  c = with_similarities({0.4, 0.4, 0.4});
  CHECK_FALSE(perform_reid(c, target, 0.6).has_value());
  c = with_similarities({0.8, 0.8});
  CHECK(perform_reid(c, target, 0.5) == std::size_t{0});
  CHECK_FALSE(perform_reid({}, target, 0.0).has_value());
  c = with_similarities({0.6});
  CHECK(perform_reid(c, target, 0.6) == std::size_t{0});  // threshold is inclusive
}

TEST_CASE("perform_reid matches an argmax oracle") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto target = AppearanceVector::normalized({1, 0});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> sims(static_cast<std::size_t>(trial % 7));
    for (auto& s : sims) s = std::round(u(rng) * 10.0) / 10.0;  // coarse grid makes ties common
    const double s_min = std::round(u(rng) * 10.0) / 10.0;
    const auto c = with_similarities(sims);
    std::optional<std::size_t> expect;
    for (std::size_t i = 0; i < sims.size(); ++i)
      if (sims[i] >= s_min - 1e-12 && (!expect || sims[i] > sims[*expect] + 1e-12)) expect = i;
    CHECK(perform_reid(c, target, s_min - 1e-12) == expect);
  }
}

TEST_CASE("filter_persons") {
  CHECK(filter_persons({}).empty());
  const Detection person{{0, 0, 1, 1}, kPersonClass, 0.9};
  const Detection car{{0, 0, 2, 2}, 2, 0.9};
  const std::vector<Detection> mixed{person, car, person};
  CHECK(filter_persons(mixed) == std::vector<Detection>{person, person});
  const std::vector<Detection> cars{car, car};
  CHECK(filter_persons(cars).empty());
}

TEST_CASE("noiseless oracle detector returns the visible ground truth") {
  const auto s = crossing();
  OracleDetectorParams p;
  p.jitter_sigma = 0;
  p.dropout_prob = 0;
  p.false_positive_rate = 0;
  const OracleDetector det(s, p);
  for (long f : {0L, 50L, 110L, 200L}) {
    const auto dets = det.detect(frame_of(*s, "cam0", f));
    std::vector<BBox> expect;
    for (const auto& g : sim::ground_truth(*s, "cam0", f))
      if (g.visible_fraction >= p.min_visible_fraction) expect.push_back(g.bbox);
    REQUIRE(dets.size() == expect.size());
    for (std::size_t i = 0; i < dets.size(); ++i) CHECK(dets[i].bbox == expect[i]);
  }
}

TEST_CASE("oracle detector hides mostly occluded agents") {
  sim::Scenario s;
  s.duration = 1;
  s.world_size = {16, 9};
  s.cameras = {sim::Camera{"cam0", {0, 0, 16, 9}, 160, 90}};
  s.agents = {sim::Agent{"a", {255, 0, 0}, 1.0, 2.0, {{0, 8, 4.5}, {1, 8, 4.5}}}};
  // Occluder hides 90% of the agent's height.
  s.occluders = {{sim::Rect{7, 3.5, 2, 1.8}, {0, 0, 0}}};
  auto shared = std::make_shared<const sim::Scenario>(s);
  const auto gt = sim::ground_truth_for(s, "cam0", 0, "a");
  REQUIRE(gt);
  CHECK(gt->visible_fraction == doctest::Approx(0.1));
  OracleDetectorParams p;
  p.dropout_prob = 0;
  p.false_positive_rate = 0;
  CHECK(OracleDetector(shared, p).detect(frame_of(s, "cam0", 0)).empty());
}

TEST_CASE("oracle detector is keyed on camera and frame, not call order") {
  const auto s = crossing();
  const OracleDetector det(s, {});
  const auto f1 = frame_of(*s, "cam0", 120);
  const auto f2 = frame_of(*s, "cam0", 121);
  const auto a = det.detect(f1);
  det.detect(f2);
  CHECK(det.detect(f1) == a);
  OracleDetectorParams other;
  other.seed = 99;
  CHECK(OracleDetector(s, other).detect(f1) != a);
  OracleDetectorParams bad;
  bad.dropout_prob = 2;
  CHECK_THROWS_AS(OracleDetector(s, bad), std::invalid_argument);
}

TEST_CASE("oracle detector statistics follow its parameters") {
  const auto s = crossing();
  OracleDetectorParams p;
  p.dropout_prob = 0.25;
  p.false_positive_rate = 0;
  const OracleDetector det(s, p);
  long kept = 0, total = 0;
  for (long f = 0; f < s->frame_count(); ++f) {
    for (const auto& g : sim::ground_truth(*s, "cam0", f)) total += g.visible_fraction >= 0.3;
    kept += static_cast<long>(det.detect(frame_of(*s, "cam0", f)).size());
  }
  CHECK(double(kept) / double(total) == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("file detector") {
  const auto table = FileDetector::parse("0,0,1,2,3,4,0.9\n0,2,5,6,7,8,0.5\r\n# comment\n\n3,0,9,9,9,9,1\n");
  REQUIRE(table.at(0).size() == 2);
  CHECK(table.at(0)[0] == Detection{{1, 2, 3, 4}, 0, 0.9});
  CHECK(table.at(0)[1].class_id == 2);
  const FileDetector det({{"*", table}});
  Frame f{"any", 0, nullptr};
  CHECK(det.detect(f).size() == 2);
  f.index = 1;
  CHECK(det.detect(f).empty());

  const auto three = FileDetector::parse("4,0,1,1,5,5,0.1\n4,0,2,2,5,5,0.2\n4,0,3,3,5,5,0.3\n");
  const auto dets = FileDetector({{"cam0", three}}).detect({"cam0", 4, nullptr});
  REQUIRE(dets.size() == 3);
  CHECK(dets[0].bbox.x == 1);
  CHECK(dets[1].bbox.x == 2);
  CHECK(dets[2].bbox.x == 3);
  CHECK(FileDetector({{"cam0", three}}).detect({"cam1", 4, nullptr}).empty());

  CHECK_THROWS_AS(FileDetector::parse("1,2,3\n"), std::invalid_argument);
  CHECK_THROWS_AS(FileDetector::parse("1,0,a,1,1,1,1\n"), std::invalid_argument);
  CHECK_THROWS_AS(FileDetector::parse("1,0,1,1,-1,1,1\n"), std::invalid_argument);
  CHECK_THROWS_AS(FileDetector::load("/nonexistent/file.csv"), std::invalid_argument);
}

TEST_CASE("histogram embedder") {
  const HistogramEmbedder emb;
  auto img = std::make_shared<Image>(40, 40, Rgb{255, 0, 0});
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) img->set(x, y, {0, 0, 255});
  const Frame f{"c", 0, img};
  const auto v = emb.embed(f, {20, 20, 10, 10});
  CHECK(v.dim() == 512);
  CHECK(std::count_if(v.values.begin(), v.values.end(), [](double x) { return x != 0.0; }) == 1);
  CHECK(v.norm() == doctest::Approx(1.0));
  CHECK(similarity(v, emb.embed(f, {15, 15, 25, 25})) == doctest::Approx(1.0));
  CHECK(similarity(v, emb.embed(f, {0, 0, 10, 10})) == doctest::Approx(0.0));
  CHECK_THROWS_AS(emb.embed(f, {100, 100, 5, 5}), std::invalid_argument);
}

TEST_CASE("oracle embedder") {
  const auto s = crossing();
  OracleEmbedderParams p;
  p.noise_sigma = 0;
  const OracleEmbedder emb(s, p);
  const auto f = frame_of(*s, "cam0", 5);
  const auto box = sim::ground_truth_for(*s, "cam0", 5, "target")->bbox;
  const auto v = emb.embed(f, box);
  const int k = emb.basis_index(s->agent_index("target"));
  CHECK(v.values[static_cast<std::size_t>(k)] == doctest::Approx(1.0));
  // empty background maps to the reserved vector
  const auto bg = emb.embed(f, {600, 10, 20, 20});
  CHECK(bg.values.back() == doctest::Approx(1.0));
  CHECK_THROWS_AS(emb.embed(f, {1000, 1000, 5, 5}), std::invalid_argument);

  const OracleEmbedder noisy(s, {});
  const auto n1 = noisy.embed(f, box);
  CHECK(n1.values == noisy.embed(f, box).values);
  CHECK(similarity(n1, v) > 0.6);
}

TEST_CASE("remote detector and embedder") {
  LocalServer srv;
  json seen;
  srv.server.Post("/detect", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    const auto img = decode_ppm(base64_decode(seen.at("frame_b64").get<std::string>()));
    res.set_content(json{{"detections",
                          {{{"x", 1.5}, {"y", 2}, {"w", img.width() / 2.0}, {"h", 4}, {"class_id", 0}, {"confidence", 0.8}},
                           {{"x", 0}, {"y", 0}, {"w", 1}, {"h", 1}, {"class_id", 3}, {"confidence", 0.1}}}}}
                        .dump(),
                    "application/json");
  });
  srv.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const auto crop = decode_ppm(base64_decode(json::parse(req.body).at("crop_b64").get<std::string>()));
    res.set_content(json{{"vector", {double(crop.width()), double(crop.height())}}}.dump(), "application/json");
  });
  srv.start();

  const Frame f{"camX", 17, std::make_shared<const Image>(10, 8, Rgb{1, 2, 3})};
  const RemoteDetector det(srv.url());
  const auto dets = det.detect(f);
  REQUIRE(dets.size() == 2);
  CHECK(dets[0] == Detection{{1.5, 2, 5, 4}, 0, 0.8});
  CHECK(dets[1].class_id == 3);
  CHECK(seen.at("camera_id") == "camX");
  CHECK(seen.at("frame_index") == 17);

  const RemoteEmbedder emb(srv.url());
  const auto v = emb.embed(f, {0, 0, 3, 4});
  CHECK(v.values[0] == doctest::Approx(0.6));
  CHECK(v.values[1] == doctest::Approx(0.8));
  CHECK_THROWS_AS(emb.embed(f, {50, 50, 3, 3}), std::invalid_argument);
}

TEST_CASE("remote backends report outages as DetectorUnavailable") {
  LocalServer srv;
  srv.server.Post("/detect", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"detections": [{"x": 1}]})", "application/json");
  });
  srv.server.Post("/embed", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  srv.start();
  const Frame f{"c", 0, std::make_shared<const Image>(4, 4)};
  CHECK_THROWS_AS(RemoteDetector(srv.url()).detect(f), DetectorUnavailable);
  CHECK_THROWS_AS(RemoteEmbedder(srv.url()).embed(f, {0, 0, 2, 2}), DetectorUnavailable);
  // nothing listening
  CHECK_THROWS_AS(RemoteDetector("http://127.0.0.1:1", 0.5).detect(f), DetectorUnavailable);
}

TEST_CASE("stream keys") {
  CHECK(stream_key(1, "cam0", 5) == stream_key(1, "cam0", 5));
  CHECK(stream_key(1, "cam0", 5) != stream_key(1, "cam0", 6));
  CHECK(stream_key(1, "cam0", 5) != stream_key(1, "cam1", 5));
  CHECK(stream_key(1, "cam0", 5) != stream_key(2, "cam0", 5));
  CHECK(stream_key(1, "cam0", 5, 1) != stream_key(1, "cam0", 5, 2));
}
