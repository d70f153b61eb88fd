#include <fstream>
#include <sstream>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "handoff/commands.hpp"
#include "handoff/service.hpp"
#include "oracles.hpp"

using namespace handoff;
using nlohmann::json;

namespace {

const json& schema() {
  static const json s = [] {
    std::ifstream in(std::string(HANDOFF_SOURCE_DIR) + "/docs/api_schema.json");
    return json::parse(in);
  }();
  return s;
}

// Parses the body and checks it against a named schema entry.
json expect(const svc::Response& r, int status, const std::string& kind) {
  INFO("body: " << r.body);
  CHECK(r.status == status);
  CHECK(r.content_type == "application/json");
  const json j = json::parse(r.body);
  CHECK(oracle::check_schema(j, schema().at(kind), schema()) == "");
  return j;
}

std::string error_code(const svc::Response& r, int status) { return expect(r, status, "error").at("error"); }

struct Fixture {
  cmd::RunConfig config;
  std::shared_ptr<const sim::Scenario> scenario;
  std::unique_ptr<svc::TrackingService> service;

  explicit Fixture(const std::string& name = "builtin:crossing") {
    config.scenario = name;
    auto opts = cmd::service_options(config);
    scenario = opts.scenario;
    service = std::make_unique<svc::TrackingService>(std::move(opts));
  }

  std::string frame_b64(const std::string& cam, long f) const {
    return base64_encode(encode_ppm(sim::render(*scenario, cam, f)));
  }
  json create_body() const {
    const auto& sel = *scenario->selection;
    return {{"camera_id", sel.camera},
            {"frame_index", sel.frame},
            {"bbox", {{"x", sel.box.x}, {"y", sel.box.y}, {"w", sel.box.w}, {"h", sel.box.h}}},
            {"frame_b64", frame_b64(sel.camera, sel.frame)}};
  }
  svc::Response push(const std::string& cam, long f) {
    return service->ingest_frame(cam, json{{"camera_id", cam}, {"frame_index", f}, {"frame_b64", frame_b64(cam, f)}}.dump());
  }
};

}  // namespace

TEST_CASE("schema file is well formed") {
  CHECK(oracle::check_schema(json::parse(R"({"error":"x","detail":"y"})"), schema().at("error"), schema()) == "");
  CHECK(oracle::check_schema(json::parse(R"({"error":"x"})"), schema().at("error"), schema()) != "");
  CHECK(oracle::check_schema(json::parse(R"({"updates":[{"track_id":"t","state":"bogus","camera_id":"c","frame":1}]})"),
                             schema().at("ingest_frame"), schema()) != "");
}

TEST_CASE("create track") {
  Fixture fx;
  const auto j = expect(fx.service->create_track(fx.create_body().dump()), 201, "create_track");
  CHECK(j.at("track_id") == "t-000001");
  CHECK(expect(fx.service->create_track(fx.create_body().dump()), 201, "create_track").at("track_id") == "t-000002");
}

TEST_CASE("create track validation") {
  Fixture fx;
  auto body = fx.create_body();
  body["frame_b64"] = "@@not base64@@";
  CHECK(error_code(fx.service->create_track(body.dump()), 400) == "bad_frame_encoding");
  body = fx.create_body();
  body["frame_b64"] = base64_encode(std::string_view("P6\n2 2\n255\nxx"));
  CHECK(error_code(fx.service->create_track(body.dump()), 400) == "bad_frame_encoding");
  body = fx.create_body();
  body["bbox"]["w"] = 0;
  CHECK(error_code(fx.service->create_track(body.dump()), 422) == "degenerate_bbox");
  body = fx.create_body();
  body["bbox"] = {{"x", 5000}, {"y", 5000}, {"w", 10}, {"h", 10}};
  CHECK(error_code(fx.service->create_track(body.dump()), 422) == "degenerate_bbox");
  body = fx.create_body();
  body["camera_id"] = "nope";
  CHECK(error_code(fx.service->create_track(body.dump()), 404) == "unknown_camera");
  body = fx.create_body();
  body.erase("bbox");
  CHECK(error_code(fx.service->create_track(body.dump()), 400) == "bad_request");
  body = fx.create_body();
  body["frame_index"] = -3;
  CHECK(error_code(fx.service->create_track(body.dump()), 400) == "bad_request");
  CHECK(error_code(fx.service->create_track("not json"), 400) == "bad_request");
  CHECK(error_code(fx.service->create_track("[1]"), 400) == "bad_request");
}

TEST_CASE("frame ingestion") {
  Fixture fx;
  const auto none = expect(fx.push("cam0", 0), 200, "ingest_frame");
  CHECK(none.at("updates").empty());
  CHECK(error_code(fx.service->ingest_frame("camZ", R"({"frame_index":0,"frame_b64":""})"), 404) == "unknown_camera");
  CHECK(error_code(fx.service->ingest_frame("cam0", R"({"camera_id":"cam1","frame_index":1,"frame_b64":""})"), 400) ==
        "camera_mismatch");
  CHECK(error_code(fx.service->ingest_frame("cam0", R"({"frame_index":3,"frame_b64":"!!"})"), 400) ==
        "bad_frame_encoding");
  fx.push("cam0", 5);
  CHECK(error_code(fx.push("cam0", 4), 409) == "stale_frame");
}

TEST_CASE("tracking updates flow back from frame pushes") {
  Fixture fx;
  expect(fx.service->create_track(fx.create_body().dump()), 201, "create_track");
  const long f0 = fx.scenario->selection->frame;
  auto j = expect(fx.push("cam0", f0 + 1), 200, "ingest_frame");
  REQUIRE(j.at("updates").size() == 1);
  CHECK(j["updates"][0]["state"] == "acquiring");
  CHECK(j["updates"][0].contains("bbox"));
  j = expect(fx.push("cam0", f0 + 2), 200, "ingest_frame");
  REQUIRE(j.at("updates").size() == 1);
  CHECK(j["updates"][0]["state"] == "tracking");
  CHECK(j["updates"][0]["camera_id"] == "cam0");
  CHECK(j["updates"][0]["frame"] == f0 + 2);
  CHECK(j["updates"][0].contains("bbox"));

  const auto t = expect(fx.service->get_track("t-000001"), 200, "track");
  CHECK(t.at("phase") == "intra");
  CHECK(t.at("trajectory_length") == 2);
}

TEST_CASE("exit streak reports searching without a box") {
  Fixture fx("builtin:handoff");
  cmd::RunConfig offline = fx.config;
  const auto run = cmd::run_track(offline);
  long exit_frame = -1;
  for (const auto& p : run.track.phases)
    if (p.phase == "searching") {
      exit_frame = p.frame;
      break;
    }
  REQUIRE(exit_frame > 0);

  expect(fx.service->create_track(fx.create_body().dump()), 201, "create_track");
  json last;
  for (long f = fx.scenario->selection->frame + 1; f <= exit_frame; ++f) {
    last = expect(fx.push("cam0", f), 200, "ingest_frame");
  }
  REQUIRE(last.at("updates").size() == 1);
  CHECK(last["updates"][0]["state"] == "searching");
  CHECK_FALSE(last["updates"][0].contains("bbox"));

  const auto t = expect(fx.service->get_track("t-000001"), 200, "track");
  CHECK(t.at("phase") == "searching");
  CHECK(t.at("recommended_cameras") == json{"cam1", "cam2"});
  // cam0 frames alone no longer advance the track
  CHECK(expect(fx.push("cam0", exit_frame + 1), 200, "ingest_frame").at("updates").empty());
  CHECK(expect(fx.push("cam1", exit_frame + 1), 200, "ingest_frame").at("updates").empty());
  CHECK(expect(fx.push("cam2", exit_frame + 1), 200, "ingest_frame").at("updates").size() == 1);
}

TEST_CASE("latest-frame semantics count dropped frames") {
  Fixture fx;
  fx.push("cam0", 1);
  fx.push("cam0", 2);
  fx.push("cam0", 3);
  const auto s = expect(fx.service->stats(), 200, "stats");
  CHECK(s.at("frames_received") == 3);
  CHECK(s.at("frames_dropped") == 2);
  CHECK(s.at("frames_processed") == 0);
  CHECK(s.at("cameras").at("cam0").at("latest_frame") == 3);
}

TEST_CASE("finish, trajectory and map") {
  Fixture fx;
  expect(fx.service->create_track(fx.create_body().dump()), 201, "create_track");
  const long f0 = fx.scenario->selection->frame;
  for (long f = f0 + 1; f <= f0 + 10; ++f) fx.push("cam0", f);
  const auto done = expect(fx.service->finish_track("t-000001", R"({"frame": 15})"), 200, "track_update");
  CHECK(done.at("state") == "done");
  CHECK(done.at("frame") == 15);
  const auto traj = expect(fx.service->get_trajectory("t-000001"), 200, "trajectory");
  const auto t = expect(fx.service->get_track("t-000001"), 200, "track");
  CHECK(traj.at("entries").size() == t.at("trajectory_length").get<std::size_t>());
  CHECK(traj.at("entries").size() >= 8);
  CHECK(t.at("phase") == "done");
  CHECK(traj.at("phases").back().at("phase") == "done");
  const auto map = fx.service->get_map("t-000001");
  CHECK(map.status == 200);
  CHECK(map.content_type == "image/svg+xml");
  CHECK(map.body.rfind("<svg", 0) == 0);
  CHECK(error_code(fx.service->finish_track("t-9", ""), 404) == "unknown_track");
}

TEST_CASE("lookups of unknown ids") {
  Fixture fx;
  CHECK(error_code(fx.service->get_track("t-000042"), 404) == "unknown_track");
  CHECK(error_code(fx.service->get_trajectory("t-000042"), 404) == "unknown_track");
  CHECK(error_code(fx.service->get_map("t-000042"), 404) == "unknown_track");
  CHECK(error_code(fx.service->get_preview("cam0"), 404) == "no_frame");
  CHECK(error_code(fx.service->get_preview("camQ"), 404) == "unknown_camera");
}

TEST_CASE("camera list and preview") {
  Fixture fx("builtin:handoff");
  const auto cams = expect(fx.service->list_cameras(), 200, "cameras");
  CHECK(cams.at("cameras").size() == 6);
  CHECK(cams["cameras"][0]["id"] == "cam0");
  CHECK(cams["cameras"][0]["width"] == 640);
  fx.push("cam3", 0);
  const auto png = fx.service->get_preview("cam3");
  CHECK(png.status == 200);
  CHECK(png.content_type == "image/png");
  CHECK(png.body.substr(1, 3) == "PNG");
}

TEST_CASE("concurrent ingestion across cameras") {
  Fixture fx("builtin:handoff");
  std::vector<std::thread> workers;
  for (const auto& cam : fx.scenario->cameras)
    workers.emplace_back([&fx, id = cam.id] {
      for (long f = 0; f < 20; ++f) REQUIRE(fx.push(id, f).status == 200);
    });
  for (auto& w : workers) w.join();
  const auto s = expect(fx.service->stats(), 200, "stats");
  CHECK(s.at("frames_received") == 120);
  CHECK(s.at("frames_dropped") == 114);  // nothing consumes them; only the latest survives
}

TEST_CASE("http front end") {
  Fixture fx;
  svc::HttpServer server(*fx.service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.listen_after_bind(); });
  httplib::Client client("127.0.0.1", port);

  auto res = client.Get("/api/v1/cameras");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("cameras").size() == 1);

  res = client.Get("/cameras");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(json::parse(res->body).at("error") == "not_found");
  res = client.Get("/api/v2/cameras");
  REQUIRE(res);
  CHECK(res->status == 404);

  res = client.Post("/api/v1/tracks", fx.create_body().dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = json::parse(res->body).at("track_id");

  res = client.Post("/api/v1/cameras/cam0/frames",
                    json{{"frame_index", 6}, {"frame_b64", fx.frame_b64("cam0", 6)}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("updates").size() == 1);

  res = client.Get("/api/v1/tracks/" + id + "/map");
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "image/svg+xml");
  res = client.Get("/api/v1/cameras/cam0/preview");
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  res = client.Get("/api/v1/stats");
  REQUIRE(res);
  CHECK(oracle::check_schema(json::parse(res->body), schema().at("stats"), schema()) == "");

  server.stop();
  loop.join();

}
