#include "handoff/service.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace handoff::svc {

using nlohmann::json;

Response error_response(int status, std::string_view code, std::string_view detail) {
  return {status, json{{"error", code}, {"detail", detail}}.dump(), "application/json"};
}

namespace {

Response json_response(int status, const json& j) { return {status, j.dump(), "application/json"}; }

std::optional<json> parse_body(std::string_view body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) return std::nullopt;
    return j;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

// Decodes a base64 PPM payload; nullopt on any encoding problem.
std::optional<Image> decode_frame(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) return std::nullopt;
  try {
    return decode_ppm(base64_decode(j.at(key).get<std::string>()));
  } catch (const ImageFormatError&) {
    return std::nullopt;
  }
}

std::string phase_name(const Track& t) {
  if (std::holds_alternative<IntraPhase>(t.phase)) return "intra";
  if (std::holds_alternative<SearchingPhase>(t.phase)) return "searching";
  return "done";
}

}  // namespace

TrackingService::TrackingService(ServiceOptions options)
    : opts_(std::move(options)),
      pipeline_{*opts_.detector, *opts_.embedder, opts_.graph, opts_.config} {
  if (!opts_.scenario || !opts_.detector || !opts_.embedder)
    throw std::invalid_argument("service needs a scenario, a detector and an embedder");
  for (const auto& c : opts_.scenario->cameras) cameras_.emplace(c.id, std::make_unique<CameraBuffer>());
}

std::shared_ptr<TrackingService::TrackSlot> TrackingService::find_track(const std::string& id) const {
  std::shared_lock lock(tracks_mu_);
  const auto it = tracks_.find(id);
  return it == tracks_.end() ? nullptr : it->second;
}

std::optional<Frame> TrackingService::latest_frame(const std::string& camera) const {
  const auto it = cameras_.find(camera);
  if (it == cameras_.end()) return std::nullopt;
  std::lock_guard lock(it->second->mu);
  return it->second->latest;
}

void TrackingService::mark_consumed(const std::string& camera, long index) {
  const auto it = cameras_.find(camera);
  if (it == cameras_.end()) return;
  std::lock_guard lock(it->second->mu);
  auto& buf = *it->second;
  if (buf.latest && buf.latest->index == index && !buf.consumed) {
    buf.consumed = true;
    ++buf.processed;
  }
}

Response TrackingService::create_track(std::string_view body) {
  const auto req = parse_body(body);
  if (!req) return error_response(400, "bad_request", "body must be a JSON object");
  if (!req->contains("camera_id") || !req->at("camera_id").is_string())
    return error_response(400, "bad_request", "camera_id is required");
  const std::string camera = req->at("camera_id").get<std::string>();
  if (!cameras_.count(camera)) return error_response(404, "unknown_camera", "no camera '" + camera + "'");
  if (!req->contains("frame_index") || !req->at("frame_index").is_number_integer() ||
      req->at("frame_index").get<long>() < 0)
    return error_response(400, "bad_request", "frame_index must be a non-negative integer");
  const long frame_index = req->at("frame_index").get<long>();

  BBox box;
  try {
    const auto& b = req->at("bbox");
    box = {b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(), b.at("h").get<double>()};
  } catch (const json::exception&) {
    return error_response(400, "bad_request", "bbox must be {x, y, w, h}");
  }
  if (!box.valid() || box.empty()) return error_response(422, "degenerate_bbox", "bbox must have positive area");

  auto image = decode_frame(*req, "frame_b64");
  if (!image) return error_response(400, "bad_frame_encoding", "frame_b64 must be base64 of a binary PPM (P6)");

  const Frame frame{camera, frame_index, std::make_shared<const Image>(std::move(*image))};
  char id[32];
  std::snprintf(id, sizeof id, "t-%06llu", static_cast<unsigned long long>(next_track_++));
  auto slot = std::make_shared<TrackSlot>();
  try {
    slot->track = select_target(id, frame, box, *opts_.embedder, opts_.config);
  } catch (const DetectorUnavailable& e) {
    return error_response(503, "embedder_unavailable", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(422, "degenerate_bbox", e.what());
  }
  {
    std::unique_lock lock(tracks_mu_);
    tracks_.emplace(id, std::move(slot));
  }
  return json_response(201, json{{"track_id", id}});
}

Response TrackingService::ingest_frame(const std::string& camera_id, std::string_view body) {
  const auto cam_it = cameras_.find(camera_id);
  if (cam_it == cameras_.end()) return error_response(404, "unknown_camera", "no camera '" + camera_id + "'");
  const auto req = parse_body(body);
  if (!req) return error_response(400, "bad_request", "body must be a JSON object");
  if (req->contains("camera_id") && req->at("camera_id") != camera_id)
    return error_response(400, "camera_mismatch", "camera_id in the body differs from the path");
  if (!req->contains("frame_index") || !req->at("frame_index").is_number_integer() ||
      req->at("frame_index").get<long>() < 0)
    return error_response(400, "bad_request", "frame_index must be a non-negative integer");
  const long index = req->at("frame_index").get<long>();
  auto image = decode_frame(*req, "frame_b64");
  if (!image) return error_response(400, "bad_frame_encoding", "frame_b64 must be base64 of a binary PPM (P6)");

  {
    auto& buf = *cam_it->second;
    std::lock_guard lock(buf.mu);
    if (buf.latest && index < buf.latest->index)
      return error_response(409, "stale_frame", "frame_index went backwards for this camera");
    if (buf.latest && !buf.consumed) ++buf.dropped;
    buf.latest = Frame{camera_id, index, std::make_shared<const Image>(std::move(*image))};
    buf.consumed = false;
    ++buf.received;
  }

  std::vector<std::shared_ptr<TrackSlot>> slots;
  {
    std::shared_lock lock(tracks_mu_);
    for (const auto& [_, s] : tracks_) slots.push_back(s);
  }

  json updates = json::array();
  for (const auto& slot : slots) {
    std::lock_guard lock(slot->mu);
    Track& track = slot->track;
    if (track.done()) continue;
    const auto needed = required_cameras(track, opts_.graph);
    if (std::find(needed.begin(), needed.end(), camera_id) == needed.end()) continue;

    std::map<std::string, Frame> frames;
    long tick_index = -1;
    bool ready = true;
    for (const auto& cam : needed) {
      auto f = latest_frame(cam);
      if (!f || f->index < track.clock) {
        ready = false;
        break;
      }
      tick_index = tick_index < 0 ? f->index : std::min(tick_index, f->index);
      frames.emplace(cam, std::move(*f));
    }
    if (!ready) continue;

    TrackUpdate u;
    try {
      u = process_tick(track, tick_index, frames, pipeline_);
    } catch (const DetectorUnavailable& e) {
      return error_response(503, "detector_unavailable", e.what());
    }
    ++ticks_;
    for (const auto& [cam, f] : frames) mark_consumed(cam, f.index);
    updates.push_back(json::parse(update_to_json(u)));
  }
  return json_response(200, json{{"updates", updates}});
}

Response TrackingService::finish_track(const std::string& track_id, std::string_view body) {
  const auto slot = find_track(track_id);
  if (!slot) return error_response(404, "unknown_track", "no track '" + track_id + "'");
  const auto req = parse_body(body.empty() ? std::string_view("{}") : body);
  if (!req) return error_response(400, "bad_request", "body must be a JSON object");
  std::lock_guard lock(slot->mu);
  const long last = req->contains("frame") && req->at("frame").is_number_integer() ? req->at("frame").get<long>()
                                                                                     : slot->track.clock - 1;
  finalize(slot->track, last);
  return json_response(200, json::parse(update_to_json(slot->track.last_update)));
}

Response TrackingService::get_track(const std::string& track_id) const {
  const auto slot = find_track(track_id);
  if (!slot) return error_response(404, "unknown_track", "no track '" + track_id + "'");
  std::lock_guard lock(slot->mu);
  json j = json::parse(update_to_json(slot->track.last_update));
  j["phase"] = phase_name(slot->track);
  j["stalls"] = slot->track.stalls;
  j["trajectory_length"] = slot->track.trajectory.size();
  if (const auto* s = std::get_if<SearchingPhase>(&slot->track.phase))
    j["recommended_cameras"] = inter::recommend_cameras(opts_.graph, s->state);
  return json_response(200, j);
}

Response TrackingService::get_trajectory(const std::string& track_id) const {
  const auto slot = find_track(track_id);
  if (!slot) return error_response(404, "unknown_track", "no track '" + track_id + "'");
  std::lock_guard lock(slot->mu);
  return {200, results_to_json(slot->track), "application/json"};
}

Response TrackingService::get_map(const std::string& track_id) const {
  const auto slot = find_track(track_id);
  if (!slot) return error_response(404, "unknown_track", "no track '" + track_id + "'");
  std::lock_guard lock(slot->mu);
  const auto layout = layout_from_scenario(*opts_.scenario, opts_.map_w, opts_.map_h);
  try {
    return {200, render_trajectory_map(slot->track.trajectory, layout, opts_.map_w, opts_.map_h), "image/svg+xml"};
  } catch (const std::invalid_argument& e) {
    return error_response(500, "map_layout", e.what());
  }
}

Response TrackingService::list_cameras() const {
  json cams = json::array();
  for (const auto& c : opts_.scenario->cameras)
    cams.push_back({{"id", c.id}, {"width", c.width}, {"height", c.height}});
  return json_response(200, json{{"cameras", cams}});
}

Response TrackingService::get_preview(const std::string& camera_id) const {
  if (!cameras_.count(camera_id)) return error_response(404, "unknown_camera", "no camera '" + camera_id + "'");
  const auto f = latest_frame(camera_id);
  if (!f) return error_response(404, "no_frame", "camera '" + camera_id + "' has not sent a frame yet");
  return {200, encode_png(*f->image), "image/png"};
}

Response TrackingService::stats() const {
  json per = json::object();
  std::uint64_t received = 0, processed = 0, dropped = 0;
  for (const auto& [id, buf] : cameras_) {
    std::lock_guard lock(buf->mu);
    per[id] = {{"received", buf->received},
               {"processed", buf->processed},
               {"dropped", buf->dropped},
               {"latest_frame", buf->latest ? json(buf->latest->index) : json(nullptr)}};
    received += buf->received;
    processed += buf->processed;
    dropped += buf->dropped;
  }
  std::size_t n_tracks = 0;
  {
    std::shared_lock lock(tracks_mu_);
    n_tracks = tracks_.size();
  }
  return json_response(200, json{{"frames_received", received},
                                 {"frames_processed", processed},
                                 {"frames_dropped", dropped},
                                 {"ticks", ticks_.load()},
                                 {"tracks", n_tracks},
                                 {"cameras", per}});
}

}  // namespace handoff::svc
