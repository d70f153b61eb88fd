#include <httplib.h>
#include <json.hpp>

#include <chrono>

#include "handoff/perception.hpp"

namespace handoff {

using nlohmann::json;

namespace {

json post_json(const std::string& base_url, const std::string& path, const json& body, double timeout_s) {
  httplib::Client client(base_url);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw DetectorUnavailable(base_url + path + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw DetectorUnavailable(base_url + path + ": HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw DetectorUnavailable(base_url + path + ": unparseable response: " + e.what());
  }
}

}  // namespace

RemoteDetector::RemoteDetector(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

std::vector<Detection> RemoteDetector::detect(const Frame& frame) const {
  if (!frame.image) throw std::invalid_argument("frame has no pixels");
  const json body{{"frame_b64", base64_encode(encode_ppm(*frame.image))},
                  {"camera_id", frame.camera_id},
                  {"frame_index", frame.index}};
  const json reply = post_json(base_url_, "/detect", body, timeout_s_);
  std::vector<Detection> out;
  try {
    for (const auto& d : reply.at("detections")) {
      Detection det{BBox{d.at("x").get<double>(), d.at("y").get<double>(), d.at("w").get<double>(),
                         d.at("h").get<double>()},
                    d.at("class_id").get<int>(), d.at("confidence").get<double>()};
      if (!det.bbox.valid()) throw DetectorUnavailable("remote detector returned an invalid box");
      out.push_back(det);
    }
  } catch (const json::exception& e) {
    throw DetectorUnavailable(std::string("remote detector response does not match schema: ") + e.what());
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

AppearanceVector RemoteEmbedder::embed(const Frame& frame, const BBox& box) const {
  if (!frame.image) throw std::invalid_argument("frame has no pixels");
  const Image crop = frame.image->crop(box);
  if (crop.empty()) throw std::invalid_argument("embedding crop is empty");
  const json reply = post_json(base_url_, "/embed", json{{"crop_b64", base64_encode(encode_ppm(crop))}}, timeout_s_);
  try {
    return AppearanceVector::normalized(reply.at("vector").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw DetectorUnavailable(std::string("remote embedder response does not match schema: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DetectorUnavailable(std::string("remote embedder returned an unusable vector: ") + e.what());
  }
}

}  // namespace handoff
