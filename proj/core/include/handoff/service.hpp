#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "handoff/coordinator.hpp"
#include "handoff/inter.hpp"
#include "handoff/perception.hpp"
#include "handoff/simworld.hpp"

namespace handoff::svc {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

Response error_response(int status, std::string_view code, std::string_view detail);

struct ServiceOptions {
  std::shared_ptr<const sim::Scenario> scenario;  // camera list and map layout
  std::shared_ptr<const Detector> detector;
  std::shared_ptr<const Embedder> embedder;
  inter::CameraGraph graph;
  CoordinatorConfig config;
  double map_w = 800.0;
  double map_h = 600.0;
};

// Request handlers behind the HTTP API. Frames are buffered per camera with
// latest-frame semantics; a track advances once every camera it needs has a
// frame at or past the track's clock, so a client pushing frames in order gets
// exactly the ticks of an offline run.
class TrackingService {
 public:
  explicit TrackingService(ServiceOptions options);

  Response create_track(std::string_view body);
  Response ingest_frame(const std::string& camera_id, std::string_view body);
  Response finish_track(const std::string& track_id, std::string_view body);
  Response get_track(const std::string& track_id) const;
  Response get_trajectory(const std::string& track_id) const;
  Response get_map(const std::string& track_id) const;
  Response list_cameras() const;
  Response get_preview(const std::string& camera_id) const;
  Response stats() const;

 private:
  struct CameraBuffer {
    mutable std::mutex mu;
    std::optional<Frame> latest;
    bool consumed = false;
    std::uint64_t received = 0;
    std::uint64_t processed = 0;
    std::uint64_t dropped = 0;
  };
  struct TrackSlot {
    mutable std::mutex mu;
    Track track;
  };

  std::shared_ptr<TrackSlot> find_track(const std::string& id) const;
  std::optional<Frame> latest_frame(const std::string& camera) const;
  void mark_consumed(const std::string& camera, long index);

  ServiceOptions opts_;
  Pipeline pipeline_;
  std::map<std::string, std::unique_ptr<CameraBuffer>> cameras_;
  mutable std::shared_mutex tracks_mu_;
  std::map<std::string, std::shared_ptr<TrackSlot>> tracks_;
  std::atomic<std::uint64_t> next_track_{1};
  std::atomic<std::uint64_t> ticks_{0};
};

// HTTP/1.1 front end for TrackingService under /api/v1.
class HttpServer {
 public:
  explicit HttpServer(TrackingService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; returns the port (useful with port 0) or throws std::runtime_error.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Background producer that keeps reading frames while the caller processes
// the current one. With `keep_latest_only` stale frames are discarded (a live
// camera); otherwise frames queue up to `capacity` and the producer blocks
// (replaying recorded input without loss).
template <typename T>
class FrameGrabber {
 public:
  using Source = std::function<std::optional<T>()>;

  FrameGrabber(Source source, bool keep_latest_only, std::size_t capacity = 4)
      : source_(std::move(source)), latest_only_(keep_latest_only), capacity_(capacity) {
    worker_ = std::thread([this] { run(); });
  }
  ~FrameGrabber() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }
  FrameGrabber(const FrameGrabber&) = delete;
  FrameGrabber& operator=(const FrameGrabber&) = delete;

  // Next frame, or nullopt once the source is exhausted and the buffer drained.
  std::optional<T> next() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return !buffer_.empty() || finished_; });
    if (buffer_.empty()) return std::nullopt;
    T item = std::move(buffer_.front());
    buffer_.pop_front();
    cv_.notify_all();
    return item;
  }

  std::uint64_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  void run() {
    for (;;) {
      std::optional<T> item = source_();
      std::unique_lock lock(mu_);
      if (!item) {
        finished_ = true;
        cv_.notify_all();
        return;
      }
      if (latest_only_) {
        dropped_ += buffer_.size();
        buffer_.clear();
      } else {
        cv_.wait(lock, [this] { return buffer_.size() < capacity_ || stopping_; });
      }
      if (stopping_) {
        finished_ = true;
        cv_.notify_all();
        return;
      }
      buffer_.push_back(std::move(*item));
      cv_.notify_all();
    }
  }

  Source source_;
  bool latest_only_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> buffer_;
  bool finished_ = false;
  bool stopping_ = false;
  std::uint64_t dropped_ = 0;
  std::thread worker_;
};

}  // namespace handoff::svc
