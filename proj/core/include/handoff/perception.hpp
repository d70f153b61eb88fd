#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "handoff/geometry.hpp"
#include "handoff/image.hpp"
#include "handoff/simworld.hpp"

namespace handoff {

inline constexpr int kPersonClass = 0;

struct Detection {
  BBox bbox;
  int class_id = kPersonClass;
  double confidence = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Unit-norm appearance embedding.
struct AppearanceVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  // Throws std::invalid_argument for a zero or non-finite vector.
  static AppearanceVector normalized(std::vector<double> raw);
};

double similarity(const AppearanceVector& a, const AppearanceVector& b);

// Index of the most similar candidate if it reaches s_min; ties go to the lowest index.
std::optional<std::size_t> perform_reid(std::span<const AppearanceVector> candidates,
                                        const AppearanceVector& target, double s_min);

std::vector<Detection> filter_persons(std::span<const Detection> dets);

// Raised by backends that depend on an external service.
class DetectorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Detector {
 public:
  virtual ~Detector() = default;
  // Must be safe to call concurrently for different frames.
  virtual std::vector<Detection> detect(const Frame& frame) const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Throws std::invalid_argument when `box` does not overlap the frame.
  virtual AppearanceVector embed(const Frame& frame, const BBox& box) const = 0;
};

// ---------------------------------------------------------------------------
// Simulator-backed detector: ground truth perturbed by jitter, dropout and
// spurious boxes. Random draws are keyed on (seed, camera, frame) so results
// do not depend on call order or threading.

struct OracleDetectorParams {
  double jitter_sigma = 1.0;
  double dropout_prob = 0.05;
  double false_positive_rate = 0.02;
  double min_visible_fraction = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

class OracleDetector final : public Detector {
 public:
  OracleDetector(std::shared_ptr<const sim::Scenario> scenario, OracleDetectorParams params);
  std::vector<Detection> detect(const Frame& frame) const override;

 private:
  std::shared_ptr<const sim::Scenario> scenario_;
  OracleDetectorParams params_;
};

// Replays detections from text: one `frame_index,class_id,x,y,w,h,confidence`
// line per detection. One table per camera; a table registered under "*"
// serves cameras without their own.
class FileDetector final : public Detector {
 public:
  using Table = std::map<long, std::vector<Detection>>;

  static Table parse(std::string_view text);
  static Table load(const std::string& path);

  explicit FileDetector(std::map<std::string, Table> tables) : tables_(std::move(tables)) {}
  std::vector<Detection> detect(const Frame& frame) const override;

 private:
  std::map<std::string, Table> tables_;
};

// POST {base_url}/detect with {"frame_b64", "camera_id", "frame_index"}.
class RemoteDetector final : public Detector {
 public:
  explicit RemoteDetector(std::string base_url, double timeout_s = 5.0);
  std::vector<Detection> detect(const Frame& frame) const override;

 private:
  std::string base_url_;
  double timeout_s_;
};

// 8x8x8 joint RGB histogram of the crop, L2-normalized (512 dims).
class HistogramEmbedder final : public Embedder {
 public:
  AppearanceVector embed(const Frame& frame, const BBox& box) const override;
};

struct OracleEmbedderParams {
  int dim = 128;
  double noise_sigma = 0.05;
  double min_share = 0.25;  // pixel share an agent needs to own the crop
  std::uint64_t seed = 0;
};

// Identity basis vector of the agent owning the crop plus Gaussian noise,
// renormalized. Background crops map to a reserved basis vector no agent uses.
class OracleEmbedder final : public Embedder {
 public:
  OracleEmbedder(std::shared_ptr<const sim::Scenario> scenario, OracleEmbedderParams params);
  AppearanceVector embed(const Frame& frame, const BBox& box) const override;

  int basis_index(int agent_index) const { return agent_index % (params_.dim - 1); }

 private:
  std::shared_ptr<const sim::Scenario> scenario_;
  OracleEmbedderParams params_;
};

// POST {base_url}/embed with {"crop_b64"} -> {"vector": [...]}.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(std::string base_url, double timeout_s = 5.0);
  AppearanceVector embed(const Frame& frame, const BBox& box) const override;

 private:
  std::string base_url_;
  double timeout_s_;
};

// Deterministic 64-bit key for seeding per-(camera, frame) random streams.
std::uint64_t stream_key(std::uint64_t seed, std::string_view camera, long frame, std::uint64_t salt = 0);

}  // namespace handoff
