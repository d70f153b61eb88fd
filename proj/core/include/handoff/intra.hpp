#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "handoff/cftracker.hpp"
#include "handoff/perception.hpp"

namespace handoff::intra {

struct IntraConfig {
  double iou_threshold = 0.30;      // detector/filter agreement gate
  double occlusion_min_iou = 0.10;  // overlap that makes a non-max detection count as an occluder
  int exit_zero_frames = 3;         // consecutive empty IOU vectors before the target is declared gone
  double reid_s_min = -1.0;         // acquisition threshold; -1 accepts the best candidate unconditionally
  bool occlusion_assessment = true;
  cf::FilterParams filter;

  void validate() const;
};

enum class Phase { Acquiring, Tracking };

struct IntraState {
  IntraConfig config;
  Phase phase = Phase::Acquiring;
  std::optional<cf::FilterModel> model;
  std::optional<BBox> last_box;
  int zero_streak = 0;

  explicit IntraState(IntraConfig cfg = {}) : config(cfg) { config.validate(); }
};

enum class Status { Reacquired, Tracking, LowConfidence, OcclusionDetected, AcquiringFailed, Exited };

std::string_view to_string(Status s);

struct StepResult {
  Status status = Status::AcquiringFailed;
  std::optional<BBox> box;  // present for Reacquired, Tracking, LowConfidence
  // Diagnostics for the tracking branch.
  std::vector<double> iou_vector;
  std::optional<BBox> predicted;
};

struct IouConstraint {
  std::vector<double> iou_vector;
  std::optional<std::size_t> best_index;
};

IouConstraint apply_iou_constraint(std::span<const Detection> dets, const BBox& predicted);

// True when more than one detection other than the best-overlapping one
// overlaps the predicted box by more than `min_iou`. Entries equal to the
// maximum never count, duplicates of the maximum included.
bool detect_occlusion(std::span<const double> iou_vector, double min_iou = 0.1);

// One frame of the per-camera tracker. Mutates `state`; DetectorUnavailable propagates.
StepResult intra_step(IntraState& state, const Frame& frame, const Detector& detector, const Embedder& embedder,
                      const AppearanceVector& target_features);

}  // namespace handoff::intra
