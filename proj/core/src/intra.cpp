#include "handoff/intra.hpp"

#include <algorithm>
#include <stdexcept>

namespace handoff::intra {

void IntraConfig::validate() const {
  const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(iou_threshold) || !unit(occlusion_min_iou))
    throw std::invalid_argument("IOU thresholds must lie in [0,1]");
  if (!(occlusion_min_iou < iou_threshold))
    throw std::invalid_argument("occlusion_min_iou must be below iou_threshold");
  if (exit_zero_frames < 1) throw std::invalid_argument("exit_zero_frames must be at least 1");
  if (reid_s_min < -1.0 || reid_s_min > 1.0) throw std::invalid_argument("reid_s_min must lie in [-1,1]");
  filter.validate();
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Reacquired: return "reacquired";
    case Status::Tracking: return "tracking";
    case Status::LowConfidence: return "low_confidence";
    case Status::OcclusionDetected: return "occluded";
    case Status::AcquiringFailed: return "acquiring_failed";
    case Status::Exited: return "exited";
  }
  return "unknown";
}

IouConstraint apply_iou_constraint(std::span<const Detection> dets, const BBox& predicted) {
  IouConstraint out;
  out.iou_vector.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    out.iou_vector.push_back(iou(dets[i].bbox, predicted));
    if (!out.best_index || out.iou_vector[i] > out.iou_vector[*out.best_index]) out.best_index = i;
  }
  return out;
}

bool detect_occlusion(std::span<const double> iou_vector, double min_iou) {
  const double max_iou = iou_vector.empty() ? 0.0 : *std::max_element(iou_vector.begin(), iou_vector.end());
  int count = 0;
  for (double v : iou_vector)
    if (v > min_iou && v != max_iou) ++count;
  return count > 1;
}

namespace {

// Person detections clipped to the frame; anything left without area is dropped.
std::vector<Detection> persons_in_frame(const Detector& detector, const Frame& frame) {
  const auto raw = detector.detect(frame);
  std::vector<Detection> out;
  for (auto d : filter_persons(raw)) {
    d.bbox = clip_to(d.bbox, frame.width(), frame.height());
    if (!d.bbox.empty()) out.push_back(d);
  }
  return out;
}

void enter_acquiring(IntraState& s) {
  s.phase = Phase::Acquiring;
  s.model.reset();
  s.zero_streak = 0;
}

StepResult acquire(IntraState& s, const Frame& frame, const Detector& detector, const Embedder& embedder,
                   const AppearanceVector& target) {
  const auto dets = persons_in_frame(detector, frame);
  std::vector<AppearanceVector> features;
  features.reserve(dets.size());
  for (const auto& d : dets) features.push_back(embedder.embed(frame, d.bbox));
  const auto match = perform_reid(features, target, s.config.reid_s_min);
  if (!match) return {Status::AcquiringFailed, std::nullopt, {}, std::nullopt};

  const BBox box = dets[*match].bbox;
  s.model = cf::cf_init(*frame.image, box, s.config.filter);
  s.phase = Phase::Tracking;
  s.zero_streak = 0;
  s.last_box = box;
  return {Status::Reacquired, box, {}, std::nullopt};
}

StepResult track(IntraState& s, const Frame& frame, const Detector& detector) {
  const auto dets = persons_in_frame(detector, frame);
  const BBox predicted = cf::cf_update(*s.model, *frame.image).box;
  auto constraint = apply_iou_constraint(dets, predicted);
  const double max_iou = constraint.best_index ? constraint.iou_vector[*constraint.best_index] : 0.0;

  StepResult r;
  r.predicted = predicted;
  if (constraint.best_index && max_iou >= s.config.iou_threshold) {
    if (s.config.occlusion_assessment && detect_occlusion(constraint.iou_vector, s.config.occlusion_min_iou)) {
      enter_acquiring(s);
      r.status = Status::OcclusionDetected;
    } else {
      const BBox box = dets[*constraint.best_index].bbox;
      s.model = cf::cf_init(*frame.image, box, s.config.filter);
      s.zero_streak = 0;
      s.last_box = box;
      r.status = Status::Tracking;
      r.box = box;
    }
  } else if (max_iou == 0.0) {
    ++s.zero_streak;
    if (s.zero_streak >= s.config.exit_zero_frames) {
      enter_acquiring(s);
      r.status = Status::Exited;
    } else {
      s.last_box = predicted;
      r.status = Status::LowConfidence;
      r.box = predicted;
    }
  } else {
    s.last_box = predicted;
    r.status = Status::LowConfidence;
    r.box = predicted;
  }
  r.iou_vector = std::move(constraint.iou_vector);
  return r;
}

}  // namespace

StepResult intra_step(IntraState& state, const Frame& frame, const Detector& detector, const Embedder& embedder,
                      const AppearanceVector& target_features) {
  if (!frame.image || frame.image->empty()) throw std::invalid_argument("intra_step needs a frame with pixels");
  if (state.phase == Phase::Tracking && state.model) return track(state, frame, detector);
  return acquire(state, frame, detector, embedder, target_features);
}

}  // namespace handoff::intra
