#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace handoff {

// Axis-aligned box in pixel coordinates, origin at the top-left of the image.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }

  bool valid() const;
  bool empty() const { return !(w > 0.0 && h > 0.0); }

  BBox translated(double dx, double dy) const { return {x + dx, y + dy, w, h}; }
  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

BBox intersection(const BBox& a, const BBox& b);
BBox clip_to(const BBox& box, double width, double height);
double intersection_area(const BBox& a, const BBox& b);

// Intersection over union; 0 when the union is empty.
double iou(const BBox& a, const BBox& b);
double center_distance(const BBox& a, const BBox& b);

// ---------------------------------------------------------------------------
// Evaluation metrics: precision / recall / F1 over per-frame matches, mean IOU
// and the mean center error (OPE) over frames where both boxes exist.

enum class MatchKind { TP, FP, FN, Skip };

std::string_view to_string(MatchKind kind);

struct FrameMatch {
  MatchKind kind = MatchKind::Skip;
  std::optional<double> iou;
  std::optional<double> center_dist;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mean_iou = 0.0;      // over frames with both boxes present
  double mean_iou_all = 0.0;  // over every non-skipped frame, 0 where a box is missing
  double ope = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long frames_evaluated = 0;
};

inline constexpr double kDefaultMatchThreshold = 0.5;

FrameMatch classify_frame(const std::optional<BBox>& pred, const std::optional<BBox>& gt,
                          double tau = kDefaultMatchThreshold);

EvalReport aggregate(std::span<const FrameMatch> matches);

double f1_score(double precision, double recall);

}  // namespace handoff
