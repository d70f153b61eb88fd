#include "handoff/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace handoff {

bool BBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
         w >= 0.0 && h >= 0.0;
}

BBox intersection(const BBox& a, const BBox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.right(), b.right());
  const double y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0.0, 0.0};
  return {x0, y0, x1 - x0, y1 - y0};
}

BBox clip_to(const BBox& box, double width, double height) {
  return intersection(box, BBox{0.0, 0.0, width, height});
}

double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const BBox& a, const BBox& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

std::string_view to_string(MatchKind kind) {
  switch (kind) {
    case MatchKind::TP: return "TP";
    case MatchKind::FP: return "FP";
    case MatchKind::FN: return "FN";
    case MatchKind::Skip: return "SKIP";
  }
  return "SKIP";
}

FrameMatch classify_frame(const std::optional<BBox>& pred, const std::optional<BBox>& gt,
                          double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("match threshold must lie in (0,1)");
  if (!pred && !gt) return {};
  if (!pred) return {MatchKind::FN, std::nullopt, std::nullopt};
  if (!gt) return {MatchKind::FP, std::nullopt, std::nullopt};
  const double overlap = iou(*pred, *gt);
  return {overlap >= tau ? MatchKind::TP : MatchKind::FP, overlap, center_distance(*pred, *gt)};
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

EvalReport aggregate(std::span<const FrameMatch> matches) {
  EvalReport r;
  double iou_sum = 0.0;
  double dist_sum = 0.0;
  long paired = 0;
  for (const auto& m : matches) {
    switch (m.kind) {
      case MatchKind::TP: ++r.tp; break;
      case MatchKind::FP: ++r.fp; break;
      case MatchKind::FN: ++r.fn; break;
      case MatchKind::Skip: continue;
    }
    ++r.frames_evaluated;
    if (m.iou && m.center_dist) {
      iou_sum += *m.iou;
      dist_sum += *m.center_dist;
      ++paired;
    }
  }
  const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  r.precision = ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
  r.recall = ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
  r.f1 = f1_score(r.precision, r.recall);
  r.mean_iou = ratio(iou_sum, static_cast<double>(paired));
  r.mean_iou_all = ratio(iou_sum, static_cast<double>(r.frames_evaluated));
  r.ope = ratio(dist_sum, static_cast<double>(paired));
  return r;
}

}  // namespace handoff
