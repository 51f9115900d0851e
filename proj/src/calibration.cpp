#include "ofds/calibration.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include "ofds/errors.hpp"

namespace ofds::calibration {

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<MatchedProposal> match_proposals(std::span<const ObjectProposal> proposals,
                                             std::span<const GroundTruthObject> ground_truth,
                                             double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw UsageError("iou_threshold must be in (0,1]");
  }
  using Key = std::pair<std::string, std::int32_t>;
  std::map<Key, std::vector<std::size_t>> gt_groups;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    gt_groups[{ground_truth[g].image_id, ground_truth[g].class_id}].push_back(g);
  }

  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].confidence > proposals[b].confidence;
  });

  std::vector<bool> gt_taken(ground_truth.size(), false);
  std::vector<MatchedProposal> out(proposals.size());
  for (std::size_t p : order) {
    const auto& prop = proposals[p];
    out[p].confidence = prop.confidence;
    auto it = gt_groups.find({prop.image_id, prop.class_id});
    if (it == gt_groups.end()) continue;
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g : it->second) {
      if (gt_taken[g]) continue;
      const double v = iou(prop.bbox, ground_truth[g].bbox);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best >= 0.0) {
      gt_taken[best_g] = true;
      out[p].is_true_positive = true;
    }
  }
  return out;
}

namespace {

void fill_rates(CurvePoint& pt, std::size_t total_gt) {
  const auto emitted = static_cast<double>(pt.emitted());
  pt.fpr = emitted > 0 ? static_cast<double>(pt.fp) / emitted : 0.0;
  pt.precision = emitted > 0 ? static_cast<double>(pt.tp) / emitted : 0.0;
  pt.recall = total_gt > 0 ? static_cast<double>(pt.tp) / static_cast<double>(total_gt) : 0.0;
  // 2TP / (2TP + FP + FN): equal ratios give bit-equal values, so ties are exact.
  const auto denom = 2 * pt.tp + pt.fp + pt.fn;
  pt.f1 = denom > 0 ? static_cast<double>(2 * pt.tp) / static_cast<double>(denom) : 0.0;
}

}  // namespace

CalibrationCurve sweep_thresholds(std::span<const MatchedProposal> matched, std::size_t total_gt) {
  std::vector<MatchedProposal> sorted(matched.begin(), matched.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.confidence > b.confidence;
  });

  std::vector<double> thresholds{0.0, 1.0};
  for (const auto& m : sorted) thresholds.push_back(m.confidence);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  CalibrationCurve curve;
  curve.total_gt = total_gt;
  curve.points.resize(thresholds.size());
  // Walk thresholds from high to low, admitting proposals as they qualify.
  std::size_t next = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = thresholds.size(); i-- > 0;) {
    const double t = thresholds[i];
    while (next < sorted.size() && sorted[next].confidence >= t) {
      (sorted[next].is_true_positive ? tp : fp) += 1;
      ++next;
    }
    if (tp > total_gt) throw UsageError("total_gt is smaller than the true-positive count");
    CurvePoint& pt = curve.points[i];
    pt.threshold = t;
    pt.tp = tp;
    pt.fp = fp;
    pt.fn = total_gt - tp;
    fill_rates(pt, total_gt);
  }
  return curve;
}

ThresholdChoice threshold_for_fpr(const CalibrationCurve& curve, double target_fpr) {
  if (curve.points.empty()) throw UsageError("empty calibration curve");
  for (const auto& pt : curve.points) {
    if (pt.emitted() > 0 && pt.fpr <= target_fpr) return {pt.threshold, pt, true};
  }
  return {curve.points.back().threshold, curve.points.back(), false};
}

ThresholdChoice threshold_for_f1(const CalibrationCurve& curve) {
  if (curve.points.empty()) throw UsageError("empty calibration curve");
  const CurvePoint* best = &curve.points.back();
  for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
    if (it->f1 > best->f1) best = &*it;
  }
  return {best->threshold, *best, true};
}

}  // namespace ofds::calibration
