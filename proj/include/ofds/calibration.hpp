#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ofds/dataset.hpp"

namespace ofds::calibration {

inline constexpr double kDefaultIouThreshold = 0.5;
inline constexpr double kDefaultTargetFpr = 0.05;

struct MatchedProposal {
  double confidence = 0.0;
  bool is_true_positive = false;
};

struct CurvePoint {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  // FP / (TP + FP) among proposals at or above the threshold; 0 when none are kept.
  double fpr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  std::size_t emitted() const { return tp + fp; }
};

// Points sorted by ascending threshold.
struct CalibrationCurve {
  std::vector<CurvePoint> points;
  std::size_t total_gt = 0;
};

struct ThresholdChoice {
  double threshold = 1.0;
  CurvePoint point;
  bool satisfiable = true;
};

double iou(const BBox& a, const BBox& b);

// Greedy class-aware matching per image: proposals in descending confidence
// (ingestion order on ties) each claim the unmatched ground-truth box of the
// same class with the highest IoU >= iou_threshold. Output is in input order.
std::vector<MatchedProposal> match_proposals(std::span<const ObjectProposal> proposals,
                                             std::span<const GroundTruthObject> ground_truth,
                                             double iou_threshold = kDefaultIouThreshold);

// Counts at every distinct confidence plus 0 and 1, keeping confidence >= t.
CalibrationCurve sweep_thresholds(std::span<const MatchedProposal> matched, std::size_t total_gt);

// Smallest threshold that keeps at least one proposal with FPR <= target.
// Falls back to the largest threshold with satisfiable = false.
ThresholdChoice threshold_for_fpr(const CalibrationCurve& curve,
                                  double target_fpr = kDefaultTargetFpr);

// Threshold with maximal F1; ties go to the larger threshold.
ThresholdChoice threshold_for_f1(const CalibrationCurve& curve);

}  // namespace ofds::calibration
