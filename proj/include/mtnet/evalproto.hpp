#pragma once

// Detection IoU and per-angle pose MAE over matched predictions.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtnet/gridcodec.hpp"
#include "mtnet/losses.hpp"

namespace mtnet {

struct MatchedPair {
  Detection pred;
  GroundTruth gt;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<Detection> unmatched_preds;
  std::vector<GroundTruth> unmatched_gts;
};

/// Greedy one-to-one matching: predictions in descending confidence (ties by
/// input order) each take the unmatched ground truth of highest IoU, provided
/// that IoU is >= iou_threshold.
MatchResult match_detections(const std::vector<Detection>& preds, const Annotation& gts,
                             double iou_threshold);

struct PoseMae {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

/// Predicted angles of a detection: PoseVectors are projected to the nearest
/// rotation before conversion; EulerAngles are used as-is.
EulerAngles predicted_angles(const Detection& d);

/// Mean per-angle error over matched pairs. Throws UndefinedMetric on an empty list.
PoseMae pose_mae(const std::vector<MatchedPair>& pairs);

/// Mean IoU over ground truths, counting unmatched ground truths as 0.
/// Throws UndefinedMetric when there are no ground truths.
double detection_iou_score(const std::vector<Detection>& preds, const Annotation& gts,
                           double iou_threshold);

struct EvalConfig {
  double match_iou_threshold = 0.5;
  double conf_threshold = 0.5;
  double nms_threshold = 0.5;
};

struct EvalReport {
  std::optional<double> mean_iou;
  std::optional<double> mae_yaw;
  std::optional<double> mae_pitch;
  std::optional<double> mae_roll;
  std::optional<double> mae_avg;
  int matched_count = 0;
  int missed_count = 0;
  int spurious_count = 0;
};

struct ImagePredictions {
  std::string image_id;
  std::vector<Detection> detections;
};

/// Evaluates per-image predictions against annotations with the same image ids
/// in the same order. Throws InvalidArgument on a length or id mismatch.
EvalReport evaluate(const std::vector<ImagePredictions>& preds,
                    const std::vector<Annotation>& annotations, const EvalConfig& config);

/// Report plus a "decisions" block (match threshold, loss weights, codec variant).
nlohmann::json report_to_json(const EvalReport& r, const EvalConfig& config, const LossWeights& weights,
                              const GridSpec& spec);

}  // namespace mtnet
