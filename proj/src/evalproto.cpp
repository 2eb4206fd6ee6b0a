#include "mtnet/evalproto.hpp"

#include <algorithm>
#include <numeric>

#include "mtnet/errors.hpp"

namespace mtnet {

MatchResult match_detections(const std::vector<Detection>& preds, const Annotation& gts,
                             double iou_threshold) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  std::vector<bool> taken(gts.objects.size(), false);
  MatchResult out;
  for (std::size_t p : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.objects.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(preds[p].box, gts.objects[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_threshold) {
      taken[best] = true;
      out.pairs.push_back({preds[p], gts.objects[best], best_iou});
    } else {
      out.unmatched_preds.push_back(preds[p]);
    }
  }
  for (std::size_t g = 0; g < gts.objects.size(); ++g) {
    if (!taken[g]) out.unmatched_gts.push_back(gts.objects[g]);
  }
  return out;
}

EulerAngles predicted_angles(const Detection& d) {
  if (const auto* v = std::get_if<PoseVectors>(&d.pose)) {
    return matrix_to_euler(nearest_rotation(matrix_from_pose_vectors(*v)));
  }
  return std::get<EulerAngles>(d.pose);
}

PoseMae pose_mae(const std::vector<MatchedPair>& pairs) {
  if (pairs.empty()) throw UndefinedMetric("pose MAE is undefined without matched pairs");
  PoseMae m;
  for (const MatchedPair& p : pairs) {
    const AngularError e = angular_error(predicted_angles(p.pred), p.gt.pose.normalized());
    m.yaw += e.yaw;
    m.pitch += e.pitch;
    m.roll += e.roll;
  }
  const double n = static_cast<double>(pairs.size());
  m.yaw /= n;
  m.pitch /= n;
  m.roll /= n;
  return m;
}

double detection_iou_score(const std::vector<Detection>& preds, const Annotation& gts,
                           double iou_threshold) {
  if (gts.objects.empty()) throw UndefinedMetric("detection IoU is undefined without ground truths");
  const MatchResult m = match_detections(preds, gts, iou_threshold);
  double sum = 0.0;
  for (const MatchedPair& p : m.pairs) sum += p.iou;
  return sum / static_cast<double>(gts.objects.size());
}

EvalReport evaluate(const std::vector<ImagePredictions>& preds,
                    const std::vector<Annotation>& annotations, const EvalConfig& config) {
  if (preds.size() != annotations.size()) {
    throw InvalidArgument("evaluate: prediction and annotation counts differ");
  }
  EvalReport r;
  std::vector<MatchedPair> all_pairs;
  double iou_sum = 0.0;
  int gt_count = 0;
  for (std::size_t n = 0; n < preds.size(); ++n) {
    if (preds[n].image_id != annotations[n].image_id) {
      throw InvalidArgument("evaluate: image " + std::to_string(n) + " is '" + preds[n].image_id +
                            "' in predictions but '" + annotations[n].image_id + "' in annotations");
    }
    MatchResult m = match_detections(preds[n].detections, annotations[n], config.match_iou_threshold);
    for (const MatchedPair& p : m.pairs) iou_sum += p.iou;
    gt_count += static_cast<int>(annotations[n].objects.size());
    r.matched_count += static_cast<int>(m.pairs.size());
    r.missed_count += static_cast<int>(m.unmatched_gts.size());
    r.spurious_count += static_cast<int>(m.unmatched_preds.size());
    all_pairs.insert(all_pairs.end(), m.pairs.begin(), m.pairs.end());
  }
  if (gt_count > 0) r.mean_iou = iou_sum / gt_count;
  if (!all_pairs.empty()) {
    const PoseMae m = pose_mae(all_pairs);
    r.mae_yaw = m.yaw;
    r.mae_pitch = m.pitch;
    r.mae_roll = m.roll;
    r.mae_avg = (m.yaw + m.pitch + m.roll) / 3.0;
  }
  return r;
}

nlohmann::json report_to_json(const EvalReport& r, const EvalConfig& config, const LossWeights& w,
                              const GridSpec& spec) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json anchors = nlohmann::json::array();
  for (const Anchor& a : spec.anchors) anchors.push_back({a.w, a.h});
  return {
      {"mean_iou", opt(r.mean_iou)},
      {"mae_yaw", opt(r.mae_yaw)},
      {"mae_pitch", opt(r.mae_pitch)},
      {"mae_roll", opt(r.mae_roll)},
      {"mae_avg", opt(r.mae_avg)},
      {"matched_count", r.matched_count},
      {"missed_count", r.missed_count},
      {"spurious_count", r.spurious_count},
      {"decisions",
       {{"iou_aggregation", "mean over ground truths, misses count as 0"},
        {"match_iou_threshold", config.match_iou_threshold},
        {"conf_threshold", config.conf_threshold},
        {"nms_threshold", config.nms_threshold},
        {"loss_weights",
         {{"lambda_xy", w.lambda_xy},
          {"lambda_wh", w.lambda_wh},
          {"lambda_cls", w.lambda_cls},
          {"lambda_obj", w.lambda_obj},
          {"alpha", w.alpha}}},
        {"codec",
         {{"k", spec.k},
          {"cls", spec.cls},
          {"np", spec.np},
          {"pose_representation", spec.np == 9 ? "vector-base" : "euler"},
          {"box_activation", to_string(spec.box_activation)},
          {"anchors", anchors}}}}}};
}

}  // namespace mtnet
