#pragma once

// Encoding of ground truth into, and decoding of predictions out of, the joint
// detection + pose grid tensor.

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "mtnet/grid.hpp"
#include "mtnet/losses.hpp"
#include "mtnet/rotgeom.hpp"

namespace mtnet {

/// Center-size box; coordinates are normalized to the image for grid boxes.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  static Box from_corners(double x0, double y0, double x1, double y1);
  [[nodiscard]] double area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

/// Intersection over union. Throws InvalidArgument for non-positive sizes.
double iou(const Box& a, const Box& b);

using PosePayload = std::variant<PoseVectors, EulerAngles>;

struct Detection {
  Box box;
  double confidence = 0.0;
  int class_id = 0;
  double class_score = 0.0;
  PosePayload pose;
};

struct GroundTruth {
  Box box;
  EulerAngles pose;
};

struct Annotation {
  std::string image_id;
  std::vector<GroundTruth> objects;
};

/// Sigmoid on tx, ty, objectness and class channels (tanh on tx, ty for the
/// tanh-normalized variant). wh and pose channels pass through.
/// Throws StateError if the tensor is already activated.
GridTensor activate(const GridTensor& raw, const GridSpec& spec);

/// Inverse of activate on realizable values; probabilities are clamped to
/// [1e-7, 1 - 1e-7] (and tanh values to (-1 + 2e-7, 1 - 2e-7)) before inversion.
GridTensor deactivate(const GridTensor& act, const GridSpec& spec);

/// Detections of one image whose objectness is >= conf_threshold, in
/// (row, column, anchor) order.
std::vector<Detection> decode(const GridTensor& act, const GridSpec& spec, double conf_threshold,
                              int image = 0);

/// Per-image target assignment for one annotation (batch of 1).
/// Throws InvalidArgument for a box center outside [0, 1] or a non-positive size.
BoxTargets encode_targets(const Annotation& ann, const GridSpec& spec);

/// Ideal activated tensor for the given targets: offsets, log sizes, 0/1
/// objectness and one-hot classes at positive slots. Ignore slots read as 0.
GridTensor targets_to_tensor(const BoxTargets& targets, const GridSpec& spec);

/// Pose regression target for one object: columns of the rotation for np = 9,
/// (yaw / 180, pitch / 90, roll / 90) for np = 3.
std::vector<double> pose_target(const EulerAngles& angles, int np);

/// Converts a 3-value normalized pose output back to angles (inputs clamped to [-1, 1]).
EulerAngles euler_from_normalized(double yaw_n, double pitch_n, double roll_n);

/// Greedy class-aware non-maximum suppression (ties broken by input order).
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

/// Decodes every scale of one image, concatenates, and runs a single NMS pass.
struct ScaleOutput {
  const GridTensor* tensor;
  GridSpec spec;
};
std::vector<Detection> decode_scales(const std::vector<ScaleOutput>& scales, double conf_threshold,
                                     double nms_threshold, int image = 0);

// --- Annotation files: JSON Lines ----------------------------------------

std::vector<Annotation> read_annotations(std::istream& in);
std::vector<Annotation> read_annotations_file(const std::string& path);
void write_annotations(std::ostream& out, const std::vector<Annotation>& anns);
void write_annotations_file(const std::string& path, const std::vector<Annotation>& anns);

}  // namespace mtnet
