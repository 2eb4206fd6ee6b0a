#pragma once

// Multitask loss stack: box-branch losses, pose-vector losses and the weighted
// total, with analytic gradients and a central-difference checker.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mtnet/grid.hpp"
#include "mtnet/rotgeom.hpp"

namespace mtnet {

struct LossWeights {
  double lambda_xy = 1.0;
  double lambda_wh = 1.0;
  double lambda_cls = 1.0;
  double lambda_obj = 1.0;
  double alpha = 0.5;

  /// Throws InvalidArgument on negative/non-finite lambdas or alpha outside [0, 1].
  void validate() const;
};

enum class ObjTarget : std::uint8_t { kNegative = 0, kPositive = 1, kIgnore = 2 };

/// Dense training targets for one grid tensor. Every per-slot array is indexed
/// by slot(b, a, i, j); pose targets hold np values per slot and are only
/// meaningful at positive slots.
struct BoxTargets {
  int batch = 0;
  int k = 0;
  int cls = 1;
  int np = 9;
  std::vector<ObjTarget> obj;
  std::vector<double> tx, ty, tw, th;
  std::vector<int> class_id;
  std::vector<double> pose;

  BoxTargets() = default;
  BoxTargets(int batch, int k, int cls, int np);

  [[nodiscard]] std::size_t slot(int b, int a, int i, int j) const {
    return ((static_cast<std::size_t>(b) * kAnchorsPerCell + a) * k + i) * k + j;
  }
  [[nodiscard]] std::size_t slots() const { return obj.size(); }
  [[nodiscard]] int positives() const;

  /// Appends the targets of `other` (same k, cls, np) along the batch axis.
  void append(const BoxTargets& other);
};

struct LossBreakdown {
  double l_xy = 0.0;
  double l_wh = 0.0;
  double l_cls = 0.0;
  double l_obj = 0.0;
  double l_bbox = 0.0;
  double l_vmse_x = 0.0;
  double l_vmse_y = 0.0;
  double l_vmse_z = 0.0;
  double l_ortho = 0.0;
  double l_pose = 0.0;
  double total = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Sum of squared component differences.
double vector_mse(const Vector3& pred, const Vector3& truth);

/// Sum over the three unordered pairs of squared dot products.
double ortho_loss(const PoseVectors& p);

/// vector_mse on each of the three vectors plus ortho_loss(pred).
double pose_loss(const PoseVectors& pred, const PoseVectors& truth);

/// d pose_loss / d pred.
PoseVectors pose_loss_grad(const PoseVectors& pred, const PoseVectors& truth);

/// alpha * l_bbox + (1 - alpha) * l_pose.
double total_loss(double l_bbox, double l_pose, double alpha);

/// Binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7].
double bce(double p, double target);
/// Derivative of bce in p; zero where the clamp is active.
double bce_grad(double p, double target);

/// Box-branch losses on an activated tensor. Fills l_xy, l_wh, l_cls, l_obj
/// and l_bbox; the pose fields stay zero. xy offsets are compared in [0, 1]
/// for both box activations (tanh outputs are remapped by (t + 1) / 2).
/// l_obj is averaged over non-ignored slots; the other terms over positives.
LossBreakdown bbox_loss(const GridTensor& act, const GridSpec& spec, const BoxTargets& targets,
                        const LossWeights& w);

/// Pose-branch loss averaged over positive slots. For np = 9 the slot payload
/// is read as PoseVectors and scored by pose_loss; for np = 3 it is the
/// normalized angle triple scored by vector_mse (no orthogonality term).
LossBreakdown pose_branch_loss(const GridTensor& act, const GridSpec& spec,
                               const BoxTargets& targets);

/// Full objective: bbox_loss + pose_branch_loss combined by total_loss.
LossBreakdown multitask_loss(const GridTensor& act, const GridSpec& spec, const BoxTargets& targets,
                             const LossWeights& w);

/// multitask_loss and its gradient with respect to every entry of the
/// activated tensor (wh and pose entries are raw, so their gradients are
/// also raw-space gradients).
LossBreakdown multitask_loss_grad(const GridTensor& act, const GridSpec& spec,
                                  const BoxTargets& targets, const LossWeights& w,
                                  std::vector<double>& grad);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Compares `analytic` with a central-difference gradient of f at `point`.
/// Returns max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|).
/// Throws NumericError if f is non-finite at a probe point.
double grad_check(const ScalarFunction& f, std::span<const double> analytic,
                  std::span<const double> point, double step);

/// Same, with the numeric gradient returned through `numeric`.
double grad_check(const ScalarFunction& f, std::span<const double> analytic,
                  std::span<const double> point, double step, std::vector<double>& numeric);

}  // namespace mtnet
