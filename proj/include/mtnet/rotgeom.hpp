#pragma once

// Rotation representations used for head pose.
//
// Euler convention (fixed across the library): R = Rz(yaw) * Ry(pitch) * Rx(roll),
// i.e. intrinsic Z-Y-X Tait-Bryan angles. Yaw is the in-plane rotation of the
// first two axes, pitch tilts the third axis, roll rotates about the first axis.
// Columns of R are the left / bottom / front pose vectors of the head.

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace mtnet {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

/// Yaw, pitch, roll in degrees.
struct EulerAngles {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  /// Maps to the canonical range: yaw, roll in (-180, 180], pitch in [-90, 90].
  /// A pitch outside [-90, 90] is folded by (y, p, r) -> (y + 180, 180 - p, r + 180),
  /// which denotes the same rotation.
  [[nodiscard]] EulerAngles normalized() const;
  [[nodiscard]] bool is_normalized() const;
};

/// Wraps an angle in degrees into (-180, 180].
double wrap_degrees(double deg);

/// A proper orthonormal 3x3 matrix. Construction validates the invariants.
class RotationMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  RotationMatrix() : m_(Matrix3::Identity()) {}
  /// Throws InvalidArgument unless m^T m = I and det(m) = +1 within kTolerance.
  explicit RotationMatrix(const Matrix3& m);

  static bool is_valid(const Matrix3& m, double tol = kTolerance);

  [[nodiscard]] const Matrix3& matrix() const { return m_; }
  [[nodiscard]] Vector3 column(int i) const { return m_.col(i); }
  double operator()(int r, int c) const { return m_(r, c); }

 private:
  Matrix3 m_;
};

/// Three predicted direction vectors; not necessarily orthonormal.
struct PoseVectors {
  Vector3 v1 = Vector3::Zero();
  Vector3 v2 = Vector3::Zero();
  Vector3 v3 = Vector3::Zero();

  Vector3& operator[](int i) { return i == 0 ? v1 : (i == 1 ? v2 : v3); }
  const Vector3& operator[](int i) const { return i == 0 ? v1 : (i == 1 ? v2 : v3); }

  /// Flat layout [v1 | v2 | v3], the order pose channels use in the grid tensor.
  [[nodiscard]] std::array<double, 9> flat() const;
  static PoseVectors from_flat(const std::array<double, 9>& f);
  [[nodiscard]] bool is_finite() const;
};

struct Svd3 {
  Matrix3 u;
  Vector3 sigma;  // descending, non-negative
  Matrix3 v;
};

/// Yaw/pitch/roll in degrees -> rotation matrix.
RotationMatrix euler_to_matrix(const EulerAngles& a);

/// Inverse of euler_to_matrix. At gimbal lock (|cos pitch| < 1e-7) roll is set
/// to 0 and the in-plane rotation is folded into yaw.
EulerAngles matrix_to_euler(const RotationMatrix& r);

PoseVectors pose_vectors_from_matrix(const RotationMatrix& r);
Matrix3 matrix_from_pose_vectors(const PoseVectors& p);

/// Singular value decomposition of a 3x3 matrix by one-sided Jacobi rotations.
/// At most 30 sweeps; a column pair counts as converged when its normalized
/// inner product is below 1e-14. U and V are orthogonal; sigma is sorted
/// in descending order.
Svd3 svd3(const Matrix3& m);

/// Closest proper rotation in Frobenius norm: U * diag(1, 1, det(U V^T)) * V^T.
/// Throws DegenerateInput if the matrix has rank < 2.
RotationMatrix nearest_rotation(const Matrix3& m);

/// Per-component absolute angular difference with 360-degree wraparound; each in [0, 180].
struct AngularError {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};
AngularError angular_error(const EulerAngles& pred, const EulerAngles& truth);

}  // namespace mtnet
