#include "mtnet/rotgeom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mtnet/errors.hpp"

namespace mtnet {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

constexpr int kMaxSweeps = 30;
constexpr double kJacobiTolerance = 1e-14;
constexpr double kGimbalCos = 1e-7;
// Singular values below this fraction of the largest one count as zero.
constexpr double kRankTolerance = 1e-12;

bool finite(const Matrix3& m) { return m.allFinite(); }

// Any unit vector orthogonal to the unit vector u.
Vector3 any_orthogonal(const Vector3& u) {
  int k = 0;
  u.cwiseAbs().minCoeff(&k);
  Vector3 e = Vector3::Zero();
  e[k] = 1.0;
  return (e - u.dot(e) * u).normalized();
}

}  // namespace

double wrap_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

EulerAngles EulerAngles::normalized() const {
  double y = yaw;
  double p = wrap_degrees(pitch);
  double r = roll;
  if (p > 90.0) {
    p = 180.0 - p;
    y += 180.0;
    r += 180.0;
  } else if (p < -90.0) {
    p = -180.0 - p;
    y += 180.0;
    r += 180.0;
  }
  return {wrap_degrees(y), p, wrap_degrees(r)};
}

bool EulerAngles::is_normalized() const {
  return std::isfinite(yaw) && std::isfinite(pitch) && std::isfinite(roll) && yaw > -180.0 &&
         yaw <= 180.0 && pitch >= -90.0 && pitch <= 90.0 && roll > -180.0 && roll <= 180.0;
}

bool RotationMatrix::is_valid(const Matrix3& m, double tol) {
  if (!finite(m)) return false;
  if ((m.transpose() * m - Matrix3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

RotationMatrix::RotationMatrix(const Matrix3& m) : m_(m) {
  if (!is_valid(m)) {
    throw InvalidArgument("matrix is not a proper rotation (orthonormality or det = +1 violated)");
  }
}

std::array<double, 9> PoseVectors::flat() const {
  return {v1[0], v1[1], v1[2], v2[0], v2[1], v2[2], v3[0], v3[1], v3[2]};
}

PoseVectors PoseVectors::from_flat(const std::array<double, 9>& f) {
  return {Vector3(f[0], f[1], f[2]), Vector3(f[3], f[4], f[5]), Vector3(f[6], f[7], f[8])};
}

bool PoseVectors::is_finite() const { return v1.allFinite() && v2.allFinite() && v3.allFinite(); }

RotationMatrix euler_to_matrix(const EulerAngles& a) {
  if (!std::isfinite(a.yaw) || !std::isfinite(a.pitch) || !std::isfinite(a.roll)) {
    throw InvalidArgument("euler_to_matrix: non-finite angle");
  }
  const double y = a.yaw * kDegToRad;
  const double p = a.pitch * kDegToRad;
  const double r = a.roll * kDegToRad;
  Matrix3 yaw_m;
  yaw_m << std::cos(y), -std::sin(y), 0.0,
           std::sin(y), std::cos(y), 0.0,
           0.0, 0.0, 1.0;
  Matrix3 pitch_m;
  pitch_m << std::cos(p), 0.0, std::sin(p),
             0.0, 1.0, 0.0,
             -std::sin(p), 0.0, std::cos(p);
  Matrix3 roll_m;
  roll_m << 1.0, 0.0, 0.0,
            0.0, std::cos(r), -std::sin(r),
            0.0, std::sin(r), std::cos(r);
  return RotationMatrix(yaw_m * pitch_m * roll_m);
}

EulerAngles matrix_to_euler(const RotationMatrix& rot) {
  const Matrix3& r = rot.matrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double cos_pitch = std::hypot(r(0, 0), r(1, 0));
  double yaw = 0.0;
  double roll = 0.0;
  if (cos_pitch < kGimbalCos) {
    // With roll = 0 the second column is (-sin yaw, cos yaw, 0) for either sign of pitch.
    yaw = std::atan2(-r(0, 1), r(1, 1));
  } else {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  }
  EulerAngles out{wrap_degrees(yaw * kRadToDeg), pitch * kRadToDeg, wrap_degrees(roll * kRadToDeg)};
  return out;
}

PoseVectors pose_vectors_from_matrix(const RotationMatrix& r) {
  return {r.column(0), r.column(1), r.column(2)};
}

Matrix3 matrix_from_pose_vectors(const PoseVectors& p) {
  Matrix3 m;
  m.col(0) = p.v1;
  m.col(1) = p.v2;
  m.col(2) = p.v3;
  return m;
}

Svd3 svd3(const Matrix3& m) {
  if (!finite(m)) throw InvalidArgument("svd3: non-finite matrix");

  // Orthogonalize the columns of A = M V by plane rotations applied on the right.
  Matrix3 a = m;
  Matrix3 v = Matrix3::Identity();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double alpha = a.col(p).squaredNorm();
        const double beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int k = 0; k < 3; ++k) {
          const double ap = a(k, p);
          const double aq = a(k, q);
          a(k, p) = c * ap - s * aq;
          a(k, q) = s * ap + c * aq;
          const double vp = v(k, p);
          const double vq = v(k, q);
          v(k, p) = c * vp - s * vq;
          v(k, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::array<int, 3> order{0, 1, 2};
  Vector3 norms(a.col(0).norm(), a.col(1).norm(), a.col(2).norm());
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return norms[i] > norms[j]; });

  Svd3 out;
  for (int i = 0; i < 3; ++i) {
    out.sigma[i] = norms[order[i]];
    out.v.col(i) = v.col(order[i]);
  }

  // Left vectors: normalize, re-orthogonalize, and complete the basis where
  // singular values vanish.
  const double s0 = out.sigma[0];
  const double zero = kRankTolerance * s0;
  Vector3 u0 = s0 > 0.0 ? Vector3(a.col(order[0]) / s0) : Vector3::UnitX();
  Vector3 u1;
  const Vector3 a1 = a.col(order[1]);
  const Vector3 a1_perp = a1 - a1.dot(u0) * u0;
  if (out.sigma[1] > zero && a1_perp.norm() > 0.0) {
    u1 = a1_perp.normalized();
  } else {
    u1 = any_orthogonal(u0);
  }
  Vector3 u2 = u0.cross(u1);
  const Vector3 a2 = a.col(order[2]);
  if (out.sigma[2] > zero && a2.dot(u2) < 0.0) u2 = -u2;
  out.u.col(0) = u0;
  out.u.col(1) = u1;
  out.u.col(2) = u2;
  return out;
}

RotationMatrix nearest_rotation(const Matrix3& m) {
  const Svd3 d = svd3(m);
  if (!(d.sigma[0] > 0.0) || d.sigma[1] <= kRankTolerance * d.sigma[0]) {
    throw DegenerateInput("nearest_rotation: matrix has rank < 2, nearest rotation is not unique");
  }
  const double s = (d.u * d.v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Matrix3 r = d.u * Vector3(1.0, 1.0, s).asDiagonal() * d.v.transpose();
  return RotationMatrix(r);
}

AngularError angular_error(const EulerAngles& pred, const EulerAngles& truth) {
  auto wrap_abs = [](double d) {
    const double a = std::fmod(std::abs(d), 360.0);
    return std::min(a, 360.0 - a);
  };
  return {wrap_abs(pred.yaw - truth.yaw), wrap_abs(pred.pitch - truth.pitch),
          wrap_abs(pred.roll - truth.roll)};
}

}  // namespace mtnet
