#include <gtest/gtest.h>

#include <random>

#include "mtnet/errors.hpp"
#include "mtnet/rotgeom.hpp"
#include "test_support.hpp"

using namespace mtnet;
using mtnet::testing::product_oracle;

namespace {

void expect_matrix_near(const Matrix3& a, const Matrix3& b, double tol) {
  EXPECT_LT((a - b).norm(), tol) << "\n" << a << "\n vs \n" << b;
}

}  // namespace

TEST(EulerToMatrix, ZeroIsIdentity) {
  expect_matrix_near(euler_to_matrix({0, 0, 0}).matrix(), Matrix3::Identity(), 0.0 + 1e-15);
}

TEST(EulerToMatrix, Yaw90) {
  const Matrix3 m = euler_to_matrix({90, 0, 0}).matrix();
  expect_matrix_near(m, product_oracle(90, 0, 0), 1e-15);
  EXPECT_LT((m.col(0) - Vector3(0, 1, 0)).norm(), 1e-15);
  EXPECT_LT((m.col(1) - Vector3(-1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((m.col(2) - Vector3(0, 0, 1)).norm(), 1e-15);
}

TEST(EulerToMatrix, Pitch90) {
  Matrix3 expected;
  expected << 0, 0, 1, 0, 1, 0, -1, 0, 0;
  expect_matrix_near(euler_to_matrix({0, 90, 0}).matrix(), expected, 1e-15);
}

TEST(EulerToMatrix, MatchesElementaryProduct) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-360.0, 360.0);
  for (int n = 0; n < 1000; ++n) {
    const double y = u(rng), p = u(rng), r = u(rng);
    expect_matrix_near(euler_to_matrix({y, p, r}).matrix(), product_oracle(y, p, r), 1e-13);
  }
}

TEST(EulerToMatrix, ColumnsAreRightHandedOrthonormal) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-180.0, 180.0);
  for (int n = 0; n < 10000; ++n) {
    const RotationMatrix r = euler_to_matrix({u(rng), u(rng) / 2.0, u(rng)});
    const Vector3 a = r.column(0), b = r.column(1), c = r.column(2);
    EXPECT_LT(std::abs(a.dot(b)), 1e-12);
    EXPECT_LT(std::abs(a.dot(c)), 1e-12);
    EXPECT_LT(std::abs(b.dot(c)), 1e-12);
    EXPECT_NEAR(a.cross(b).dot(c), 1.0, 1e-9);
  }
}

TEST(EulerToMatrix, RejectsNonFinite) {
  EXPECT_THROW(euler_to_matrix({std::nan(""), 0, 0}), InvalidArgument);
  EXPECT_THROW(euler_to_matrix({0, INFINITY, 0}), InvalidArgument);
}

TEST(MatrixToEuler, IdentityIsZero) {
  const EulerAngles e = matrix_to_euler(RotationMatrix());
  EXPECT_EQ(e.yaw, 0.0);
  EXPECT_EQ(e.pitch, 0.0);
  EXPECT_EQ(e.roll, 0.0);
}

TEST(MatrixToEuler, RecoversAngles) {
  const EulerAngles e = matrix_to_euler(euler_to_matrix({30, 20, 10}));
  EXPECT_NEAR(e.yaw, 30, 1e-9);
  EXPECT_NEAR(e.pitch, 20, 1e-9);
  EXPECT_NEAR(e.roll, 10, 1e-9);
}

TEST(MatrixToEuler, GimbalLockFoldsIntoYaw) {
  const EulerAngles e = matrix_to_euler(euler_to_matrix({0, 90, 0}));
  EXPECT_NEAR(e.pitch, 90, 1e-6);
  EXPECT_EQ(e.roll, 0.0);
  EXPECT_NEAR(e.yaw, 0, 1e-6);

  const RotationMatrix locked = euler_to_matrix({40, 90, 15});
  const EulerAngles f = matrix_to_euler(locked);
  EXPECT_EQ(f.roll, 0.0);
  expect_matrix_near(euler_to_matrix(f).matrix(), locked.matrix(), 1e-9);

  const RotationMatrix down = euler_to_matrix({-20, -90, 35});
  expect_matrix_near(euler_to_matrix(matrix_to_euler(down)).matrix(), down.matrix(), 1e-9);
}

TEST(MatrixToEuler, RoundTripProperty) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> yr(-179.999, 180.0), p(-89.0, 89.0);
  for (int n = 0; n < 10000; ++n) {
    const EulerAngles a{yr(rng), p(rng), yr(rng)};
    const EulerAngles b = matrix_to_euler(euler_to_matrix(a));
    EXPECT_NEAR(angular_error(a, b).yaw, 0.0, 1e-6);
    EXPECT_NEAR(b.pitch, a.pitch, 1e-6);
    EXPECT_NEAR(angular_error(a, b).roll, 0.0, 1e-6);
  }
}

TEST(MatrixToEuler, MatrixRoundTripOnRandomRotations) {
  std::mt19937_64 rng(14);
  for (int n = 0; n < 2000; ++n) {
    const RotationMatrix r(mtnet::testing::random_rotation(rng));
    expect_matrix_near(euler_to_matrix(matrix_to_euler(r)).matrix(), r.matrix(), 1e-9);
  }
}

TEST(RotationMatrix, RejectsInvalid) {
  EXPECT_THROW(RotationMatrix(Matrix3::Identity() * 2.0), InvalidArgument);
  EXPECT_THROW(RotationMatrix(Eigen::Vector3d(1, 1, -1).asDiagonal().toDenseMatrix()), InvalidArgument);
  Matrix3 bad = Matrix3::Identity();
  bad(0, 1) = std::nan("");
  EXPECT_THROW((RotationMatrix(bad)), InvalidArgument);
}

TEST(EulerAngles, Normalization) {
  EXPECT_DOUBLE_EQ(wrap_degrees(190), -170);
  EXPECT_DOUBLE_EQ(wrap_degrees(-180), 180);
  EXPECT_DOUBLE_EQ(wrap_degrees(540), 180);
  const EulerAngles folded = EulerAngles{10, 120, 20}.normalized();
  EXPECT_TRUE(folded.is_normalized());
  expect_matrix_near(euler_to_matrix(folded).matrix(), euler_to_matrix({10, 120, 20}).matrix(), 1e-12);
}

TEST(PoseVectors, FromMatrixColumns) {
  const PoseVectors id = pose_vectors_from_matrix(RotationMatrix());
  EXPECT_EQ(id.v1, Vector3(1, 0, 0));
  EXPECT_EQ(id.v2, Vector3(0, 1, 0));
  EXPECT_EQ(id.v3, Vector3(0, 0, 1));
  const PoseVectors y = pose_vectors_from_matrix(euler_to_matrix({90, 0, 0}));
  EXPECT_LT((y.v1 - Vector3(0, 1, 0)).norm(), 1e-15);
  EXPECT_LT((y.v2 - Vector3(-1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((y.v3 - Vector3(0, 0, 1)).norm(), 1e-15);
}

TEST(PoseVectors, InversePairIsExact) {
  std::mt19937_64 rng(15);
  for (int n = 0; n < 100; ++n) {
    const RotationMatrix r(mtnet::testing::random_rotation(rng));
    EXPECT_EQ(matrix_from_pose_vectors(pose_vectors_from_matrix(r)), r.matrix());
  }
}

TEST(PoseVectors, MatrixFromVectors) {
  PoseVectors p{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  EXPECT_EQ(matrix_from_pose_vectors(p), Matrix3::Identity());
  p = {{2, 0, 0}, {0, 2, 0}, {0, 0, 2}};
  EXPECT_EQ(matrix_from_pose_vectors(p), 2.0 * Matrix3::Identity());
  p = {{0, 1, 0}, {-1, 0, 0}, {0, 0, 1}};
  expect_matrix_near(matrix_from_pose_vectors(p), euler_to_matrix({90, 0, 0}).matrix(), 1e-15);
}

TEST(PoseVectors, FlatLayout) {
  const PoseVectors p{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto f = p.flat();
  for (int i = 0; i < 9; ++i) EXPECT_EQ(f[i], i + 1);
  const PoseVectors q = PoseVectors::from_flat(f);
  EXPECT_EQ(q.v3, p.v3);
}

TEST(Svd3, Identity) {
  const Svd3 s = svd3(Matrix3::Identity());
  EXPECT_LT((s.sigma - Vector3(1, 1, 1)).norm(), 1e-15);
  expect_matrix_near(s.u * s.v.transpose(), Matrix3::Identity(), 1e-15);
}

TEST(Svd3, Diagonal) {
  const Svd3 s = svd3(Vector3(3, 2, 1).asDiagonal().toDenseMatrix());
  EXPECT_LT((s.sigma - Vector3(3, 2, 1)).norm(), 1e-15);
  const Svd3 t = svd3(Vector3(1, 3, 2).asDiagonal().toDenseMatrix());
  EXPECT_LT((t.sigma - Vector3(3, 2, 1)).norm(), 1e-15);
}

TEST(Svd3, MatchesEigenOracleAndReconstructs) {
  std::mt19937_64 rng(16);
  for (int n = 0; n < 2000; ++n) {
    const Matrix3 m = mtnet::testing::random_gaussian(rng);
    const Svd3 s = svd3(m);
    expect_matrix_near(s.u * s.sigma.asDiagonal() * s.v.transpose(), m, 1e-9);
    expect_matrix_near(s.u.transpose() * s.u, Matrix3::Identity(), 1e-9);
    expect_matrix_near(s.v.transpose() * s.v, Matrix3::Identity(), 1e-9);
    EXPECT_GE(s.sigma[0], s.sigma[1]);
    EXPECT_GE(s.sigma[1], s.sigma[2]);
    EXPECT_GE(s.sigma[2], 0.0);
    const Vector3 ev = mtnet::testing::jacobi_eigenvalues(m.transpose() * m);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.sigma[i], std::sqrt(std::max(0.0, ev[i])), 1e-9);
  }
}

TEST(Svd3, RankDeficient) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n = 0; n < 2000; ++n) {
    const Vector3 a(g(rng), g(rng), g(rng)), b(g(rng), g(rng), g(rng)), c(g(rng), g(rng), g(rng));
    const Matrix3 rank1 = a * b.transpose();
    const Matrix3 rank2 = a * b.transpose() + c * a.transpose();
    for (const Matrix3& m : {rank1, rank2}) {
      const Svd3 s = svd3(m);
      expect_matrix_near(s.u * s.sigma.asDiagonal() * s.v.transpose(), m, 1e-9);
      expect_matrix_near(s.u.transpose() * s.u, Matrix3::Identity(), 1e-9);
      expect_matrix_near(s.v.transpose() * s.v, Matrix3::Identity(), 1e-9);
    }
  }
  const Svd3 z = svd3(Matrix3::Zero());
  EXPECT_EQ(z.sigma, Vector3::Zero());
  expect_matrix_near(z.u.transpose() * z.u, Matrix3::Identity(), 1e-12);
}

TEST(NearestRotation, Examples) {
  const RotationMatrix r = euler_to_matrix({12, -34, 56});
  expect_matrix_near(nearest_rotation(r.matrix()).matrix(), r.matrix(), 1e-12);
  expect_matrix_near(nearest_rotation(2.5 * Matrix3::Identity()).matrix(), Matrix3::Identity(), 1e-12);
  expect_matrix_near(nearest_rotation(Vector3(1, 1, -1).asDiagonal().toDenseMatrix()).matrix(),
                     Matrix3::Identity(), 1e-12);
}

TEST(NearestRotation, ReflectionBeatsSampledRotations) {
  const Matrix3 m = Vector3(1, 1, -1).asDiagonal().toDenseMatrix();
  const double best = (m - nearest_rotation(m).matrix()).norm();
  std::mt19937_64 rng(18);
  for (int n = 0; n < 100000; ++n) {
    EXPECT_LE(best, (m - mtnet::testing::random_rotation(rng)).norm() + 1e-12);
  }
}

TEST(NearestRotation, IdempotentAndProper) {
  std::mt19937_64 rng(19);
  for (int n = 0; n < 2000; ++n) {
    const Matrix3 m = mtnet::testing::random_gaussian(rng);
    const RotationMatrix r = nearest_rotation(m);
    EXPECT_NEAR(r.matrix().determinant(), 1.0, 1e-9);
    expect_matrix_near(nearest_rotation(r.matrix()).matrix(), r.matrix(), 1e-12);
  }
}

TEST(NearestRotation, ScaleInvariant) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (int n = 0; n < 500; ++n) {
    const Matrix3 m = mtnet::testing::random_gaussian(rng);
    expect_matrix_near(nearest_rotation(c(rng) * m).matrix(), nearest_rotation(m).matrix(), 1e-9);
  }
}

TEST(NearestRotation, OptimalAgainstSamples) {
  std::mt19937_64 rng(21);
  for (int n = 0; n < 50; ++n) {
    const Matrix3 m = mtnet::testing::random_gaussian(rng);
    const double best = (m - nearest_rotation(m).matrix()).norm();
    for (int q = 0; q < 2000; ++q) EXPECT_LE(best, (m - mtnet::testing::random_rotation(rng)).norm() + 1e-12);
  }
}

TEST(NearestRotation, RankOneIsDegenerate) {
  EXPECT_THROW(nearest_rotation(Vector3(1, 2, 3) * Vector3(1, 0, 0).transpose()), DegenerateInput);
  EXPECT_THROW(nearest_rotation(Matrix3::Zero()), DegenerateInput);
  EXPECT_NO_THROW(nearest_rotation(Vector3(1, 1, 0).asDiagonal().toDenseMatrix()));
}

TEST(AngularError, Examples) {
  const AngularError zero = angular_error({5, 6, 7}, {5, 6, 7});
  EXPECT_EQ(zero.yaw, 0.0);
  EXPECT_EQ(zero.pitch, 0.0);
  EXPECT_EQ(zero.roll, 0.0);
  EXPECT_NEAR(angular_error({179, 0, 0}, {-179, 0, 0}).yaw, 2.0, 1e-12);
  EXPECT_NEAR(angular_error({10, 0, 0}, {15, 0, 0}).yaw, 5.0, 1e-12);
  EXPECT_NEAR(angular_error({0, 0, 350}, {0, 0, -350}).roll, 20.0, 1e-12);
}

TEST(AngularError, Bounded) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int n = 0; n < 1000; ++n) {
    const AngularError e = angular_error({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
    for (double v : {e.yaw, e.pitch, e.roll}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 180.0);
    }
  }
}
