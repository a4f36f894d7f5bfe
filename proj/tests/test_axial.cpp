#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace penning;

namespace {

const IonCrystal& defect19() {
  static const IonCrystal c = fixtures::defect_crystal(fixtures::trap(0.21, 19), 4);
  return c;
}

}  // namespace

TEST(Axial, SingleIonStiffness) {
  const TrapConfig t = fixtures::trap(0.21, 1);
  const IonCrystal c = fixtures::pure_crystal(t);
  const Eigen::MatrixXd k = axial_stiffness(c);
  ASSERT_EQ(k.rows(), 1);
  EXPECT_EQ(k(0, 0), 1.0);
  const AxialSpectrum s = axial_modes(c);
  EXPECT_NEAR(s.freqs(0), 1.0, 1e-15);
}

TEST(Axial, RowSumsEqualTwiceTrapCurvature) {
  const Eigen::MatrixXd k = axial_stiffness(defect19());
  for (Eigen::Index j = 0; j < k.rows(); ++j) EXPECT_NEAR(k.row(j).sum(), 1.0, 1e-12);
  EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Axial, TriangleOffDiagonalIsUniform) {
  const TrapConfig t = fixtures::trap(0.21, 3, 0.0);
  const IonCrystal c = fixtures::pure_crystal(t);
  const double d = std::hypot(c.positions(0, 0) - c.positions(1, 0), c.positions(0, 1) - c.positions(1, 1));
  const Eigen::MatrixXd k = axial_stiffness(c);
  for (int j = 0; j < 3; ++j) {
    for (int l = 0; l < 3; ++l) {
      if (j != l) EXPECT_NEAR(k(j, l), 0.5 / (d * d * d), 1e-9 * k(j, l));
    }
  }
}

TEST(Axial, PureCrystalCenterOfMassIsUniformAtOmegaZ) {
  for (int n : {7, 19, 37}) {
    const IonCrystal c = fixtures::pure_crystal(fixtures::trap(0.21, n));
    const AxialSpectrum s = axial_modes(c);
    const Eigen::Index com = com_mode(s);
    EXPECT_EQ(com, n - 1);
    EXPECT_NEAR(com_frequency(s), 1.0, 1e-9);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
    EXPECT_LE((s.b_bar.col(com) - uniform).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(s.freqs.maxCoeff(), 1.0 + 1e-9);
    EXPECT_GT(s.freqs.minCoeff(), 0.0);
    EXPECT_LE((s.b - s.b_bar).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Axial, OrthonormalityAndCompletenessWithDefects) {
  const IonCrystal& c = defect19();
  const AxialSpectrum s = axial_modes(c);
  const AxialChecks k = check_axial(s, axial_stiffness(c));
  EXPECT_LE(k.orthonormality, 1e-10);
  EXPECT_LE(k.mass_orthonormality, 1e-10);
  EXPECT_LE(k.completeness, 1e-10);
  EXPECT_LE(k.eigen_residual, 1e-9);
  for (Eigen::Index v = 1; v < s.size(); ++v) EXPECT_LE(s.freqs(v - 1), s.freqs(v));
}

TEST(Axial, DisplacementVectorsScaleWithInverseRootMass) {
  const AxialSpectrum s = axial_modes(defect19());
  for (Eigen::Index j = 0; j < s.b.rows(); ++j) {
    const double f = std::sqrt(s.m_ave / s.masses(j));
    for (Eigen::Index v = 0; v < s.size(); ++v) EXPECT_NEAR(s.b(j, v), f * s.b_bar(j, v), 1e-15);
  }
}

TEST(Axial, RandomMassesSatisfyRelations) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), m(0.5, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 12;
    Eigen::MatrixXd a(n, n);
    for (auto& x : a.reshaped()) x = u(rng);
    const Eigen::MatrixXd k = a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd masses(n);
    for (auto& x : masses) x = m(rng);
    AxialSpectrum s = axial_modes(k, masses);
    const AxialChecks c = check_axial(s, k);
    EXPECT_LE(c.orthonormality, 1e-10);
    EXPECT_LE(c.mass_orthonormality, 1e-10);
    EXPECT_LE(c.completeness, 1e-10);
    EXPECT_LE(c.eigen_residual, 1e-9 * k.norm());
  }
}

TEST(Axial, SingleDefectLowersCenterOfMass) {
  const TrapConfig t = fixtures::trap(0.21, 19);
  const IonCrystal pure = fixtures::pure_crystal(t);
  const IonCrystal one = place_defects(pure, 1, 1);
  EXPECT_LT(com_frequency(axial_modes(one)), 1.0 - 1e-6);
}

TEST(Axial, HeavyIonsMoveLessInCenterOfMassMode) {
  const IonCrystal& c = defect19();
  const AxialSpectrum s = axial_modes(c);
  const Eigen::VectorXd top = s.b_bar.col(s.size() - 1);
  double heavy = 0.0, light = 0.0;
  int nh = 0, nl = 0;
  for (int j = 0; j < c.size(); ++j) {
    if (c.species_of[j] != 0) {
      heavy += std::abs(top(j));
      ++nh;
    } else {
      light += std::abs(top(j));
      ++nl;
    }
  }
  EXPECT_LT(heavy / nh, light / nl);
}

TEST(Axial, SignConventionLargestComponentPositive) {
  const AxialSpectrum s = axial_modes(defect19());
  // Symmetric crystals give exact +/- ties in magnitude; the positive one must attain the maximum.
  for (Eigen::Index v = 0; v < s.size(); ++v) {
    const double largest = s.b_bar.col(v).cwiseAbs().maxCoeff();
    EXPECT_GE(s.b_bar.col(v).maxCoeff(), largest * (1.0 - 1e-10));
  }
}

TEST(Axial, DegenerateBlocksAreCanonical) {
  // Three decoupled identical oscillators: the eigenbasis is the canonical basis.
  const Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  const AxialSpectrum s = axial_modes(k, Eigen::VectorXd::Ones(3));
  EXPECT_LE((s.b_bar - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);

  // Two different bases of the same degenerate eigenspace end up identical.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Eigen::Matrix4d a;
  for (auto& x : a.reshaped()) x = g(rng);
  const Eigen::Matrix4d q = Eigen::HouseholderQR<Eigen::Matrix4d>(a).householderQ();
  Eigen::Matrix4d r = Eigen::Matrix4d::Identity();
  r.block<3, 3>(0, 0) = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Eigen::Vector4d lambda(1.0, 1.0, 1.0, 4.0);
  const Eigen::MatrixXd k1 = q * lambda.asDiagonal() * q.transpose();
  const Eigen::MatrixXd k2 = (q * r) * lambda.asDiagonal() * (q * r).transpose();
  const AxialSpectrum s1 = axial_modes(k1, Eigen::VectorXd::Ones(4));
  const AxialSpectrum s2 = axial_modes(k2, Eigen::VectorXd::Ones(4));
  EXPECT_LE((s1.b_bar - s2.b_bar).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Axial, UnstableStiffnessRejected) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  k(1, 1) = -0.1;
  EXPECT_THROW(axial_modes(k, Eigen::VectorXd::Ones(3)), InstabilityError);
}

TEST(Axial, RepeatedSolveIsBitwiseIdentical) {
  const AxialSpectrum a = axial_modes(defect19());
  const AxialSpectrum b = axial_modes(defect19());
  EXPECT_EQ((a.b_bar - b.b_bar).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.freqs - b.freqs).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.crystal_ref, crystal_hash(defect19()));
}
