#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "penning/crystal.hpp"
#include "penning/linalg.hpp"

namespace penning {

struct AxialSpectrum {
  Eigen::VectorXd freqs;   // ascending, units of omega_z
  Eigen::MatrixXd b_bar;   // orthonormal eigenvectors of the mass-scaled stiffness, one mode per column
  Eigen::MatrixXd b;       // displacement eigenvectors, b_j = b_bar_j sqrt(m_ave / m_j)
  Eigen::VectorXd masses;
  std::vector<int> species_of;
  double m_ave = 1.0;
  std::string crystal_ref;

  Eigen::Index size() const { return freqs.size(); }
};

/// K^zz: diagonal 2 eV0 - sum_l k_e e^2 / R_lj^3, off-diagonal k_e e^2 / R_jk^3.
inline Eigen::MatrixXd axial_stiffness(const IonCrystal& c) {
  const int n = c.size();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) k(j, j) = 2.0 * internal::trap_curvature;
  for (int j = 0; j < n; ++j) {
    for (int l = j + 1; l < n; ++l) {
      const double r = std::hypot(c.positions(j, 0) - c.positions(l, 0), c.positions(j, 1) - c.positions(l, 1));
      const double coupling = internal::coulomb / (r * r * r);
      k(j, l) = coupling;
      k(l, j) = coupling;
      k(j, j) -= coupling;
      k(l, l) -= coupling;
    }
  }
  return k;
}

/// Solves (m_ave w^2 - Kbar) bbar = 0 with Kbar = m_ave M^-1/2 K M^-1/2.
inline AxialSpectrum axial_modes(const Eigen::MatrixXd& kzz, const Eigen::VectorXd& masses) {
  const Eigen::Index n = masses.size();
  AxialSpectrum s;
  s.masses = masses;
  s.m_ave = masses.mean();
  const Eigen::VectorXd inv_sqrt = masses.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd kbar = s.m_ave * inv_sqrt.asDiagonal() * kzz * inv_sqrt.asDiagonal();
  const Eigen::MatrixXd sym = 0.5 * (kbar + kbar.transpose());
  const SymmetricEigen eig = symmetric_eigen(sym);

  s.freqs.resize(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const double lambda = eig.values(v);
    if (lambda < -1e-12 * s.m_ave) {
      throw InstabilityError("axial mode " + std::to_string(v) + " is unstable, lambda = " + format_double(lambda));
    }
    s.freqs(v) = std::sqrt(std::max(lambda, 0.0) / s.m_ave);
  }
  s.b_bar = eig.vectors;
  s.b = (std::sqrt(s.m_ave) * inv_sqrt).asDiagonal() * s.b_bar;
  return s;
}

inline AxialSpectrum axial_modes(const IonCrystal& c) {
  AxialSpectrum s = axial_modes(axial_stiffness(c), c.masses());
  s.species_of = c.species_of;
  s.crystal_ref = crystal_hash(c);
  return s;
}

/// Mode with the largest overlap |sum_j bbar_j| / sqrt(N) with uniform motion.
inline Eigen::Index com_mode(const AxialSpectrum& s) {
  const Eigen::RowVectorXd overlap = s.b_bar.colwise().sum().cwiseAbs();
  Eigen::Index arg = 0;
  overlap.maxCoeff(&arg);
  return arg;
}

inline double com_frequency(const AxialSpectrum& s) { return s.freqs(com_mode(s)); }

struct AxialChecks {
  double orthonormality = 0.0;  // |bbar^T bbar - I|_max
  double mass_orthonormality = 0.0;  // |sum_j (m_j/m_ave) b_j b_j' - delta|_max
  double completeness = 0.0;    // |sum_v b_j b_k - (m_ave/m_j) delta_jk|_max
  double eigen_residual = 0.0;  // |Kbar bbar - m_ave w^2 bbar|_inf / m_ave
};

inline AxialChecks check_axial(const AxialSpectrum& s, const Eigen::MatrixXd& kzz) {
  const Eigen::Index n = s.size();
  AxialChecks c;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  c.orthonormality = (s.b_bar.transpose() * s.b_bar - id).cwiseAbs().maxCoeff();
  const Eigen::VectorXd w = s.masses / s.m_ave;
  c.mass_orthonormality = (s.b.transpose() * w.asDiagonal() * s.b - id).cwiseAbs().maxCoeff();
  const Eigen::MatrixXd expect = w.cwiseInverse().asDiagonal();
  c.completeness = (s.b * s.b.transpose() - expect).cwiseAbs().maxCoeff();
  const Eigen::VectorXd inv_sqrt = s.masses.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd kbar = s.m_ave * inv_sqrt.asDiagonal() * kzz * inv_sqrt.asDiagonal();
  const Eigen::MatrixXd lhs = kbar * s.b_bar;
  const Eigen::MatrixXd rhs = s.b_bar * (s.m_ave * s.freqs.cwiseAbs2()).asDiagonal();
  c.eigen_residual = (lhs - rhs).cwiseAbs().maxCoeff() / s.m_ave;
  return c;
}

}  // namespace penning
