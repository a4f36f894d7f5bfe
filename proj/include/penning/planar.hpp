#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "penning/crystal.hpp"
#include "penning/linalg.hpp"

namespace penning {

enum class Branch { magnetron, cyclotron };

struct BranchLabel {
  Branch branch = Branch::magnetron;
  int species = -1;  // nearest species by cyclotron frequency; -1 for magnetron modes
};

inline const char* to_string(Branch b) { return b == Branch::cyclotron ? "cyclotron" : "magnetron"; }

struct PlanarMatrices {
  Eigen::MatrixXd stiffness;  // K, 2N x 2N symmetric
  Eigen::MatrixXd gyro;       // T, 2N x 2N antisymmetric
};

struct PlanarSpectrum {
  Eigen::VectorXd freqs;          // 2N, ascending, nonnegative
  Eigen::MatrixXcd alphas;        // column l: alpha_l in the planar bbar basis
  Eigen::VectorXd omega0;         // zero-field frequencies, ascending
  Eigen::MatrixXd b_bar_planar;   // eigenvectors of Kbar, one per column
  Eigen::MatrixXd t_bar_bar;      // Bbar^T Tbar Bbar
  std::vector<BranchLabel> branch_of;
  std::vector<int> species_of;
  double m_ave = 1.0;
  double hbar_tilde = 1.0;
  int zero_modes = 0;             // leading zero frequencies (rotational mode, wall off)

  Eigen::Index size() const { return freqs.size(); }
};

/// K from the planar Hessian of the effective potential; T_{ia,jb} = -e B_eff[j] delta_ij eps_ab.
inline PlanarMatrices planar_stiffness(const IonCrystal& c) {
  const int n = c.size();
  PlanarMatrices m{planar_hessian(c.config, c.species_of, c.positions), Eigen::MatrixXd::Zero(2 * n, 2 * n)};
  for (int j = 0; j < n; ++j) {
    const double eb = effective_B(c.config.species[c.species_of[j]], c.config.omega);
    m.gyro(j, n + j) = -eb;
    m.gyro(n + j, j) = eb;
  }
  return m;
}

struct PlanarOptions {
  bool allow_zero_mode = false;  // true when the rotating wall is off
  double zero_tol = 1e-8;
};

/// Solves (m_ave w^2 + i w Tbb - Kbb) alpha = 0 through the 4N Hermitian
/// linearization in the eigenbasis of Kbar. Each alpha is scaled so that
/// sum_l w_l (alpha^v* alpha^v' + c.c.) = hbar m_ave delta_vv'.
inline PlanarSpectrum planar_modes(const Eigen::MatrixXd& k, const Eigen::MatrixXd& t, const Eigen::VectorXd& masses,
                                   double hbar_tilde, const PlanarOptions& opts = {}) {
  const Eigen::Index n = masses.size();
  const Eigen::Index d = 2 * n;
  if (k.rows() != d || t.rows() != d) throw ValidationError("planar_modes: matrix size mismatch");
  if (!(hbar_tilde > 0.0)) throw ValidationError("planar_modes: hbar_tilde must be positive");

  PlanarSpectrum s;
  s.m_ave = masses.mean();
  s.hbar_tilde = hbar_tilde;
  Eigen::VectorXd scale(d);
  scale << masses.cwiseSqrt().cwiseInverse(), masses.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd kbar = s.m_ave * scale.asDiagonal() * k * scale.asDiagonal();
  const Eigen::MatrixXd tbar = s.m_ave * scale.asDiagonal() * t * scale.asDiagonal();

  const SymmetricEigen eig = symmetric_eigen(0.5 * (kbar + kbar.transpose()));
  const double floor = -1e-12 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  s.omega0.resize(d);
  for (Eigen::Index v = 0; v < d; ++v) {
    if (eig.values(v) < floor) {
      throw InstabilityError("planar stiffness eigenvalue " + std::to_string(v) + " is negative: " +
                             format_double(eig.values(v)));
    }
    s.omega0(v) = std::sqrt(std::max(eig.values(v), 0.0) / s.m_ave);
  }
  s.b_bar_planar = eig.vectors;
  const Eigen::MatrixXd tbb = eig.vectors.transpose() * tbar * eig.vectors;
  s.t_bar_bar = 0.5 * (tbb - tbb.transpose());

  using cd = std::complex<double>;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * d, 2 * d);
  h.topLeftCorner(d, d) = cd(0.0, -1.0 / s.m_ave) * s.t_bar_bar.cast<cd>();
  for (Eigen::Index v = 0; v < d; ++v) {
    h(v, d + v) = s.omega0(v);
    h(d + v, v) = s.omega0(v);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  const Eigen::VectorXd& ev = solver.eigenvalues();

  std::vector<Eigen::Index> positive;
  int zeros = 0;
  for (Eigen::Index i = 0; i < 2 * d; ++i) {
    if (ev(i) > opts.zero_tol) positive.push_back(i);
    else if (ev(i) >= -opts.zero_tol) ++zeros;
  }
  if (zeros > 0 && !opts.allow_zero_mode) {
    throw DegenerateModeError("planar spectrum has " + std::to_string(zeros) + " zero eigenvalues with the wall on");
  }
  const Eigen::Index n_pos = static_cast<Eigen::Index>(positive.size());
  if (n_pos > d || d - n_pos > zeros) {
    throw NumericalError("planar linearization returned " + std::to_string(n_pos) + " positive modes for " +
                         std::to_string(d) + " coordinates");
  }
  s.zero_modes = static_cast<int>(d - n_pos);
  s.freqs = Eigen::VectorXd::Zero(d);
  s.alphas = Eigen::MatrixXcd::Zero(d, d);
  for (Eigen::Index l = 0; l < n_pos; ++l) {
    const Eigen::Index col = s.zero_modes + l;
    const double w = ev(positive[l]);
    Eigen::VectorXcd a = std::sqrt(hbar_tilde * s.m_ave / w) * solver.eigenvectors().col(positive[l]).head(d);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index v = 0; v < d; ++v) {
      if (std::abs(a(v)) > best * (1.0 + 1e-12)) {
        best = std::abs(a(v));
        arg = v;
      }
    }
    a *= std::conj(a(arg)) / std::abs(a(arg));
    s.freqs(col) = w;
    s.alphas.col(col) = a;
  }
  return s;
}

/// Cyclotron above half the cyclotron frequency of the heaviest species;
/// cyclotron modes carry the species whose cyclotron frequency is nearest.
inline std::vector<BranchLabel> classify_branches(const PlanarSpectrum& s, const TrapConfig& config) {
  double heaviest_cyclotron = config.majority().cyclotron;
  double heaviest_mass = config.majority().mass;
  for (const auto& sp : config.species) {
    if (sp.mass > heaviest_mass) {
      heaviest_mass = sp.mass;
      heaviest_cyclotron = sp.cyclotron;
    }
  }
  std::vector<BranchLabel> labels(s.size());
  for (Eigen::Index l = 0; l < s.size(); ++l) {
    const double w = s.freqs(l);
    if (w <= 0.5 * heaviest_cyclotron) continue;
    labels[l].branch = Branch::cyclotron;
    double best = 0.0;
    for (int sp = 0; sp < static_cast<int>(config.species.size()); ++sp) {
      const double dist = std::abs(w - config.species[sp].cyclotron);
      if (labels[l].species < 0 || dist < best) {
        best = dist;
        labels[l].species = sp;
      }
    }
  }
  return labels;
}

inline PlanarSpectrum planar_modes(const IonCrystal& c) {
  const PlanarMatrices m = planar_stiffness(c);
  PlanarOptions opts;
  opts.allow_zero_mode = c.config.omega_w == 0.0;
  PlanarSpectrum s = planar_modes(m.stiffness, m.gyro, c.masses(), c.config.units.hbar_tilde, opts);
  s.species_of = c.species_of;
  s.branch_of = classify_branches(s, c.config);
  return s;
}

/// Fraction of a mode's mass-weighted site-space weight carried by each species.
inline std::vector<double> species_participation(const PlanarSpectrum& s, Eigen::Index mode, int n_species) {
  const Eigen::Index n = s.size() / 2;
  const Eigen::VectorXcd q = s.b_bar_planar.cast<std::complex<double>>() * s.alphas.col(mode);
  std::vector<double> w(n_species, 0.0);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double site = std::norm(q(j)) + std::norm(q(n + j));
    w[s.species_of.at(j)] += site;
    total += site;
  }
  if (total > 0.0) {
    for (double& x : w) x /= total;
  }
  return w;
}

struct PlanarChecks {
  double qep_residual = 0.0;      // relative, worst mode
  double pairing_residual = 0.0;  // (-w, alpha*) in the same equation
  double relation_weighted = 0.0; // sum w (a* a' + c.c.) = hbar m delta
  double relation_antisym = 0.0;  // sum (a* a' - c.c.) = 0, as the off-diagonal completeness block
  double relation_inverse = 0.0;  // sum (a* a' + c.c.)/w = hbar m delta / w0^2
  double relation_orthogonality = 0.0;  // diagnostic: sum_v (w w' + w0^2) a_l* a_l' = hbar m w delta_ll'
};

inline PlanarChecks check_planar(const PlanarSpectrum& s) {
  using cd = std::complex<double>;
  PlanarChecks c;
  const Eigen::Index d = s.size();
  const Eigen::Index z = s.zero_modes;
  const Eigen::Index p = d - z;
  const Eigen::MatrixXcd a = s.alphas.rightCols(p);
  const Eigen::VectorXd w = s.freqs.tail(p);
  const Eigen::MatrixXcd tbb = s.t_bar_bar.cast<cd>();
  const Eigen::VectorXd kbb = s.m_ave * s.omega0.cwiseAbs2();
  const double tnorm = s.t_bar_bar.cwiseAbs().rowwise().sum().maxCoeff();
  const double knorm = kbb.cwiseAbs().maxCoeff();

  for (Eigen::Index l = 0; l < p; ++l) {
    const double wl = w(l);
    const double scale = a.col(l).norm() * (s.m_ave * wl * wl + wl * tnorm + knorm);
    for (int sign : {+1, -1}) {
      const double ww = sign * wl;
      const Eigen::VectorXcd al = sign > 0 ? Eigen::VectorXcd(a.col(l)) : Eigen::VectorXcd(a.col(l).conjugate());
      const Eigen::VectorXcd r =
          (s.m_ave * ww * ww) * al + cd(0.0, ww) * (tbb * al) - kbb.cast<cd>().cwiseProduct(al);
      const double rel = r.norm() / scale;
      if (sign > 0) c.qep_residual = std::max(c.qep_residual, rel);
      else c.pairing_residual = std::max(c.pairing_residual, rel);
    }
  }

  const double hm = s.hbar_tilde * s.m_ave;
  if (z > 0) {
    // The rotational zero mode takes weight out of every completeness relation.
    c.relation_weighted = c.relation_antisym = c.relation_inverse = std::nan("");
  } else {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXcd aw = a * w.asDiagonal();
    const Eigen::MatrixXd rel2 = 2.0 * (aw * a.adjoint()).real();
    c.relation_weighted = (rel2 / hm - id).cwiseAbs().maxCoeff();
    const Eigen::MatrixXd rel3 = 2.0 * (a * a.adjoint()).imag();
    c.relation_antisym = (rel3 * s.omega0.asDiagonal()).cwiseAbs().maxCoeff() / hm;
    const Eigen::MatrixXd rel4 = 2.0 * (a * w.cwiseInverse().asDiagonal() * a.adjoint()).real();
    c.relation_inverse = (s.omega0.asDiagonal() * rel4 * s.omega0.asDiagonal() / hm - id).cwiseAbs().maxCoeff();
  }

  const Eigen::MatrixXcd g = w.asDiagonal() * (a.adjoint() * a) * w.asDiagonal() +
                             a.adjoint() * s.omega0.cwiseAbs2().asDiagonal() * a;
  const Eigen::VectorXd inv_sqrt = (hm * w).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXcd gn = inv_sqrt.asDiagonal() * g * inv_sqrt.asDiagonal();
  c.relation_orthogonality = (gn - Eigen::MatrixXcd::Identity(p, p)).cwiseAbs().maxCoeff();
  return c;
}

}  // namespace penning
