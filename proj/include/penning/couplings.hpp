#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "penning/axial.hpp"

namespace penning {

struct DriveParams {
  double force = 1.0;  // optical dipole force F_O
  double mu = 0.0;     // beatnote frequency
  double delta = 0.0;  // mu = omega_cm + delta
};

/// Detuning measured from the given center-of-mass frequency.
inline DriveParams drive_from_com(double omega_cm, double delta, double force = 1.0) {
  return DriveParams{force, omega_cm + delta, delta};
}

struct CouplingMatrix {
  std::vector<int> sites;  // majority-species ions carrying a spin
  Eigen::MatrixXd J;       // over sites
  Eigen::MatrixXd r;       // equilibrium distances between sites
  DriveParams params;
};

namespace detail {

inline void guard_resonance(const AxialSpectrum& s, double mu) {
  for (Eigen::Index v = 0; v < s.size(); ++v) {
    if (std::abs(mu - s.freqs(v)) < 1e-9) {
      throw ResonanceError("beatnote " + format_double(mu) + " is resonant with axial mode " + std::to_string(v) +
                               " at " + format_double(s.freqs(v)),
                           static_cast<int>(v));
    }
  }
}

// J_ij = F^2/(4 m_ave) sum_v weight_v b_i^v b_j^v over majority sites, summed
// in the same order for (i, j) and (j, i).
inline CouplingMatrix assemble(const AxialSpectrum& s, const IonCrystal& c, const DriveParams& p,
                               const Eigen::VectorXd& weight) {
  CouplingMatrix out;
  out.params = p;
  out.sites = c.sites_of(0);
  const Eigen::Index m = static_cast<Eigen::Index>(out.sites.size());
  out.J.resize(m, m);
  out.r.resize(m, m);
  const double pref = p.force * p.force / (4.0 * s.m_ave);
  for (Eigen::Index a = 0; a < m; ++a) {
    const int i = out.sites[a];
    for (Eigen::Index b = a; b < m; ++b) {
      const int j = out.sites[b];
      double sum = 0.0;
      for (Eigen::Index v = 0; v < s.size(); ++v) sum += weight(v) * s.b(i, v) * s.b(j, v);
      out.J(a, b) = out.J(b, a) = pref * sum;
      const double r = std::hypot(c.positions(i, 0) - c.positions(j, 0), c.positions(i, 1) - c.positions(j, 1));
      out.r(a, b) = out.r(b, a) = r;
    }
  }
  return out;
}

}  // namespace detail

/// Time-averaged Ising couplings for an axial spin-dependent force.
inline CouplingMatrix spin_spin_static(const AxialSpectrum& s, const IonCrystal& c, const DriveParams& p) {
  detail::guard_resonance(s, p.mu);
  const Eigen::VectorXd weight = (p.mu * p.mu - s.freqs.array().square()).inverse().matrix();
  return detail::assemble(s, c, p, weight);
}

/// Per-mode factor 1 + cos(2 mu t) - (2 mu / w) sin(w t) sin(mu t).
inline double coupling_bracket(double mu, double w, double t) {
  return 1.0 + std::cos(2.0 * mu * t) - (2.0 * mu / w) * std::sin(w * t) * std::sin(mu * t);
}

inline CouplingMatrix spin_spin_time(const AxialSpectrum& s, const IonCrystal& c, const DriveParams& p, double t) {
  detail::guard_resonance(s, p.mu);
  Eigen::VectorXd weight(s.size());
  for (Eigen::Index v = 0; v < s.size(); ++v) {
    const double w = s.freqs(v);
    weight(v) = coupling_bracket(p.mu, w, t) / (p.mu * p.mu - w * w);
  }
  return detail::assemble(s, c, p, weight);
}

struct PowerLawFit {
  double gamma = 0.0;     // J ~ prefactor * r^-gamma, clipped at 0
  double prefactor = 0.0;
  double rms_residual = 0.0;  // in log J
  int pairs = 0;
  int excluded_pairs = 0;     // r >= r_min but J <= 0
};

/// Unweighted least-squares line through (log r, log J).
inline PowerLawFit fit_power_law(std::span<const double> r, std::span<const double> j, double r_min) {
  if (r.size() != j.size()) throw ValidationError("fit_power_law: size mismatch");
  std::vector<double> lx, ly;
  PowerLawFit fit;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] < r_min) continue;
    if (!(j[k] > 0.0)) {
      ++fit.excluded_pairs;
      continue;
    }
    lx.push_back(std::log(r[k]));
    ly.push_back(std::log(j[k]));
  }
  fit.pairs = static_cast<int>(lx.size());
  if (fit.pairs < 20) {
    throw ValidationError("fit_power_law: " + std::to_string(fit.pairs) + " usable pairs, need at least 20");
  }
  const Eigen::Map<const Eigen::VectorXd> x(lx.data(), fit.pairs), y(ly.data(), fit.pairs);
  const double mx = x.mean(), my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx, dy = y.array() - my;
  const double sxx = dx.square().sum();
  if (!(sxx > 0.0)) throw ValidationError("fit_power_law: all distances coincide");
  const double slope = (dx * dy).sum() / sxx;
  const double intercept = my - slope * mx;
  fit.gamma = std::max(0.0, -slope);
  fit.prefactor = std::exp(intercept);
  fit.rms_residual = std::sqrt((dy - slope * dx).square().mean());
  return fit;
}

/// Fits the strict upper triangle of the coupling matrix.
inline PowerLawFit fit_power_law(const CouplingMatrix& c, double r_min) {
  std::vector<double> r, j;
  for (Eigen::Index a = 0; a < c.J.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < c.J.cols(); ++b) {
      r.push_back(c.r(a, b));
      j.push_back(c.J(a, b));
    }
  }
  return fit_power_law(r, j, r_min);
}

}  // namespace penning
