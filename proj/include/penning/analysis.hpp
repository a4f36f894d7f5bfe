#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "penning/axial.hpp"

namespace penning {

struct OverlapReport {
  Eigen::MatrixXd overlap;           // (defect mode, pure mode) -> |bbar(N_d) . bbar(0)|
  Eigen::VectorXd defect_projection; // per pure mode, norm restricted to the defect sites
  std::vector<int> defect_sites;
  std::string pure_ref;
  std::string defect_ref;
};

inline OverlapReport mode_overlap(const AxialSpectrum& pure, const AxialSpectrum& defect) {
  if (pure.size() != defect.size() || pure.b_bar.rows() != defect.b_bar.rows()) {
    throw ValidationError("mode_overlap: spectra have different sizes");
  }
  OverlapReport rep;
  rep.overlap = (defect.b_bar.transpose() * pure.b_bar).cwiseAbs();
  for (std::size_t j = 0; j < defect.species_of.size(); ++j) {
    if (defect.species_of[j] != 0) rep.defect_sites.push_back(static_cast<int>(j));
  }
  rep.defect_projection = Eigen::VectorXd::Zero(pure.size());
  for (Eigen::Index v = 0; v < pure.size(); ++v) {
    double sq = 0.0;
    for (int j : rep.defect_sites) sq += pure.b_bar(j, v) * pure.b_bar(j, v);
    rep.defect_projection(v) = std::sqrt(sq);
  }
  rep.pure_ref = pure.crystal_ref;
  rep.defect_ref = defect.crystal_ref;
  return rep;
}

struct OverlapSummary {
  double diagonal_mean = 0.0;        // mean of overlap(v, v)
  double best_match_mean = 0.0;      // mean over defect modes of max overlap
  double on_diagonal_fraction = 0.0; // defect modes whose best pure match has the same index
  double off_diagonal_fraction = 0.0;
  double subdiagonal_fraction = 0.0; // best match one index away
};

inline OverlapSummary summarize_overlap(const OverlapReport& rep) {
  OverlapSummary s;
  const Eigen::Index n = rep.overlap.rows();
  int on = 0, sub = 0;
  for (Eigen::Index v = 0; v < n; ++v) {
    Eigen::Index arg = 0;
    s.best_match_mean += rep.overlap.row(v).maxCoeff(&arg);
    s.diagonal_mean += rep.overlap(v, v);
    if (arg == v) ++on;
    else if (std::abs(arg - v) == 1) ++sub;
  }
  s.diagonal_mean /= n;
  s.best_match_mean /= n;
  s.on_diagonal_fraction = static_cast<double>(on) / n;
  s.off_diagonal_fraction = 1.0 - s.on_diagonal_fraction;
  s.subdiagonal_fraction = static_cast<double>(sub) / n;
  return s;
}

struct ComPoint {
  int n_defects = 0;
  double omega_cm = 0.0;
};

/// Center-of-mass frequency along one incremental defect chain started from
/// an equilibrated pure crystal. `n_defects_list` must be ascending.
inline std::vector<ComPoint> com_sweep(const IonCrystal& pure, const std::vector<int>& n_defects_list,
                                       int defect_species, const EquilibriumOptions& opts = {}) {
  if (!std::is_sorted(n_defects_list.begin(), n_defects_list.end())) {
    throw ValidationError("com_sweep: defect counts must be ascending");
  }
  std::vector<ComPoint> out;
  IonCrystal current = pure;
  int placed = static_cast<int>(pure.defect_sites().size());
  for (int target : n_defects_list) {
    if (target > placed) {
      current = place_defects(current, target - placed, defect_species, opts);
      placed = target;
    }
    out.push_back({target, com_frequency(axial_modes(current))});
  }
  return out;
}

struct LinearCombination {
  Eigen::Index first = 0, second = 0;
  double c1 = 0.0, c2 = 0.0;
  double residual = 0.0;
};

/// Least-squares fit bbar_defect[mode] ~ c1 bbar_pure[first] + c2 bbar_pure[second].
inline LinearCombination linear_combination_check(const AxialSpectrum& pure, const AxialSpectrum& defect,
                                                  Eigen::Index defect_mode, Eigen::Index first, Eigen::Index second) {
  const Eigen::Index n = pure.size();
  if (defect_mode < 0 || defect_mode >= defect.size() || first < 0 || first >= n || second < 0 || second >= n) {
    throw ValidationError("linear_combination_check: mode index out of range");
  }
  Eigen::MatrixXd basis(pure.b_bar.rows(), 2);
  basis << pure.b_bar.col(first), pure.b_bar.col(second);
  const Eigen::VectorXd target = defect.b_bar.col(defect_mode);
  LinearCombination lc{first, second};
  if (first == second) {
    lc.c1 = basis.col(0).dot(target);
    lc.residual = (target - lc.c1 * basis.col(0)).norm();
    return lc;
  }
  const Eigen::Vector2d c = basis.colPivHouseholderQr().solve(target);
  lc.c1 = c(0);
  lc.c2 = c(1);
  lc.residual = (target - basis * c).norm();
  return lc;
}

/// Best two-pure-mode representation of a defect mode. The pure modes are
/// orthonormal, so the optimum pair carries the two largest overlaps.
inline LinearCombination best_linear_combination(const AxialSpectrum& pure, const AxialSpectrum& defect,
                                                 Eigen::Index defect_mode) {
  const Eigen::VectorXd proj = (pure.b_bar.transpose() * defect.b_bar.col(defect_mode)).cwiseAbs();
  std::vector<Eigen::Index> idx(proj.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + 2, idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return proj(a) > proj(b) || (proj(a) == proj(b) && a < b); });
  return linear_combination_check(pure, defect, defect_mode, std::min(idx[0], idx[1]), std::max(idx[0], idx[1]));
}

namespace detail {

inline Eigen::VectorXd ranks(const Eigen::VectorXd& v) {
  std::vector<Eigen::Index> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Eigen::VectorXd r(v.size());
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t e = k + 1;
    while (e < idx.size() && v(idx[e]) == v(idx[k])) ++e;
    const double avg = 0.5 * static_cast<double>(k + e - 1);
    for (std::size_t q = k; q < e; ++q) r(idx[q]) = avg;
    k = e;
  }
  return r;
}

}  // namespace detail

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman: need two equal-length samples");
  const Eigen::ArrayXd ra = detail::ranks(a).array() - (a.size() - 1) / 2.0;
  const Eigen::ArrayXd rb = detail::ranks(b).array() - (b.size() - 1) / 2.0;
  const double den = std::sqrt(ra.square().sum() * rb.square().sum());
  return den > 0.0 ? (ra * rb).sum() / den : 0.0;
}

/// |w_defect(v) - w_pure(v)| by sorted mode index.
inline Eigen::VectorXd frequency_shift(const AxialSpectrum& pure, const AxialSpectrum& defect) {
  return (defect.freqs - pure.freqs).cwiseAbs();
}

}  // namespace penning
