#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "penning/error.hpp"
#include "penning/format.hpp"
#include "penning/hash.hpp"
#include "penning/minimizer.hpp"
#include "penning/parallel.hpp"
#include "penning/units.hpp"

namespace penning {

/// Ion species in internal units. `cyclotron` is eB_z/(m omega_z).
struct Species {
  std::string name;
  double mass = 1.0;
  double cyclotron = 0.0;
};

/// Builds a species whose cyclotron frequency follows from the majority one by
/// inverse-mass scaling (same charge, same field).
inline Species make_species(std::string name, double mass, const Species& majority) {
  if (!(mass > 0.0)) throw ValidationError("species " + name + ": mass must be positive");
  return Species{std::move(name), mass, majority.cyclotron * majority.mass / mass};
}

/// e * B_eff[j, omega] in internal units: m_j (omega_c,j - 2 omega).
inline double effective_B(const Species& s, double omega) { return s.mass * (s.cyclotron - 2.0 * omega); }

struct TrapConfig {
  UnitSystem units;
  std::vector<Species> species;  // index 0 is the majority (spin-carrying) species
  double omega = 0.0;            // rotation frequency
  double omega_w = 0.0;          // rotating-wall strength, e V_W = m_ref omega_w^2 / 2
  int n = 0;

  const Species& majority() const { return species.front(); }
  /// e B_z in internal units.
  double charge_field() const { return majority().mass * majority().cyclotron; }
  double wall_strength() const { return 0.5 * omega_w * omega_w; }
  /// Coefficient c_j of rho^2/2 in the single-ion potential: e B_z omega - m_j omega^2 - e V0.
  double radial_curvature(const Species& s) const {
    return charge_field() * omega - s.mass * omega * omega - internal::trap_curvature;
  }
  /// omega_eff^2 of the majority species.
  double omega_eff_squared() const { return radial_curvature(majority()) / majority().mass; }

  void validate() const {
    if (species.empty()) throw ValidationError("trap: species table is empty");
    if (n < 1) throw ValidationError("trap: ion count must be at least 1");
    if (!(omega_w >= 0.0)) throw ValidationError("trap: wall strength must be non-negative");
    const double weff2 = omega_eff_squared();
    if (!(weff2 > 0.0)) {
      throw ValidationError("trap: unstable in-plane confinement, omega_eff^2 = " + format_double(weff2));
    }
  }
};

/// N x 2 array of (x, y) in units of ell0.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Packs positions as [x_0..x_{N-1}, y_0..y_{N-1}], the ordering used by every 2N matrix.
inline Eigen::VectorXd flatten(const Positions& p) {
  Eigen::VectorXd q(2 * p.rows());
  q << p.col(0), p.col(1);
  return q;
}

inline Positions unflatten(const Eigen::VectorXd& q) {
  const Eigen::Index n = q.size() / 2;
  Positions p(n, 2);
  p.col(0) = q.head(n);
  p.col(1) = q.tail(n);
  return p;
}

/// Rotating-frame effective potential of a planar crystal (z = 0).
class EffectivePotential {
 public:
  EffectivePotential(const TrapConfig& config, std::span<const int> species_of)
      : n_(static_cast<Eigen::Index>(species_of.size())), wall_(config.wall_strength()), curvature_(n_) {
    for (Eigen::Index j = 0; j < n_; ++j) {
      const int s = species_of[j];
      if (s < 0 || s >= static_cast<int>(config.species.size())) {
        throw ValidationError("species index out of range at ion " + std::to_string(j));
      }
      curvature_(j) = config.radial_curvature(config.species[s]);
    }
  }

  Eigen::Index size() const { return n_; }

  double value(const Eigen::VectorXd& q) const {
    const auto x = q.head(n_), y = q.tail(n_);
    double e = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      e += 0.5 * curvature_(j) * (x(j) * x(j) + y(j) * y(j)) + wall_ * (x(j) * x(j) - y(j) * y(j));
    }
    double coulomb = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      for (Eigen::Index k = j + 1; k < n_; ++k) coulomb += 1.0 / distance(x, y, j, k);
    }
    return e + internal::coulomb * coulomb;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const {
    const auto x = q.head(n_), y = q.tail(n_);
    Eigen::VectorXd g(2 * n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      g(j) = (curvature_(j) + 2.0 * wall_) * x(j);
      g(n_ + j) = (curvature_(j) - 2.0 * wall_) * y(j);
    }
    for (Eigen::Index j = 0; j < n_; ++j) {
      for (Eigen::Index k = j + 1; k < n_; ++k) {
        const double r = distance(x, y, j, k);
        const double c = internal::coulomb / (r * r * r);
        const double fx = c * (x(j) - x(k)), fy = c * (y(j) - y(k));
        g(j) -= fx;
        g(k) += fx;
        g(n_ + j) -= fy;
        g(n_ + k) += fy;
      }
    }
    return g;
  }

  /// Planar stiffness matrix K = [[Kxx, Kxy], [Kyx, Kyy]].
  Eigen::MatrixXd hessian(const Eigen::VectorXd& q) const {
    const auto x = q.head(n_), y = q.tail(n_);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n_, 2 * n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      h(j, j) = curvature_(j) + 2.0 * wall_;
      h(n_ + j, n_ + j) = curvature_(j) - 2.0 * wall_;
    }
    for (Eigen::Index j = 0; j < n_; ++j) {
      for (Eigen::Index k = j + 1; k < n_; ++k) {
        const double dx = x(j) - x(k), dy = y(j) - y(k);
        const double r2 = dx * dx + dy * dy;
        const double r = std::sqrt(r2);
        if (r < kMinSeparation) throw_coincident(j, k);
        const double c = internal::coulomb / (r2 * r2 * r);
        const double kxx = c * (r2 - 3.0 * dx * dx);
        const double kyy = c * (r2 - 3.0 * dy * dy);
        const double kxy = -3.0 * c * dx * dy;
        add_pair(h, j, k, kxx, kyy, kxy);
      }
    }
    return h;
  }

 private:
  static constexpr double kMinSeparation = 1e-12;

  [[noreturn]] static void throw_coincident(Eigen::Index j, Eigen::Index k) {
    throw SingularConfigurationError("ions " + std::to_string(j) + " and " + std::to_string(k) + " coincide");
  }

  template <class V>
  static double distance(const V& x, const V& y, Eigen::Index j, Eigen::Index k) {
    const double r = std::hypot(x(j) - x(k), y(j) - y(k));
    if (r < kMinSeparation) throw_coincident(j, k);
    return r;
  }

  void add_pair(Eigen::MatrixXd& h, Eigen::Index j, Eigen::Index k, double kxx, double kyy, double kxy) const {
    const Eigen::Index xj = j, xk = k, yj = n_ + j, yk = n_ + k;
    h(xj, xk) += kxx; h(xk, xj) += kxx;
    h(yj, yk) += kyy; h(yk, yj) += kyy;
    h(xj, yk) += kxy; h(yk, xj) += kxy;
    h(xk, yj) += kxy; h(yj, xk) += kxy;
    h(xj, xj) -= kxx; h(xk, xk) -= kxx;
    h(yj, yj) -= kyy; h(yk, yk) -= kyy;
    h(xj, yj) -= kxy; h(yj, xj) -= kxy;
    h(xk, yk) -= kxy; h(yk, xk) -= kxy;
  }

  Eigen::Index n_;
  double wall_;
  Eigen::VectorXd curvature_;
};

inline double potential_energy(const TrapConfig& config, std::span<const int> species_of, const Positions& p) {
  return EffectivePotential(config, species_of).value(flatten(p));
}

inline Eigen::VectorXd potential_gradient(const TrapConfig& config, std::span<const int> species_of,
                                          const Positions& p) {
  return EffectivePotential(config, species_of).gradient(flatten(p));
}

inline Eigen::MatrixXd planar_hessian(const TrapConfig& config, std::span<const int> species_of,
                                      const Positions& p) {
  return EffectivePotential(config, species_of).hessian(flatten(p));
}

/// Radius of a planar crystal of N majority ions in an isotropic harmonic
/// well, from the continuum disk with density ~ sqrt(1 - rho^2/R^2).
inline double expected_crystal_radius(int n, const TrapConfig& config) {
  const double k = config.radial_curvature(config.majority());
  return std::cbrt(3.0 * std::numbers::pi * n * internal::coulomb / (4.0 * k));
}

/// Concentric rings: ring k holds max(1, 6k) ions at radius k * d; a trailing
/// partial ring is filled uniformly; d places the outermost ring at the
/// expected crystal radius.
inline Positions seed_configuration(int n, const TrapConfig& config) {
  if (n < 1) throw ValidationError("seed_configuration: N must be at least 1");
  std::vector<int> ring_sizes{1};
  int placed = 1;
  for (int k = 1; placed < n; ++k) {
    const int count = std::min(6 * k, n - placed);
    ring_sizes.push_back(count);
    placed += count;
  }
  Positions p = Positions::Zero(n, 2);
  const int outer = static_cast<int>(ring_sizes.size()) - 1;
  if (outer == 0) return p;
  const double spacing = expected_crystal_radius(n, config) / outer;
  int idx = 1;
  for (int k = 1; k <= outer; ++k) {
    for (int i = 0; i < ring_sizes[k]; ++i, ++idx) {
      const double phi = 2.0 * std::numbers::pi * i / ring_sizes[k];
      p(idx, 0) = k * spacing * std::cos(phi);
      p(idx, 1) = k * spacing * std::sin(phi);
    }
  }
  return p;
}

/// One farthest-ion substitution performed by place_defects.
struct Substitution {
  int ion = -1;
  int species = 0;
  double rho = 0.0;
  double max_majority_rho = 0.0;
};

struct IonCrystal {
  TrapConfig config;
  std::vector<int> species_of;
  Positions positions;
  double energy = 0.0;
  double grad_norm = 0.0;
  std::vector<Substitution> substitutions;

  int size() const { return static_cast<int>(species_of.size()); }
  double mass(int j) const { return config.species[species_of[j]].mass; }
  Eigen::VectorXd masses() const {
    Eigen::VectorXd m(size());
    for (int j = 0; j < size(); ++j) m(j) = mass(j);
    return m;
  }
  double rho(int j) const { return std::hypot(positions(j, 0), positions(j, 1)); }
  std::vector<int> sites_of(int species) const {
    std::vector<int> out;
    for (int j = 0; j < size(); ++j) {
      if (species_of[j] == species) out.push_back(j);
    }
    return out;
  }
  std::vector<int> defect_sites() const {
    std::vector<int> out;
    for (int j = 0; j < size(); ++j) {
      if (species_of[j] != 0) out.push_back(j);
    }
    return out;
  }
};

/// SHA-256 over the canonical text of species assignments and positions.
inline std::string crystal_hash(const IonCrystal& c) {
  std::string text;
  for (int j = 0; j < c.size(); ++j) {
    text += std::to_string(c.species_of[j]);
    text += ';';
    text += format_double(c.positions(j, 0));
    text += ';';
    text += format_double(c.positions(j, 1));
    text += '\n';
  }
  return sha256_hex(text);
}

struct EquilibriumOptions {
  MinimizerOptions minimizer{};
  int restarts = 8;
  std::uint64_t seed = 0;
  double perturbation = 0.05;   // ell0
  double hessian_floor = -1e-8; // smallest admissible planar Hessian eigenvalue
  unsigned threads = 1;
};

namespace detail {

struct LocalMinimum {
  MinimizerResult result;
  double min_curvature = 0.0;
};

inline double smallest_eigenvalue(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

// Throws ConvergenceError / SaddlePointError when the run does not end at a local minimum.
inline LocalMinimum relax(const EffectivePotential& pot, const Eigen::VectorXd& start, const EquilibriumOptions& opts) {
  LocalMinimum out{minimize(pot, start, opts.minimizer), 0.0};
  if (!out.result.converged) {
    throw ConvergenceError("equilibrium: gradient norm " + format_double(out.result.grad_norm) + " after " +
                           std::to_string(out.result.iterations) + " iterations");
  }
  out.min_curvature = smallest_eigenvalue(pot.hessian(out.result.x));
  if (out.min_curvature < opts.hessian_floor) {
    throw SaddlePointError("equilibrium: stationary point has Hessian eigenvalue " +
                           format_double(out.min_curvature));
  }
  return out;
}

inline IonCrystal make_crystal(const TrapConfig& config, std::vector<int> species_of, const MinimizerResult& r) {
  IonCrystal c;
  c.config = config;
  c.species_of = std::move(species_of);
  c.positions = unflatten(r.x);
  c.energy = r.value;
  c.grad_norm = r.grad_norm;
  return c;
}

}  // namespace detail

/// Relaxes `seed` with `restarts` independently perturbed starts and keeps
/// the lowest-energy local minimum (ties go to the lower restart index).
inline IonCrystal minimize_equilibrium(const TrapConfig& config, const std::vector<int>& species_of,
                                       const Positions& seed, const EquilibriumOptions& opts = {}) {
  config.validate();
  if (static_cast<int>(species_of.size()) != seed.rows()) {
    throw ValidationError("minimize_equilibrium: species/positions size mismatch");
  }
  const EffectivePotential pot(config, species_of);
  const int restarts = std::max(1, opts.restarts);
  std::vector<std::optional<detail::LocalMinimum>> runs(restarts);
  std::vector<std::string> failures(restarts);
  std::vector<bool> saddle(restarts, false);

  parallel_for(restarts, opts.threads, [&](std::size_t r) {
    std::seed_seq sseq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                       static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(sseq);
    std::uniform_real_distribution<double> jitter(-opts.perturbation, opts.perturbation);
    Eigen::VectorXd start = flatten(seed);
    for (Eigen::Index i = 0; i < start.size(); ++i) start(i) += jitter(rng);
    try {
      runs[r] = detail::relax(pot, start, opts);
    } catch (const SaddlePointError& e) {
      saddle[r] = true;
      failures[r] = e.what();
    } catch (const NumericalError& e) {
      failures[r] = e.what();
    }
  });

  int best = -1;
  for (int r = 0; r < restarts; ++r) {
    if (runs[r] && (best < 0 || runs[r]->result.value < runs[best]->result.value)) best = r;
  }
  if (best < 0) {
    for (int r = 0; r < restarts; ++r) {
      if (saddle[r]) throw SaddlePointError(failures[r]);
    }
    throw ConvergenceError(failures.front());
  }
  return detail::make_crystal(config, species_of, runs[best]->result);
}

/// Index of the majority ion farthest from the trap axis (lowest index on ties).
inline int farthest_majority_ion(const IonCrystal& c) {
  int arg = -1;
  double best = -1.0;
  for (int j = 0; j < c.size(); ++j) {
    if (c.species_of[j] != 0) continue;
    const double r = c.rho(j);
    if (arg < 0 || r > best * (1.0 + 1e-12)) {
      best = r;
      arg = j;
    }
  }
  return arg;
}

/// Turns the farthest majority ion into a defect and re-relaxes from the
/// current positions, `n_defects` times.
inline IonCrystal place_defects(const IonCrystal& crystal, int n_defects, int defect_species,
                                const EquilibriumOptions& opts = {}) {
  const auto& table = crystal.config.species;
  if (defect_species <= 0 || defect_species >= static_cast<int>(table.size())) {
    throw ValidationError("place_defects: defect species index out of range");
  }
  if (table[defect_species].mass < table.front().mass) {
    throw ValidationError("place_defects: only heavy defects are placed by farthest-ion substitution");
  }
  if (n_defects < 0 || n_defects > static_cast<int>(crystal.sites_of(0).size())) {
    throw ValidationError("place_defects: not enough majority ions for " + std::to_string(n_defects) + " defects");
  }
  IonCrystal current = crystal;
  for (int step = 0; step < n_defects; ++step) {
    const int ion = farthest_majority_ion(current);
    const double rho = current.rho(ion);
    double max_rho = 0.0;
    for (int j : current.sites_of(0)) max_rho = std::max(max_rho, current.rho(j));
    current.species_of[ion] = defect_species;
    const EffectivePotential pot(current.config, current.species_of);
    try {
      const auto relaxed = detail::relax(pot, flatten(current.positions), opts);
      auto subs = std::move(current.substitutions);
      current = detail::make_crystal(current.config, current.species_of, relaxed.result);
      current.substitutions = std::move(subs);
    } catch (const NumericalError& e) {
      throw DefectPlacementError("place_defects: step " + std::to_string(step) + ": " + e.what(), step);
    }
    current.substitutions.push_back({ion, defect_species, rho, max_rho});
  }
  return current;
}

}  // namespace penning
