#pragma once

#include <random>
#include <vector>

#include "penning/penning.hpp"

namespace fixtures {

inline penning::TrapConfig trap(double omega_eff, int n, double omega_w = 0.04) {
  penning::RunConfig rc;
  rc.omega_eff = omega_eff;
  rc.n = n;
  rc.omega_w = omega_w;
  return penning::make_trap(rc);
}

inline penning::IonCrystal pure_crystal(const penning::TrapConfig& t, int restarts = 2) {
  penning::EquilibriumOptions o;
  o.restarts = restarts;
  return penning::minimize_equilibrium(t, std::vector<int>(t.n, 0), penning::seed_configuration(t.n, t), o);
}

inline penning::IonCrystal defect_crystal(const penning::TrapConfig& t, int n_defects, int restarts = 2) {
  penning::EquilibriumOptions o;
  o.restarts = restarts;
  return penning::place_defects(pure_crystal(t, restarts), n_defects, 1, o);
}

/// Random positions on a disc with a minimum separation, mixed species.
inline penning::Positions random_positions(int n, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-radius, radius);
  penning::Positions p(n, 2);
  for (int j = 0; j < n;) {
    p(j, 0) = u(rng);
    p(j, 1) = u(rng);
    bool ok = true;
    for (int k = 0; k < j; ++k) ok = ok && std::hypot(p(j, 0) - p(k, 0), p(j, 1) - p(k, 1)) > 0.3;
    if (ok) ++j;
  }
  return p;
}

}  // namespace fixtures
