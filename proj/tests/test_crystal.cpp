#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "fixtures.hpp"

using namespace penning;

namespace {

std::vector<int> random_species(int n, std::mt19937_64& rng) {
  std::bernoulli_distribution heavy(0.3);
  std::vector<int> s(n);
  for (int& x : s) x = heavy(rng) ? 1 : 0;
  return s;
}

}  // namespace

TEST(Crystal, EffectiveFieldVanishesAtHalfCyclotron) {
  const TrapConfig t = fixtures::trap(0.21, 1);
  const Species& be = t.majority();
  EXPECT_EQ(effective_B(be, 0.5 * be.cyclotron), 0.0);
  EXPECT_NEAR(effective_B(be, t.omega), be.cyclotron - 2.0 * t.omega, 1e-15);
  const Species& beh = t.species[1];
  EXPECT_NEAR(effective_B(beh, t.omega), beh.mass * (beh.cyclotron - 2.0 * t.omega), 1e-15);
}

TEST(Crystal, SpeciesCyclotronScalesInverselyWithMass) {
  const TrapConfig t = fixtures::trap(0.21, 1);
  EXPECT_NEAR(t.species[1].cyclotron * t.species[1].mass, t.majority().cyclotron * t.majority().mass, 1e-14);
  EXPECT_THROW(make_species("x", 0.0, t.majority()), ValidationError);
}

TEST(Crystal, OmegaEffMatchesDefinition) {
  for (double weff : {0.06, 0.21}) {
    const TrapConfig t = fixtures::trap(weff, 1);
    const double wc = t.majority().cyclotron;
    EXPECT_NEAR(wc * t.omega - t.omega * t.omega - 0.5, weff * weff, 1e-12);
    EXPECT_NEAR(t.omega_eff_squared(), weff * weff, 1e-12);
  }
}

TEST(Crystal, UnstableTrapRejected) {
  TrapConfig t = fixtures::trap(0.21, 3);
  t.omega = 0.01;
  EXPECT_THROW(t.validate(), ValidationError);
  EXPECT_THROW(minimize_equilibrium(t, {0, 0, 0}, seed_configuration(3, t)), ValidationError);
}

TEST(Crystal, SingleIonAtOriginHasZeroEnergy) {
  const TrapConfig t = fixtures::trap(0.21, 1);
  const Positions p = Positions::Zero(1, 2);
  EXPECT_EQ(potential_energy(t, std::vector<int>{0}, p), 0.0);
  const IonCrystal c = fixtures::pure_crystal(t);
  EXPECT_NEAR(c.positions.norm(), 0.0, 1e-12);
  EXPECT_NEAR(c.energy, 0.0, 1e-20);
}

TEST(Crystal, CoincidentIonsAreSingular) {
  const TrapConfig t = fixtures::trap(0.21, 2);
  Positions p = Positions::Zero(2, 2);
  EXPECT_THROW(potential_energy(t, std::vector<int>{0, 0}, p), SingularConfigurationError);
}

TEST(Crystal, TwoIonSeparationMatchesForceBalance) {
  // Wall off: c d / 2 = k_e e^2 / d^2 with k_e e^2 = 1/2, so d^3 = 1 / c.
  for (double weff : {0.06, 0.21, 0.5}) {
    const TrapConfig t = fixtures::trap(weff, 2, 0.0);
    const IonCrystal c = fixtures::pure_crystal(t);
    const double d = std::hypot(c.positions(0, 0) - c.positions(1, 0), c.positions(0, 1) - c.positions(1, 1));
    const double expected = std::cbrt(1.0 / t.radial_curvature(t.majority()));
    EXPECT_NEAR(d / expected, 1.0, 1e-8) << "omega_eff " << weff;
    EXPECT_NEAR(c.positions.col(0).sum(), 0.0, 1e-8);
  }
}

TEST(Crystal, ThreeIonTriangleCircumradius) {
  // Each ion feels two repulsions at 60 degrees: c R = 2 (k e^2 / (3 R^2)) cos 30.
  const TrapConfig t = fixtures::trap(0.21, 3, 0.0);
  const IonCrystal c = fixtures::pure_crystal(t);
  const double expected = std::cbrt(1.0 / (2.0 * std::sqrt(3.0) * t.radial_curvature(t.majority())));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(c.rho(j) / expected, 1.0, 1e-8);
  std::vector<double> sides;
  for (int j = 0; j < 3; ++j) {
    for (int k = j + 1; k < 3; ++k) {
      sides.push_back(std::hypot(c.positions(j, 0) - c.positions(k, 0), c.positions(j, 1) - c.positions(k, 1)));
    }
  }
  EXPECT_NEAR(sides[0] / sides[1], 1.0, 1e-8);
  EXPECT_NEAR(sides[0] / sides[2], 1.0, 1e-8);
}

TEST(Crystal, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  const TrapConfig t = fixtures::trap(0.21, 10);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const auto species = random_species(10, rng);
    const Positions p = fixtures::random_positions(10, 3.0, rng);
    const EffectivePotential pot(t, species);
    const Eigen::VectorXd q = flatten(p);
    const Eigen::VectorXd g = pot.gradient(q);
    Eigen::VectorXd fd(q.size());
    for (Eigen::Index a = 0; a < q.size(); ++a) {
      Eigen::VectorXd qp = q, qm = q;
      qp(a) += h;
      qm(a) -= h;
      fd(a) = (pot.value(qp) - pot.value(qm)) / (2.0 * h);
    }
    EXPECT_LE((fd - g).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << trial;
  }
}

TEST(Crystal, HessianMatchesRichardsonSecondDifferences) {
  std::mt19937_64 rng(12);
  const TrapConfig t = fixtures::trap(0.21, 10);
  auto second_difference = [](const EffectivePotential& pot, const Eigen::VectorXd& q, Eigen::Index a, Eigen::Index b,
                              double h) {
    auto e = [&](double sa, double sb) {
      Eigen::VectorXd x = q;
      x(a) += sa * h;
      x(b) += sb * h;
      return pot.value(x);
    };
    return (e(1, 1) - e(1, -1) - e(-1, 1) + e(-1, -1)) / (4.0 * h * h);
  };
  for (int trial = 0; trial < 5; ++trial) {
    const auto species = random_species(10, rng);
    const Positions p = fixtures::random_positions(10, 3.0, rng);
    const EffectivePotential pot(t, species);
    const Eigen::VectorXd q = flatten(p);
    const Eigen::MatrixXd hess = pot.hessian(q);
    Eigen::MatrixXd fd(q.size(), q.size());
    for (Eigen::Index a = 0; a < q.size(); ++a) {
      for (Eigen::Index b = 0; b < q.size(); ++b) {
        const double d1 = second_difference(pot, q, a, b, 2e-3);
        const double d2 = second_difference(pot, q, a, b, 1e-3);
        fd(a, b) = (4.0 * d2 - d1) / 3.0;
      }
    }
    EXPECT_LE((fd - hess).cwiseAbs().maxCoeff() / hess.cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_EQ((hess - hess.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Crystal, RotationLeavesEnergyUnchangedWithoutWall) {
  std::mt19937_64 rng(13);
  const TrapConfig t = fixtures::trap(0.21, 12, 0.0);
  const auto species = random_species(12, rng);
  const Positions p = fixtures::random_positions(12, 3.0, rng);
  const double e0 = potential_energy(t, species, p);
  for (double phi : {0.3, 1.0, 2.5, std::numbers::pi}) {
    Eigen::Matrix2d r;
    r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    const Positions q = p * r.transpose();
    EXPECT_NEAR(potential_energy(t, species, q) / e0, 1.0, 1e-12);
  }
}

TEST(Crystal, SeedShellCounts) {
  const TrapConfig t = fixtures::trap(0.21, 217);
  const Positions one = seed_configuration(1, t);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_EQ(one.norm(), 0.0);

  auto shells = [](const Positions& p) {
    std::map<long, int> count;
    for (Eigen::Index j = 0; j < p.rows(); ++j) ++count[std::lround(1e6 * std::hypot(p(j, 0), p(j, 1)))];
    std::vector<int> out;
    for (auto& [r, c] : count) out.push_back(c);
    return out;
  };
  EXPECT_EQ(shells(seed_configuration(7, t)), (std::vector<int>{1, 6}));
  const std::vector<int> s217 = shells(seed_configuration(217, t));
  ASSERT_EQ(s217.size(), 9u);
  for (int k = 0; k < 9; ++k) EXPECT_EQ(s217[k], std::max(1, 6 * k));
  // Partial outer ring is filled uniformly.
  EXPECT_EQ(shells(seed_configuration(10, t)), (std::vector<int>{1, 6, 3}));
}

TEST(Crystal, EquilibriumIsConvergedLocalMinimum) {
  const TrapConfig t = fixtures::trap(0.21, 37);
  const IonCrystal c = fixtures::pure_crystal(t, 3);
  EXPECT_LE(c.grad_norm, 1e-10);
  EXPECT_LE(potential_gradient(t, c.species_of, c.positions).lpNorm<Eigen::Infinity>(), 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(planar_hessian(t, c.species_of, c.positions));
  EXPECT_GE(eig.eigenvalues()(0), -1e-8);
  EXPECT_NEAR(c.energy, potential_energy(t, c.species_of, c.positions), 1e-12 * std::abs(c.energy));
}

TEST(Crystal, MinimizerNeverIncreasesEnergy) {
  const TrapConfig t = fixtures::trap(0.21, 19);
  const EffectivePotential pot(t, std::vector<int>(19, 0));
  std::mt19937_64 rng(5);
  Eigen::VectorXd x = flatten(seed_configuration(19, t));
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += u(rng);
  const MinimizerResult r = minimize(pot, x);
  ASSERT_TRUE(r.converged);
  for (std::size_t k = 1; k < r.value_trace.size(); ++k) {
    EXPECT_LE(r.value_trace[k], r.value_trace[k - 1] + 1e-12 * std::abs(r.value_trace[k - 1])) << "step " << k;
  }
}

TEST(Crystal, RestartsAreDeterministicAndThreadIndependent) {
  const TrapConfig t = fixtures::trap(0.21, 19);
  EquilibriumOptions serial;
  serial.restarts = 4;
  serial.seed = 42;
  EquilibriumOptions threaded = serial;
  threaded.threads = 4;
  const auto seed = seed_configuration(19, t);
  const IonCrystal a = minimize_equilibrium(t, std::vector<int>(19, 0), seed, serial);
  const IonCrystal b = minimize_equilibrium(t, std::vector<int>(19, 0), seed, threaded);
  EXPECT_EQ(crystal_hash(a), crystal_hash(b));
  EXPECT_EQ(a.energy, b.energy);
}

TEST(Crystal, RestartEnergiesAgree) {
  const TrapConfig t = fixtures::trap(0.21, 37);
  const auto seed = seed_configuration(37, t);
  std::vector<double> energies;
  for (std::uint64_t s : {1, 2, 3}) {
    EquilibriumOptions o;
    o.restarts = 2;
    o.seed = s;
    energies.push_back(minimize_equilibrium(t, std::vector<int>(37, 0), seed, o).energy);
  }
  for (double e : energies) EXPECT_NEAR(e / energies.front(), 1.0, 1e-3);
}

TEST(Crystal, NoDefectsReturnsInputUnchanged) {
  const TrapConfig t = fixtures::trap(0.21, 19);
  const IonCrystal c = fixtures::pure_crystal(t);
  const IonCrystal d = place_defects(c, 0, 1);
  EXPECT_EQ(crystal_hash(c), crystal_hash(d));
  EXPECT_TRUE(d.substitutions.empty());
}

TEST(Crystal, DefectsReplaceFarthestMajorityIon) {
  const TrapConfig t = fixtures::trap(0.21, 37);
  const IonCrystal c = fixtures::pure_crystal(t);
  const IonCrystal d = place_defects(c, 6, 1);
  EXPECT_EQ(d.defect_sites().size(), 6u);
  ASSERT_EQ(d.substitutions.size(), 6u);
  for (const auto& s : d.substitutions) {
    // Ties within 1e-12 relative go to the lowest index.
    EXPECT_GE(s.rho, s.max_majority_rho * (1.0 - 1e-12));
    EXPECT_LE(s.rho, s.max_majority_rho);
    EXPECT_EQ(d.species_of[s.ion], 1);
  }
  EXPECT_LE(d.grad_norm, 1e-10);

  // A single defect lands on the outermost shell.
  const IonCrystal one = place_defects(c, 1, 1);
  const int ion = one.defect_sites().front();
  double max_rho = 0.0;
  for (int j = 0; j < c.size(); ++j) max_rho = std::max(max_rho, c.rho(j));
  EXPECT_GT(c.rho(ion), 0.9 * max_rho);
}

TEST(Crystal, FarthestIonTieGoesToLowestIndex) {
  const TrapConfig t = fixtures::trap(0.21, 3);
  IonCrystal c;
  c.config = t;
  c.species_of = {0, 0, 0};
  c.positions.resize(3, 2);
  c.positions << 0.0, 0.0, 0.0, 2.0, 2.0, 0.0;
  EXPECT_EQ(farthest_majority_ion(c), 1);
  c.species_of[1] = 1;
  EXPECT_EQ(farthest_majority_ion(c), 2);
}

TEST(Crystal, DefectPlacementValidatesInput) {
  const TrapConfig t = fixtures::trap(0.21, 7);
  const IonCrystal c = fixtures::pure_crystal(t);
  EXPECT_THROW(place_defects(c, 1, 0), ValidationError);
  EXPECT_THROW(place_defects(c, 1, 5), ValidationError);
  EXPECT_THROW(place_defects(c, 8, 1), ValidationError);
  IonCrystal light = c;
  light.config.species[1].mass = 0.5;
  EXPECT_THROW(place_defects(light, 1, 1), ValidationError);
}

TEST(Crystal, DefectPlacementFailureReportsStep) {
  const TrapConfig t = fixtures::trap(0.21, 7);
  const IonCrystal c = fixtures::pure_crystal(t);
  EquilibriumOptions o;
  o.minimizer.max_iterations = 1;
  try {
    place_defects(c, 2, 1, o);
    FAIL() << "expected a placement failure";
  } catch (const DefectPlacementError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(Crystal, HashDependsOnSpeciesAndPositions) {
  const TrapConfig t = fixtures::trap(0.21, 7);
  const IonCrystal c = fixtures::pure_crystal(t);
  IonCrystal d = c;
  d.species_of[3] = 1;
  EXPECT_NE(crystal_hash(c), crystal_hash(d));
  IonCrystal e = c;
  e.positions(2, 0) = std::nextafter(e.positions(2, 0), 1e9);
  EXPECT_NE(crystal_hash(c), crystal_hash(e));
  EXPECT_EQ(crystal_hash(c).size(), 64u);
}
