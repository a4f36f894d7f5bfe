#pragma once

#include <cmath>
#include <numbers>

#include "penning/error.hpp"

namespace penning {

// CODATA 2018 recommended values (SI).
namespace codata {
inline constexpr double elementary_charge = 1.602176634e-19;  // C, exact
inline constexpr double hbar = 1.054571817e-34;               // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double coulomb_constant = 8.9875517923e9;    // N m^2 C^-2, 1/(4 pi eps0)
}  // namespace codata

// Internal units: frequency in omega_z, mass in m_ref, length in ell0,
// energy in m_ref omega_z^2 ell0^2. In these units eV0 = 1/2 and k_e e^2 = 1/2.
namespace internal {
inline constexpr double trap_curvature = 0.5;  // e V0
inline constexpr double coulomb = 0.5;         // k_e e^2
}  // namespace internal

struct UnitSystem {
  double omega_z_lab = 0.0;  // rad/s
  double m_ref = 0.0;        // kg
  double ell0 = 0.0;         // m
  double hbar_tilde = 0.0;   // hbar / (m_ref omega_z ell0^2)

  double frequency_to_internal(double rad_per_s) const { return rad_per_s / omega_z_lab; }
  double frequency_to_lab(double w) const { return w * omega_z_lab; }
  double mass_to_internal(double kg) const { return kg / m_ref; }
  double length_to_internal(double metres) const { return metres / ell0; }
  double length_to_lab(double x) const { return x * ell0; }
};

/// ell0 = (k_e e^2 / e V0)^(1/3) with e V0 = m_ref omega_z^2 / 2.
inline UnitSystem build_units(double omega_z_lab, double m_ref) {
  if (!(omega_z_lab > 0.0) || !std::isfinite(omega_z_lab)) {
    throw ValidationError("build_units: omega_z must be positive");
  }
  if (!(m_ref > 0.0) || !std::isfinite(m_ref)) {
    throw ValidationError("build_units: reference mass must be positive");
  }
  const double ke2 = codata::coulomb_constant * codata::elementary_charge * codata::elementary_charge;
  const double eV0 = 0.5 * m_ref * omega_z_lab * omega_z_lab;
  UnitSystem u;
  u.omega_z_lab = omega_z_lab;
  u.m_ref = m_ref;
  u.ell0 = std::cbrt(ke2 / eV0);
  u.hbar_tilde = codata::hbar / (m_ref * omega_z_lab * u.ell0 * u.ell0);
  return u;
}

/// Cyclotron frequency eB/m of a species in units of omega_z.
inline double cyclotron_frequency(const UnitSystem& u, double b_field_tesla, double mass_kg) {
  return codata::elementary_charge * b_field_tesla / mass_kg / u.omega_z_lab;
}

inline double hz_to_rad(double hz) { return 2.0 * std::numbers::pi * hz; }

}  // namespace penning
