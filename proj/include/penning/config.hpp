#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "penning/crystal.hpp"

namespace penning {

struct SpeciesSpec {
  std::string name;
  double mass_u = 0.0;
};

struct RunConfig {
  double omega_z_hz = 795e3;
  double b_field = 4.5;          // tesla
  double omega_w = 0.04;         // units of omega_z
  std::optional<double> omega;   // units of omega_z
  std::optional<double> omega_eff;
  int n = 217;
  int n_defects = 0;
  int defect_species = 1;
  std::vector<SpeciesSpec> species{{"Be+", 9.012182}, {"BeH+", 10.0201220}};
  std::vector<double> delta_list{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<int> ndefects_list{0, 12, 24, 36};
  std::uint64_t seed = 0;
  int restarts = 8;
  double grad_tol = 1e-10;
  double r_min = 2.0;
  std::string output_dir = "out";
  unsigned threads = 1;
};

/// Rotation frequency giving the requested omega_eff for the majority species
/// (smaller root of omega^2 - omega_c omega + omega_eff^2 + eV0/m = 0).
inline double rotation_from_omega_eff(double omega_eff, const Species& majority) {
  const double wc = majority.cyclotron;
  const double c = omega_eff * omega_eff + internal::trap_curvature / majority.mass;
  const double disc = wc * wc - 4.0 * c;
  if (!(disc >= 0.0)) {
    throw ValidationError("omega_eff = " + format_double(omega_eff) + " is not reachable for cyclotron frequency " +
                          format_double(wc));
  }
  return 0.5 * (wc - std::sqrt(disc));
}

inline TrapConfig make_trap(const RunConfig& rc) {
  if (rc.species.empty()) throw ValidationError("species: at least one species is required");
  const double m_ref = rc.species.front().mass_u * codata::atomic_mass_unit;
  TrapConfig t;
  t.units = build_units(hz_to_rad(rc.omega_z_hz), m_ref);
  const Species majority{rc.species.front().name, 1.0, cyclotron_frequency(t.units, rc.b_field, m_ref)};
  t.species.push_back(majority);
  for (std::size_t s = 1; s < rc.species.size(); ++s) {
    t.species.push_back(make_species(rc.species[s].name, rc.species[s].mass_u / rc.species.front().mass_u, majority));
  }
  t.omega = rc.omega ? *rc.omega : rotation_from_omega_eff(*rc.omega_eff, majority);
  t.omega_w = rc.omega_w;
  t.n = rc.n;
  t.validate();
  return t;
}

namespace detail {

using json = nlohmann::json;

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(path + ": must be finite");
  return v;
}

inline double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) throw ValidationError(path + ": must be positive");
  return v;
}

inline std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path + ": expected an integer");
  return j.get<std::int64_t>();
}

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ValidationError(path + "/" + key + ": unknown field");
  }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::get_integer;
  using detail::get_number;
  using detail::get_positive;
  if (!j.is_object()) throw ValidationError("/: expected an object");
  detail::reject_unknown(j,
                         {"N", "N_d", "omega_z_hz", "B_z", "omega_w", "omega", "omega_eff", "species", "defect_species",
                          "delta_list", "ndefects_list", "seed", "restarts", "tolerances", "r_min", "output_dir",
                          "threads"},
                         "");
  RunConfig rc;
  if (j.contains("N")) rc.n = static_cast<int>(get_integer(j["N"], "/N"));
  if (rc.n < 1) throw ValidationError("/N: must be at least 1");
  if (j.contains("N_d")) rc.n_defects = static_cast<int>(get_integer(j["N_d"], "/N_d"));
  if (rc.n_defects < 0 || rc.n_defects >= rc.n) throw ValidationError("/N_d: must lie in [0, N)");
  if (j.contains("omega_z_hz")) rc.omega_z_hz = get_positive(j["omega_z_hz"], "/omega_z_hz");
  if (j.contains("B_z")) rc.b_field = get_positive(j["B_z"], "/B_z");
  if (j.contains("omega_w")) {
    rc.omega_w = get_number(j["omega_w"], "/omega_w");
    if (rc.omega_w < 0.0) throw ValidationError("/omega_w: must be non-negative");
  }
  if (j.contains("omega") == j.contains("omega_eff")) {
    throw ValidationError("/omega, /omega_eff: exactly one of the two rotation settings is required");
  }
  if (j.contains("omega")) rc.omega = get_positive(j["omega"], "/omega");
  if (j.contains("omega_eff")) rc.omega_eff = get_positive(j["omega_eff"], "/omega_eff");

  if (j.contains("species")) {
    const auto& arr = j["species"];
    if (!arr.is_array() || arr.empty()) throw ValidationError("/species: expected a non-empty array");
    rc.species.clear();
    for (std::size_t s = 0; s < arr.size(); ++s) {
      const std::string path = "/species/" + std::to_string(s);
      if (!arr[s].is_object()) throw ValidationError(path + ": expected an object");
      detail::reject_unknown(arr[s], {"name", "mass_u"}, path);
      if (!arr[s].contains("name") || !arr[s]["name"].is_string()) throw ValidationError(path + "/name: expected a string");
      if (!arr[s].contains("mass_u")) throw ValidationError(path + "/mass_u: missing");
      rc.species.push_back({arr[s]["name"].get<std::string>(), get_positive(arr[s]["mass_u"], path + "/mass_u")});
    }
  }
  if (j.contains("defect_species")) rc.defect_species = static_cast<int>(get_integer(j["defect_species"], "/defect_species"));
  const bool needs_defects = rc.n_defects > 0 || j.contains("ndefects_list") || j.contains("defect_species");
  if (needs_defects && (rc.defect_species < 1 || rc.defect_species >= static_cast<int>(rc.species.size()))) {
    throw ValidationError("/defect_species: must index a non-majority species");
  }

  if (j.contains("delta_list")) {
    const auto& arr = j["delta_list"];
    if (!arr.is_array()) throw ValidationError("/delta_list: expected an array");
    rc.delta_list.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      rc.delta_list.push_back(get_number(arr[k], "/delta_list/" + std::to_string(k)));
    }
  }
  if (j.contains("ndefects_list")) {
    const auto& arr = j["ndefects_list"];
    if (!arr.is_array() || arr.empty()) throw ValidationError("/ndefects_list: expected a non-empty array");
    rc.ndefects_list.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string path = "/ndefects_list/" + std::to_string(k);
      const int v = static_cast<int>(get_integer(arr[k], path));
      if (v < 0 || v >= rc.n) throw ValidationError(path + ": must lie in [0, N)");
      if (!rc.ndefects_list.empty() && v <= rc.ndefects_list.back()) throw ValidationError(path + ": must be ascending");
      rc.ndefects_list.push_back(v);
    }
  }
  if (j.contains("seed")) {
    const auto& s = j["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      throw ValidationError("/seed: expected a non-negative integer");
    }
    rc.seed = s.get<std::uint64_t>();
  }
  if (j.contains("restarts")) rc.restarts = static_cast<int>(get_integer(j["restarts"], "/restarts"));
  if (rc.restarts < 1) throw ValidationError("/restarts: must be at least 1");
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    if (!t.is_object()) throw ValidationError("/tolerances: expected an object");
    detail::reject_unknown(t, {"grad"}, "/tolerances");
    if (t.contains("grad")) rc.grad_tol = get_positive(t["grad"], "/tolerances/grad");
  }
  if (j.contains("r_min")) rc.r_min = get_number(j["r_min"], "/r_min");
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ValidationError("/output_dir: expected a string");
    rc.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("threads")) {
    const auto t = get_integer(j["threads"], "/threads");
    if (t < 1) throw ValidationError("/threads: must be at least 1");
    rc.threads = static_cast<unsigned>(t);
  }

  // Stability is checked here so the error carries the computed omega_eff^2.
  make_trap(rc);
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Canonical JSON echo of a configuration with all defaults filled in.
inline nlohmann::json config_to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["N"] = rc.n;
  j["N_d"] = rc.n_defects;
  j["omega_z_hz"] = rc.omega_z_hz;
  j["B_z"] = rc.b_field;
  j["omega_w"] = rc.omega_w;
  if (rc.omega) j["omega"] = *rc.omega;
  if (rc.omega_eff) j["omega_eff"] = *rc.omega_eff;
  j["species"] = nlohmann::json::array();
  for (const auto& s : rc.species) j["species"].push_back({{"name", s.name}, {"mass_u", s.mass_u}});
  j["defect_species"] = rc.defect_species;
  j["delta_list"] = rc.delta_list;
  j["ndefects_list"] = rc.ndefects_list;
  j["seed"] = rc.seed;
  j["restarts"] = rc.restarts;
  j["tolerances"] = {{"grad", rc.grad_tol}};
  j["r_min"] = rc.r_min;
  j["output_dir"] = rc.output_dir;
  j["threads"] = rc.threads;
  return j;
}

}  // namespace penning
