#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "penning/config.hpp"
#include "penning/io.hpp"

namespace penning {

inline constexpr const char* version = "0.1.0";

/// A pipeline stage failed; carries the stage name and the exit code of the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, int exit_code)
      : Error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}
  const std::string& stage() const noexcept { return stage_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

inline int exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 1;
}

inline EquilibriumOptions equilibrium_options(const RunConfig& rc) {
  EquilibriumOptions o;
  o.minimizer.grad_tol = rc.grad_tol;
  o.restarts = rc.restarts;
  o.seed = rc.seed;
  o.threads = rc.threads;
  return o;
}

inline std::string point_dir(int n_defects) { return "nd" + std::to_string(n_defects); }

/// Ascending, de-duplicated defect counts, always starting with the pure crystal.
inline std::vector<int> defect_points(std::vector<int> list) {
  list.push_back(0);
  std::sort(list.begin(), list.end());
  list.erase(std::unique(list.begin(), list.end()), list.end());
  return list;
}

// ---------------------------------------------------------------- stages

class StageRunner {
 public:
  explicit StageRunner(std::filesystem::path out) : out_(std::move(out)) {}

  template <class F>
  void run(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      f();
    } catch (const std::exception& e) {
      const int code = exit_code_for(e);
      io::write_text(out_ / "FAILED", name + "\n" + e.what() + "\n");
      throw StageError(name, e.what(), code == 1 ? 3 : code);
    }
    timings_[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  nlohmann::json timings() const { return timings_; }

 private:
  std::filesystem::path out_;
  std::map<std::string, double> timings_;
};

inline std::vector<IonCrystal> equilibrate_chain(const RunConfig& rc, const std::vector<int>& points) {
  const TrapConfig trap = make_trap(rc);
  const EquilibriumOptions opts = equilibrium_options(rc);
  std::vector<IonCrystal> out;
  IonCrystal current =
      minimize_equilibrium(trap, std::vector<int>(trap.n, 0), seed_configuration(trap.n, trap), opts);
  int placed = 0;
  for (int target : points) {
    if (target > placed) {
      current = place_defects(current, target - placed, rc.defect_species, opts);
      placed = target;
    }
    out.push_back(current);
  }
  return out;
}

inline std::vector<std::filesystem::path> point_dirs(const std::filesystem::path& out) {
  std::vector<std::pair<int, std::filesystem::path>> found;
  if (std::filesystem::is_directory(out)) {
    for (const auto& entry : std::filesystem::directory_iterator(out)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_directory() && name.starts_with("nd") && std::filesystem::exists(entry.path() / "crystal.json")) {
        found.emplace_back(std::stoi(name.substr(2)), entry.path());
      }
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> dirs;
  for (auto& f : found) dirs.push_back(std::move(f.second));
  if (dirs.empty()) throw ValidationError(out.string() + ": no nd*/crystal.json found; run equilibrate first");
  return dirs;
}

inline nlohmann::json branch_census(const PlanarSpectrum& s, const TrapConfig& config) {
  nlohmann::json c;
  int magnetron = 0;
  std::vector<int> cyclotron(config.species.size(), 0);
  for (const auto& lab : s.branch_of) {
    if (lab.branch == Branch::magnetron) ++magnetron;
    else ++cyclotron[lab.species];
  }
  c["magnetron"] = magnetron;
  for (std::size_t k = 0; k < cyclotron.size(); ++k) c["cyclotron"][config.species[k].name] = cyclotron[k];
  return c;
}

inline nlohmann::json write_modes(const std::filesystem::path& dir, const IonCrystal& c) {
  const AxialSpectrum ax = axial_modes(c);
  io::write_axial(dir, ax);
  const PlanarSpectrum pl = planar_modes(c);
  io::write_planar(dir, pl, ax.crystal_ref, c.config.species);
  return {{"com_frequency", com_frequency(ax)}, {"branches", branch_census(pl, c.config)}};
}

inline nlohmann::json write_couplings(const std::filesystem::path& dir, const IonCrystal& c, const AxialSpectrum& ax,
                                      const std::vector<double>& deltas, double r_min) {
  nlohmann::json fits = nlohmann::json::array();
  const double wcm = com_frequency(ax);
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const CouplingMatrix cm = spin_spin_static(ax, c, drive_from_com(wcm, deltas[k]));
    io::write_text(dir / "couplings" / ("J_" + std::to_string(k) + ".csv"), io::coupling_csv(cm));
    nlohmann::json entry;
    try {
      entry = io::fit_to_json(cm.params, fit_power_law(cm, r_min));
    } catch (const ValidationError& e) {
      entry = {{"delta", cm.params.delta}, {"mu", cm.params.mu}, {"error", e.what()}};
    }
    entry["file"] = "couplings/J_" + std::to_string(k) + ".csv";
    fits.push_back(entry);
  }
  io::write_json(dir / "couplings" / "fits.json", fits);
  return fits;
}

inline void write_analysis(const std::filesystem::path& dir, const AxialSpectrum& pure, const AxialSpectrum& defect,
                           nlohmann::json& summary) {
  const OverlapReport rep = mode_overlap(pure, defect);
  io::write_text(dir / "overlap.csv", io::overlap_csv(rep));
  io::write_text(dir / "projection.csv", io::projection_csv(pure, defect, rep));
  io::CsvWriter lc({"defect_mode", "first", "second", "c1", "c2", "residual"});
  for (Eigen::Index v = 0; v < defect.size(); ++v) {
    const LinearCombination b = best_linear_combination(pure, defect, v);
    lc.field(static_cast<long long>(v)).field(static_cast<long long>(b.first)).field(static_cast<long long>(b.second))
        .field(b.c1).field(b.c2).field(b.residual);
    lc.end_row();
  }
  io::write_text(dir / "linear_combinations.csv", lc.str());
  summary = io::summary_to_json(summarize_overlap(rep));
  summary["spearman_shift_projection"] = spearman(frequency_shift(pure, defect), rep.defect_projection);
  summary["pure_hash"] = rep.pure_ref;
  summary["defect_hash"] = rep.defect_ref;
  summary["defect_sites"] = rep.defect_sites.size();
  io::write_json(dir / "summary.json", summary);
}

// ---------------------------------------------------------------- invariant suite

struct CheckLimits {
  double grad = 1e-10;
  double hessian_floor = -1e-8;
  double axial = 1e-10;
  double axial_residual = 1e-9;
  double planar = 1e-8;
};

/// Re-evaluates the invariants of the artifacts stored in one point directory.
inline nlohmann::json check_point(const std::filesystem::path& dir, const CheckLimits& lim, bool& ok) {
  nlohmann::json r;
  auto record = [&](const std::string& name, double value, double limit, bool upper = true) {
    const bool pass = upper ? value <= limit : value >= limit;
    r[name] = {{"value", value}, {"limit", limit}, {"pass", pass}};
    ok = ok && pass;
  };
  const IonCrystal c = io::read_crystal(dir);
  record("grad_norm", potential_gradient(c.config, c.species_of, c.positions).lpNorm<Eigen::Infinity>(), lim.grad);
  record("hessian_min_eigenvalue", detail::smallest_eigenvalue(planar_hessian(c.config, c.species_of, c.positions)),
         lim.hessian_floor, false);
  for (const auto& s : c.substitutions) {
    record("substitution_" + std::to_string(s.ion) + "_farthest", (s.max_majority_rho - s.rho) / s.max_majority_rho,
           1e-12);
  }
  if (std::filesystem::exists(dir / "axial.json")) {
    const AxialSpectrum ax = io::read_axial(dir, c);
    const AxialChecks a = check_axial(ax, axial_stiffness(c));
    record("axial_orthonormality", a.orthonormality, lim.axial);
    record("axial_mass_orthonormality", a.mass_orthonormality, lim.axial);
    record("axial_completeness", a.completeness, lim.axial);
    record("axial_eigen_residual", a.eigen_residual, lim.axial_residual);
    record("axial_min_frequency", ax.freqs.minCoeff(), 0.0, false);
  }
  if (std::filesystem::exists(dir / "planar.json")) {
    const PlanarSpectrum pl = io::read_planar(dir, c);
    const PlanarChecks p = check_planar(pl);
    record("planar_qep_residual", p.qep_residual, lim.planar);
    record("planar_pairing_residual", p.pairing_residual, lim.planar);
    if (pl.zero_modes == 0) {
      record("planar_relation_weighted", p.relation_weighted, lim.planar);
      record("planar_relation_antisymmetric", p.relation_antisym, lim.planar);
      record("planar_relation_inverse", p.relation_inverse, lim.planar);
    }
    r["planar_relation_orthogonality_diagnostic"] = p.relation_orthogonality;
  }
  return r;
}

// ---------------------------------------------------------------- drivers

struct RunOptions {
  std::vector<int> points;          // defect counts; 0 is always added
  bool modes = true;
  bool couplings = true;
  bool analysis = true;
};

namespace detail {

inline void run_stages(const RunConfig& rc, const std::filesystem::path& out, const RunOptions& ro,
                       const std::vector<int>& points, StageRunner& stages, nlohmann::json& manifest) {
  std::vector<IonCrystal> crystals;
  stages.run("equilibrate", [&] {
    crystals = equilibrate_chain(rc, points);
    for (std::size_t k = 0; k < points.size(); ++k) io::write_crystal(out / point_dir(points[k]), crystals[k]);
  });

  std::vector<nlohmann::json> info(points.size());
  std::vector<AxialSpectrum> axial(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    info[k] = {{"n_defects", points[k]},
               {"dir", point_dir(points[k])},
               {"crystal_hash", crystal_hash(crystals[k])},
               {"energy", crystals[k].energy},
               {"grad_norm", crystals[k].grad_norm}};
  }
  if (ro.modes) {
    stages.run("axial_modes", [&] {
      parallel_for(points.size(), rc.threads, [&](std::size_t k) {
        axial[k] = axial_modes(crystals[k]);
        io::write_axial(out / point_dir(points[k]), axial[k]);
        info[k]["com_frequency"] = com_frequency(axial[k]);
      });
    });
    stages.run("planar_modes", [&] {
      parallel_for(points.size(), 1, [&](std::size_t k) {
        const PlanarSpectrum pl = planar_modes(crystals[k]);
        io::write_planar(out / point_dir(points[k]), pl, axial[k].crystal_ref, crystals[k].config.species);
        info[k]["branches"] = branch_census(pl, crystals[k].config);
      });
    });
  }
  if (ro.modes && ro.couplings) {
    stages.run("couplings", [&] {
      parallel_for(points.size(), rc.threads, [&](std::size_t k) {
        info[k]["fits"] = write_couplings(out / point_dir(points[k]), crystals[k], axial[k], rc.delta_list, rc.r_min);
      });
    });
  }
  if (ro.modes && ro.analysis) {
    stages.run("analysis", [&] {
      io::CsvWriter com({"n_defects", "omega_cm"});
      for (std::size_t k = 0; k < points.size(); ++k) {
        com.field(points[k]).field(com_frequency(axial[k]));
        com.end_row();
      }
      io::write_text(out / "analysis" / "com_sweep.csv", com.str());
      for (std::size_t k = 1; k < points.size(); ++k) {
        nlohmann::json summary;
        write_analysis(out / "analysis" / point_dir(points[k]), axial[0], axial[k], summary);
        info[k]["overlap"] = summary;
      }
    });
  }
  if (ro.modes) {
    stages.run("check", [&] {
      bool all = true;
      for (std::size_t k = 0; k < points.size(); ++k) {
        CheckLimits lim;
        lim.grad = rc.grad_tol;
        bool ok = true;
        info[k]["checks"] = check_point(out / point_dir(points[k]), lim, ok);
        info[k]["checks_pass"] = ok;
        all = all && ok;
      }
      manifest["checks_pass"] = all;
    });
  }
  manifest["points"] = info;
}

}  // namespace detail

/// equilibrate -> place_defects -> axial/planar modes -> couplings -> analysis,
/// one nd<k>/ directory per defect count plus analysis/ and manifest.json.
/// A failing stage leaves its partial artifacts, a FAILED marker and a manifest with status "failed".
inline nlohmann::json run_pipeline(const RunConfig& rc, const std::filesystem::path& out, const RunOptions& ro) {
  namespace fs = std::filesystem;
  fs::create_directories(out);
  fs::remove(out / "FAILED");
  const std::vector<int> points = defect_points(ro.points);
  StageRunner stages(out);
  nlohmann::json manifest;
  manifest["version"] = version;
  manifest["config"] = config_to_json(rc);
  manifest["seed"] = rc.seed;
  manifest["restarts"] = rc.restarts;
  try {
    detail::run_stages(rc, out, ro, points, stages, manifest);
  } catch (const StageError& e) {
    manifest["status"] = "failed";
    manifest["failed_stage"] = e.stage();
    manifest["error"] = e.what();
    manifest["stage_seconds"] = stages.timings();
    io::write_json(out / "manifest.json", manifest);
    throw;
  }
  manifest["stage_seconds"] = stages.timings();
  manifest["status"] = "ok";
  io::write_json(out / "manifest.json", manifest);
  return manifest;
}

}  // namespace penning
