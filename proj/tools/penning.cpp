#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "penning/penning.hpp"

namespace fs = std::filesystem;
using namespace penning;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> ndefects;
  std::string delta;
  std::optional<unsigned> threads;
};

std::vector<double> parse_delta_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(io::parse_double(item));
    } catch (const ValidationError&) {
      throw ValidationError("--delta: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ValidationError("--delta: empty list");
  return out;
}

RunConfig resolve(const Flags& f, bool need_config) {
  if (need_config && f.config.empty()) throw ValidationError("--config is required for this command");
  RunConfig rc = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.config.empty()) rc.omega_eff = 0.21;
  if (!f.out.empty()) rc.output_dir = f.out;
  if (f.seed) rc.seed = *f.seed;
  if (f.ndefects) {
    if (*f.ndefects < 0 || *f.ndefects >= rc.n) throw ValidationError("--ndefects: must lie in [0, N)");
    rc.n_defects = *f.ndefects;
  }
  if (!f.delta.empty()) rc.delta_list = parse_delta_list(f.delta);
  if (f.threads) {
    if (*f.threads < 1) throw ValidationError("--threads: must be at least 1");
    rc.threads = *f.threads;
  }
  return rc;
}

void print_summary(const nlohmann::json& manifest) {
  for (const auto& p : manifest["points"]) {
    std::cout << p["dir"].get<std::string>() << ": E = " << format_double(p["energy"].get<double>());
    if (p.contains("com_frequency")) std::cout << ", omega_cm = " << format_double(p["com_frequency"].get<double>());
    if (p.contains("checks_pass")) std::cout << ", checks " << (p["checks_pass"].get<bool>() ? "pass" : "FAIL");
    std::cout << "\n";
  }
  for (const auto& [stage, secs] : manifest["stage_seconds"].items()) {
    std::cout << "  " << stage << " " << format_double(secs.get<double>()) << " s\n";
  }
}

int cmd_equilibrate(const Flags& f) {
  const RunConfig rc = resolve(f, true);
  RunOptions ro;
  ro.points = {rc.n_defects};
  ro.modes = false;
  print_summary(run_pipeline(rc, rc.output_dir, ro));
  return 0;
}

int cmd_modes(const Flags& f) {
  const RunConfig rc = resolve(f, false);
  const auto dirs = point_dirs(rc.output_dir);
  parallel_for(dirs.size(), rc.threads, [&](std::size_t k) {
    const nlohmann::json info = write_modes(dirs[k], io::read_crystal(dirs[k]));
    std::cout << dirs[k].filename().string() + ": omega_cm = " + format_double(info["com_frequency"].get<double>()) +
                     "\n";
  });
  return 0;
}

int cmd_couple(const Flags& f) {
  const RunConfig rc = resolve(f, false);
  for (const auto& dir : point_dirs(rc.output_dir)) {
    const IonCrystal c = io::read_crystal(dir);
    const AxialSpectrum ax = fs::exists(dir / "axial.json") ? io::read_axial(dir, c) : axial_modes(c);
    const nlohmann::json fits = write_couplings(dir, c, ax, rc.delta_list, rc.r_min);
    for (const auto& fit : fits) {
      std::cout << dir.filename().string() << ": delta = " << format_double(fit["delta"].get<double>());
      if (fit.contains("gamma")) std::cout << ", gamma = " << format_double(fit["gamma"].get<double>());
      else std::cout << ", " << fit["error"].get<std::string>();
      std::cout << "\n";
    }
  }
  return 0;
}

int cmd_check(const Flags& f) {
  const RunConfig rc = resolve(f, false);
  CheckLimits lim;
  lim.grad = rc.grad_tol;
  bool all = true;
  nlohmann::json report;
  for (const auto& dir : point_dirs(rc.output_dir)) {
    bool ok = true;
    report[dir.filename().string()] = check_point(dir, lim, ok);
    for (const auto& [name, entry] : report[dir.filename().string()].items()) {
      if (entry.is_object() && !entry["pass"].get<bool>()) {
        std::cout << dir.filename().string() << ": " << name << " = " << format_double(entry["value"].get<double>())
                  << " (limit " << format_double(entry["limit"].get<double>()) << ")\n";
      }
    }
    std::cout << dir.filename().string() << ": " << (ok ? "pass" : "FAIL") << "\n";
    all = all && ok;
  }
  io::write_json(fs::path(rc.output_dir) / "check.json", report);
  return all ? 0 : 3;
}

int cmd_run(const Flags& f, bool sweep) {
  const RunConfig rc = resolve(f, true);
  RunOptions ro;
  ro.points = sweep ? rc.ndefects_list : std::vector<int>{rc.n_defects};
  const nlohmann::json manifest = run_pipeline(rc, rc.output_dir, ro);
  print_summary(manifest);
  return manifest.value("checks_pass", true) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equilibria, normal modes and spin-spin couplings of single-plane Penning-trap crystals"};
  app.require_subcommand(1);
  Flags f;

  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--out", f.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", f.seed, "restart seed");
    sub->add_option("--ndefects", f.ndefects, "number of defects");
    sub->add_option("--delta", f.delta, "comma-separated detunings");
    sub->add_option("--threads", f.threads, "worker threads");
  };
  auto* equilibrate = app.add_subcommand("equilibrate", "minimize the pure crystal and place defects");
  auto* modes = app.add_subcommand("modes", "axial and planar modes for stored crystals");
  auto* couple = app.add_subcommand("couple", "spin-spin couplings for stored crystals");
  auto* sweep = app.add_subcommand("sweep", "full pipeline over ndefects_list");
  auto* check = app.add_subcommand("check", "invariant suite on stored artifacts");
  auto* run = app.add_subcommand("run", "full pipeline for N_d");
  for (auto* s : {equilibrate, modes, couple, sweep, check, run}) add_flags(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*equilibrate) return cmd_equilibrate(f);
    if (*modes) return cmd_modes(f);
    if (*couple) return cmd_couple(f);
    if (*check) return cmd_check(f);
    if (*sweep) return cmd_run(f, true);
    return cmd_run(f, false);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const int code = exit_code_for(e);
    return code == 1 ? 3 : code;
  }
}
