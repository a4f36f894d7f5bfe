#pragma once

#include <json.hpp>

#include <charconv>
#include <complex>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "penning/analysis.hpp"
#include "penning/couplings.hpp"
#include "penning/planar.hpp"

namespace penning::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- CSV

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (k) text_ += ',';
      text_ += header[k];
    }
    text_ += "\r\n";
  }

  CsvWriter& field(double v) { return raw(format_double(v)); }
  CsvWriter& field(long long v) { return raw(std::to_string(v)); }
  CsvWriter& field(int v) { return raw(std::to_string(v)); }
  CsvWriter& field(std::string_view s) { return raw(std::string(s)); }
  void end_row() {
    text_ += "\r\n";
    fresh_ = true;
  }
  const std::string& str() const { return text_; }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!fresh_) text_ += ',';
    text_ += s;
    fresh_ = false;
    return *this;
  }
  std::string text_;
  bool fresh_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline CsvTable read_csv(const fs::path& path) {
  const std::string text = read_text(path);
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
      if (t.rows.back().size() != t.header.size()) {
        throw ValidationError(path.string() + ": row " + std::to_string(t.rows.size()) + " has wrong field count");
      }
    }
  }
  return t;
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

/// Columns [first, first + cols) of a numeric CSV table as a matrix.
inline Eigen::MatrixXd csv_matrix(const CsvTable& t, std::size_t first = 0) {
  const std::size_t cols = t.header.size() - first;
  Eigen::MatrixXd m(t.rows.size(), cols);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = parse_double(t.rows[r][first + c]);
  }
  return m;
}

inline Eigen::VectorXd csv_column(const CsvTable& t, std::size_t col) {
  Eigen::VectorXd v(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) v(r) = parse_double(t.rows[r].at(col));
  return v;
}

inline std::string matrix_csv(const Eigen::MatrixXd& m, const std::string& row_label, const std::string& col_prefix) {
  std::vector<std::string> header{row_label};
  for (Eigen::Index c = 0; c < m.cols(); ++c) header.push_back(col_prefix + std::to_string(c));
  CsvWriter w(header);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    w.field(static_cast<long long>(r));
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.field(m(r, c));
    w.end_row();
  }
  return w.str();
}

// ---------------------------------------------------------------- crystal

inline json trap_to_json(const TrapConfig& t) {
  json j;
  j["omega_z_lab"] = t.units.omega_z_lab;
  j["m_ref"] = t.units.m_ref;
  j["ell0"] = t.units.ell0;
  j["hbar_tilde"] = t.units.hbar_tilde;
  j["species"] = json::array();
  for (const auto& s : t.species) j["species"].push_back({{"name", s.name}, {"mass", s.mass}, {"cyclotron", s.cyclotron}});
  j["omega"] = t.omega;
  j["omega_w"] = t.omega_w;
  j["omega_eff_squared"] = t.omega_eff_squared();
  j["N"] = t.n;
  return j;
}

inline TrapConfig trap_from_json(const json& j) {
  try {
    TrapConfig t;
    t.units.omega_z_lab = j.at("omega_z_lab").get<double>();
    t.units.m_ref = j.at("m_ref").get<double>();
    t.units.ell0 = j.at("ell0").get<double>();
    t.units.hbar_tilde = j.at("hbar_tilde").get<double>();
    for (const auto& s : j.at("species")) {
      t.species.push_back({s.at("name").get<std::string>(), s.at("mass").get<double>(), s.at("cyclotron").get<double>()});
    }
    t.omega = j.at("omega").get<double>();
    t.omega_w = j.at("omega_w").get<double>();
    t.n = j.at("N").get<int>();
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("trap: ") + e.what());
  }
}

inline json crystal_to_json(const IonCrystal& c) {
  json j;
  j["config"] = trap_to_json(c.config);
  j["species_of"] = c.species_of;
  j["positions"] = json::array();
  for (int k = 0; k < c.size(); ++k) j["positions"].push_back({c.positions(k, 0), c.positions(k, 1)});
  j["energy"] = c.energy;
  j["grad_norm"] = c.grad_norm;
  j["hash"] = crystal_hash(c);
  j["substitutions"] = json::array();
  for (const auto& s : c.substitutions) {
    j["substitutions"].push_back(
        {{"ion", s.ion}, {"species", s.species}, {"rho", s.rho}, {"max_majority_rho", s.max_majority_rho}});
  }
  return j;
}

inline IonCrystal crystal_from_json(const json& j) {
  try {
    IonCrystal c;
    c.config = trap_from_json(j.at("config"));
    c.species_of = j.at("species_of").get<std::vector<int>>();
    const auto& pos = j.at("positions");
    if (pos.size() != c.species_of.size()) throw ValidationError("crystal: positions/species size mismatch");
    c.positions.resize(static_cast<Eigen::Index>(pos.size()), 2);
    for (std::size_t k = 0; k < pos.size(); ++k) {
      c.positions(k, 0) = pos[k].at(0).get<double>();
      c.positions(k, 1) = pos[k].at(1).get<double>();
    }
    for (int s : c.species_of) {
      if (s < 0 || s >= static_cast<int>(c.config.species.size())) throw ValidationError("crystal: bad species index");
    }
    c.energy = j.at("energy").get<double>();
    c.grad_norm = j.at("grad_norm").get<double>();
    for (const auto& s : j.at("substitutions")) {
      c.substitutions.push_back({s.at("ion").get<int>(), s.at("species").get<int>(), s.at("rho").get<double>(),
                                 s.at("max_majority_rho").get<double>()});
    }
    if (j.contains("hash") && j["hash"].get<std::string>() != crystal_hash(c)) {
      throw ValidationError("crystal: stored hash does not match positions");
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("crystal: ") + e.what());
  }
}

inline std::string crystal_csv(const IonCrystal& c) {
  CsvWriter w({"index", "species", "x", "y", "rho"});
  for (int k = 0; k < c.size(); ++k) {
    w.field(k).field(c.config.species[c.species_of[k]].name).field(c.positions(k, 0)).field(c.positions(k, 1))
        .field(c.rho(k));
    w.end_row();
  }
  return w.str();
}

inline void write_crystal(const fs::path& dir, const IonCrystal& c) {
  write_json(dir / "crystal.json", crystal_to_json(c));
  write_text(dir / "crystal.csv", crystal_csv(c));
}

inline IonCrystal read_crystal(const fs::path& dir) { return crystal_from_json(read_json(dir / "crystal.json")); }

// ---------------------------------------------------------------- spectra

inline void write_axial(const fs::path& dir, const AxialSpectrum& s) {
  CsvWriter w({"mode", "freq"});
  for (Eigen::Index v = 0; v < s.size(); ++v) {
    w.field(static_cast<long long>(v)).field(s.freqs(v));
    w.end_row();
  }
  write_text(dir / "axial_freqs.csv", w.str());
  write_text(dir / "axial_vectors.csv", matrix_csv(s.b_bar, "site", "mode_"));
  const Eigen::Index com = com_mode(s);
  write_json(dir / "axial.json", {{"m_ave", s.m_ave},
                                  {"crystal_hash", s.crystal_ref},
                                  {"N", s.size()},
                                  {"com_mode", com},
                                  {"com_frequency", s.freqs(com)}});
}

inline AxialSpectrum read_axial(const fs::path& dir, const IonCrystal& c) {
  const json meta = read_json(dir / "axial.json");
  if (meta.at("crystal_hash").get<std::string>() != crystal_hash(c)) {
    throw ValidationError(dir.string() + ": axial spectrum belongs to a different crystal");
  }
  AxialSpectrum s;
  s.freqs = csv_column(read_csv(dir / "axial_freqs.csv"), 1);
  s.b_bar = csv_matrix(read_csv(dir / "axial_vectors.csv"), 1);
  s.masses = c.masses();
  s.species_of = c.species_of;
  s.m_ave = meta.at("m_ave").get<double>();
  s.crystal_ref = meta.at("crystal_hash").get<std::string>();
  if (s.b_bar.rows() != c.size() || s.b_bar.cols() != s.freqs.size()) {
    throw ValidationError(dir.string() + ": axial eigenvector shape mismatch");
  }
  s.b = (s.m_ave / s.masses.array()).sqrt().matrix().asDiagonal() * s.b_bar;
  return s;
}

inline void write_planar(const fs::path& dir, const PlanarSpectrum& s, const std::string& hash,
                         const std::vector<Species>& table) {
  CsvWriter w({"mode", "freq", "branch", "species"});
  for (Eigen::Index l = 0; l < s.size(); ++l) {
    const auto& lab = s.branch_of[l];
    w.field(static_cast<long long>(l)).field(s.freqs(l)).field(to_string(lab.branch))
        .field(lab.species >= 0 ? std::string_view(table[lab.species].name) : std::string_view(""));
    w.end_row();
  }
  write_text(dir / "planar_freqs.csv", w.str());

  std::vector<std::string> header{"component"};
  for (Eigen::Index l = 0; l < s.size(); ++l) {
    header.push_back("re_" + std::to_string(l));
    header.push_back("im_" + std::to_string(l));
  }
  CsvWriter a(header);
  for (Eigen::Index v = 0; v < s.size(); ++v) {
    a.field(static_cast<long long>(v));
    for (Eigen::Index l = 0; l < s.size(); ++l) a.field(s.alphas(v, l).real()).field(s.alphas(v, l).imag());
    a.end_row();
  }
  write_text(dir / "planar_vectors.csv", a.str());
  write_text(dir / "planar_basis.csv", matrix_csv(s.b_bar_planar, "coordinate", "basis_"));
  CsvWriter o({"basis", "omega0"});
  for (Eigen::Index v = 0; v < s.size(); ++v) {
    o.field(static_cast<long long>(v)).field(s.omega0(v));
    o.end_row();
  }
  write_text(dir / "planar_omega0.csv", o.str());
  write_json(dir / "planar.json", {{"m_ave", s.m_ave},
                                   {"hbar_tilde", s.hbar_tilde},
                                   {"zero_modes", s.zero_modes},
                                   {"crystal_hash", hash},
                                   {"N", s.size() / 2}});
}

/// Reads a stored planar spectrum; the gyroscopic matrix is rebuilt from the crystal
/// and rotated into the stored basis.
inline PlanarSpectrum read_planar(const fs::path& dir, const IonCrystal& c) {
  const json meta = read_json(dir / "planar.json");
  if (meta.at("crystal_hash").get<std::string>() != crystal_hash(c)) {
    throw ValidationError(dir.string() + ": planar spectrum belongs to a different crystal");
  }
  PlanarSpectrum s;
  s.m_ave = meta.at("m_ave").get<double>();
  s.hbar_tilde = meta.at("hbar_tilde").get<double>();
  s.zero_modes = meta.at("zero_modes").get<int>();
  s.species_of = c.species_of;
  s.freqs = csv_column(read_csv(dir / "planar_freqs.csv"), 1);
  const Eigen::MatrixXd ri = csv_matrix(read_csv(dir / "planar_vectors.csv"), 1);
  const Eigen::Index d = 2 * c.size();
  if (s.freqs.size() != d || ri.rows() != d || ri.cols() != 2 * d) {
    throw ValidationError(dir.string() + ": planar eigenvector shape mismatch");
  }
  s.alphas.resize(d, d);
  for (Eigen::Index l = 0; l < d; ++l) {
    for (Eigen::Index v = 0; v < d; ++v) s.alphas(v, l) = {ri(v, 2 * l), ri(v, 2 * l + 1)};
  }
  s.b_bar_planar = csv_matrix(read_csv(dir / "planar_basis.csv"), 1);
  s.omega0 = csv_column(read_csv(dir / "planar_omega0.csv"), 1);
  const PlanarMatrices m = planar_stiffness(c);
  const Eigen::VectorXd masses = c.masses();
  Eigen::VectorXd scale(d);
  scale << masses.cwiseSqrt().cwiseInverse(), masses.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd tbar = s.m_ave * scale.asDiagonal() * m.gyro * scale.asDiagonal();
  const Eigen::MatrixXd tbb = s.b_bar_planar.transpose() * tbar * s.b_bar_planar;
  s.t_bar_bar = 0.5 * (tbb - tbb.transpose());
  s.branch_of = classify_branches(s, c.config);
  return s;
}

// ---------------------------------------------------------------- couplings and analysis

inline std::string coupling_csv(const CouplingMatrix& cm) {
  CsvWriter w({"i", "j", "r", "J"});
  for (Eigen::Index a = 0; a < cm.J.rows(); ++a) {
    for (Eigen::Index b = a; b < cm.J.cols(); ++b) {
      w.field(cm.sites[a]).field(cm.sites[b]).field(cm.r(a, b)).field(cm.J(a, b));
      w.end_row();
    }
  }
  return w.str();
}

inline json fit_to_json(const DriveParams& p, const PowerLawFit& f) {
  return {{"delta", p.delta},         {"mu", p.mu},     {"gamma", f.gamma},
          {"prefactor", f.prefactor}, {"rms_residual", f.rms_residual},
          {"pairs", f.pairs},         {"excluded_pairs", f.excluded_pairs}};
}

inline std::string overlap_csv(const OverlapReport& rep) { return matrix_csv(rep.overlap, "defect_mode", "pure_"); }

inline std::string projection_csv(const AxialSpectrum& pure, const AxialSpectrum& defect, const OverlapReport& rep) {
  CsvWriter w({"mode", "pure_freq", "defect_freq", "shift", "defect_projection"});
  for (Eigen::Index v = 0; v < pure.size(); ++v) {
    w.field(static_cast<long long>(v)).field(pure.freqs(v)).field(defect.freqs(v))
        .field(defect.freqs(v) - pure.freqs(v)).field(rep.defect_projection(v));
    w.end_row();
  }
  return w.str();
}

inline json summary_to_json(const OverlapSummary& s) {
  return {{"diagonal_mean", s.diagonal_mean},
          {"best_match_mean", s.best_match_mean},
          {"on_diagonal_fraction", s.on_diagonal_fraction},
          {"off_diagonal_fraction", s.off_diagonal_fraction},
          {"subdiagonal_fraction", s.subdiagonal_fraction}};
}

}  // namespace penning::io
