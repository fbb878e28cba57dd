#pragma once

// Configuration handling and file formats. Configs are JSON: user input is
// merged over built-in defaults with unknown keys rejected (the error names
// the offending field), then validated into typed specs. Output files embed
// the resolved config and a schema hash.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bulkedge/common.hpp"
#include "bulkedge/lattice_model.hpp"
#include "bulkedge/localization.hpp"
#include "bulkedge/profiles.hpp"
#include "bulkedge/spectral_engine.hpp"

namespace bulkedge {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";

// One-stop description of every column this tool can emit; the shipped
// docs/output_schema.md documents the same tables. Hashed into outputs so a
// reader can detect column drift.
inline const std::string& schema_description() {
  static const std::string text =
      "schema_version=1\n"
      "eigenvalues.csv: index,eigenvalue\n"
      "decay_profile.csv: distance_bin,mean_lognorm,count\n"
      "hall.csv: fermi_energy,seed,hall,hall_commutator,position_local,imag_residual\n"
      "edge.csv: wall_distance,time_scale,seed,sigma_edge,zero_trace,remainder\n"
      "compare.csv: wall_distance,time_scale,seed,sigma_bulk,sigma_edge,abs_diff\n"
      "localize.csv: probe,label,value\n"
      "oracle.csv: flux_p,flux_q,bands,chern,band_lo,band_hi\n"
      "sweep.csv: field,n,mean,stderr,min,max\n"
      "sweep records: jsonl {key,status,payload,error,wall_seconds}\n"
      "realization.bin: uint64 LE site count, then float64 LE on-site values\n";
  return text;
}

inline std::string hex_hash(uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << (h & 0xffffffffu);
  return os.str();
}

inline std::string schema_hash() { return hex_hash(hash_string(schema_description())); }

// ---------------------------------------------------------------------------
// Defaults and strict merging.

inline json default_config() {
  json c;
  c["model"] = {
      {"Lx", 24},
      {"Ly", 24},
      {"flux_p", 1},
      {"flux_q", 3},
      {"shift", 0.0},
      {"W_electric", 0.0},
      {"W_magnetic", 0.0},
      {"seed", 0},
      {"wall",
       {{"present", false},
        {"kind", "electric"},
        {"distance", 8.0},
        {"width", 2.0},
        {"height", 6.0}}},
  };
  c["window"] = {{"lo", 2.1}, {"hi", 3.17}, {"smoothness", "smoothstep5"}};
  c["fermi_energy"] = 2.63;
  c["box_halfwidth"] = 6.0;
  c["switch_half_width"] = 2.0;
  c["kernel"] = "uniform";
  c["T_grid"] = {10.0, 100.0, 1000.0};
  c["a_grid"] = {4.0, 6.0, 8.0};
  c["E_grid"] = json::array();
  c["seeds"] = {0};
  c["workers"] = 1;
  c["format"] = "json";
  c["quadrature"] = {{"order", 5}, {"hu", 0.04}, {"hv", 0.05}, {"refine", 0}};
  c["moment"] = {{"mass", 0.2},    {"zeta", 1.0},      {"bump_lo", 0.0}, {"bump_hi", 0.0},
                 {"shoulder", 0.25}, {"site_stride", 8}, {"time", 100.0}};
  c["ct_energy"] = 1.8;
  c["ct_eta"] = {0.2, 0.5, 1.0, 2.0};
  c["bands"] = 1;
  c["probe"] = "pair";
  c["edge_Lx"] = 32;
  return c;
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Merge src over dst. Every src key must exist in dst with a compatible type;
// objects merge recursively, everything else replaces.
inline void merge_strict(json& dst, const json& src, const std::string& path) {
  if (!src.is_object())
    throw ConfigError("config: expected an object at '" + (path.empty() ? "<root>" : path) + "'");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string p = join_path(path, it.key());
    if (!dst.contains(it.key())) throw ConfigError("config: unknown key '" + p + "'");
    json& d = dst[it.key()];
    const json& s = it.value();
    if (d.is_object()) {
      merge_strict(d, s, p);
    } else if (d.is_number() && s.is_number()) {
      d = s;
    } else if (d.is_array() && s.is_array()) {
      d = s;
    } else if (d.type() == s.type()) {
      d = s;
    } else {
      throw ConfigError("config: wrong type for '" + p + "'");
    }
  }
}

}  // namespace detail

// Resolves user config (possibly empty) over the defaults.
inline json resolve_config(const json& user) {
  json c = default_config();
  detail::merge_strict(c, user, "");
  return c;
}

// Applies one --set override "dotted.path=value". The path must already
// exist; the value is parsed as JSON when possible, else taken as a string.
inline void apply_override(json& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must look like key.path=value, got '" + spec + "'");
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &cfg;
  std::string walked;
  std::istringstream is(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(is, part, '.')) parts.push_back(part);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    walked = detail::join_path(walked, parts[i]);
    if (!node->is_object() || !node->contains(parts[i]))
      throw ConfigError("config: unknown key '" + walked + "'");
    node = &(*node)[parts[i]];
  }
  json patch = json::object();
  patch[parts.back()] = value;
  detail::merge_strict(*node, patch, walked);
}

inline std::string config_hash(const json& resolved) {
  return hex_hash(hash_string(resolved.dump()));
}

// ---------------------------------------------------------------------------
// Typed extraction (validation happens in the specs' validate()).

inline Smoothness smoothness_from_string(const std::string& s) {
  if (s == "smoothstep3") return Smoothness::smoothstep3;
  if (s == "smoothstep5") return Smoothness::smoothstep5;
  if (s == "erf") return Smoothness::erf_profile;
  throw ConfigError("config: unknown smoothness '" + s + "'");
}

inline TimeAverageKernel kernel_from_string(const std::string& s) {
  if (s == "uniform") return TimeAverageKernel::uniform;
  if (s == "exponential") return TimeAverageKernel::exponential;
  throw ConfigError("config: unknown kernel '" + s + "'");
}

inline ModelSpec model_from_config(const json& cfg) {
  const json& m = cfg.at("model");
  ModelSpec spec;
  spec.geometry.Lx = m.at("Lx").get<int>();
  spec.geometry.Ly = m.at("Ly").get<int>();
  spec.flux.p = m.at("flux_p").get<int>();
  spec.flux.q = m.at("flux_q").get<int>();
  spec.shift = m.at("shift").get<double>();
  spec.disorder.W_electric = m.at("W_electric").get<double>();
  spec.disorder.W_magnetic = m.at("W_magnetic").get<double>();
  spec.disorder.seed = m.at("seed").get<uint64_t>();
  const json& w = m.at("wall");
  spec.wall.present = w.at("present").get<bool>();
  const std::string kind = w.at("kind").get<std::string>();
  if (kind == "electric")
    spec.wall.kind = WallSpec::Kind::electric;
  else if (kind == "magnetic")
    spec.wall.kind = WallSpec::Kind::magnetic;
  else
    throw ConfigError("config: unknown key 'model.wall.kind' value '" + kind + "'");
  spec.wall.distance_a = w.at("distance").get<double>();
  spec.wall.width = w.at("width").get<double>();
  spec.wall.height = w.at("height").get<double>();
  return spec;
}

inline EnergyWindow window_from_config(const json& cfg) {
  const json& w = cfg.at("window");
  EnergyWindow win;
  win.lo = w.at("lo").get<double>();
  win.hi = w.at("hi").get<double>();
  win.smoothness = smoothness_from_string(w.at("smoothness").get<std::string>());
  win.validate();
  return win;
}

inline SwitchProfile switch_from_config(const json& cfg) {
  SwitchProfile p;
  p.half_width = cfg.at("switch_half_width").get<double>();
  if (p.half_width <= 0) throw ConfigError("config: 'switch_half_width' must be > 0");
  return p;
}

// ---------------------------------------------------------------------------
// Writers. CSV files start with commented metadata lines carrying the schema
// hash and the full resolved config, then a header row.

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot open output file " + p.string());
  return out;
}

}  // namespace detail

// Full-precision, locale-independent double formatting for CSV cells.
inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_csv_text(const std::filesystem::path& path, const json& resolved_config,
                           const std::string& header,
                           const std::vector<std::vector<std::string>>& rows) {
  auto out = detail::open_out(path);
  out << "# schema_version=" << kSchemaVersion << "\n";
  out << "# schema_hash=" << schema_hash() << "\n";
  out << "# config_hash=" << config_hash(resolved_config) << "\n";
  out << "# config=" << resolved_config.dump() << "\n";
  out << header << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw NumericalError("short write on " + path.string());
}

inline void write_csv(const std::filesystem::path& path, const json& resolved_config,
                      const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::string>> srows;
  srows.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::string> r;
    r.reserve(row.size());
    for (double v : row) r.push_back(fmt_num(v));
    srows.push_back(std::move(r));
  }
  write_csv_text(path, resolved_config, header, srows);
}

inline void write_json_output(const std::filesystem::path& path, const json& resolved_config,
                              const json& results, const std::vector<std::string>& warnings = {}) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["schema_hash"] = schema_hash();
  doc["config_hash"] = config_hash(resolved_config);
  doc["config"] = resolved_config;
  doc["results"] = results;
  doc["warnings"] = warnings;
  auto out = detail::open_out(path);
  out << doc.dump(2) << "\n";
  if (!out) throw NumericalError("short write on " + path.string());
}

// On-site disorder snapshot: uint64 LE count followed by float64 LE values.
inline void write_realization_binary(const std::filesystem::path& path, const RVec& values) {
  auto out = detail::open_out(path);
  const uint64_t n = static_cast<uint64_t>(values.size());
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(values.data()), 8 * values.size());
  if (!out) throw NumericalError("short write on " + path.string());
}

inline RVec read_realization_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ConfigError("cannot open " + path.string());
  const auto bytes = static_cast<uint64_t>(in.tellg());
  in.seekg(0);
  uint64_t n = 0;
  if (bytes < 8) throw ConfigError("truncated realization file " + path.string());
  in.read(reinterpret_cast<char*>(&n), 8);
  if (bytes != 8 + 8 * n)
    throw ConfigError("realization file size mismatch in " + path.string());
  RVec v(static_cast<int>(n));
  in.read(reinterpret_cast<char*>(v.data()), 8 * n);
  if (!in) throw ConfigError("short read on " + path.string());
  return v;
}

inline void write_eigenvalue_csv(const std::filesystem::path& path, const json& resolved_config,
                                 const RVec& lam) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < lam.size(); ++i)
    rows.push_back({static_cast<double>(i), lam[i]});
  write_csv(path, resolved_config, "index,eigenvalue", rows);
}

inline void write_decay_csv(const std::filesystem::path& path, const json& resolved_config,
                            const std::vector<DecayBin>& bins) {
  std::vector<std::vector<double>> rows;
  for (const auto& b : bins)
    rows.push_back({b.distance, b.mean_lognorm, static_cast<double>(b.count)});
  write_csv(path, resolved_config, "distance_bin,mean_lognorm,count", rows);
}

}  // namespace bulkedge
