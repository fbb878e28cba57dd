#pragma once

// Command line front end. Subcommands: bulk, edge, compare, localize,
// oracle, sweep. Each reads a JSON config (defaults, optional --config file,
// then --set overrides), computes, and writes <subcommand>_<confighash>.<ext>
// into --out. Exit codes: 0 ok (warnings allowed), 2 invalid config,
// 3 numerical failure or failed sweep tasks.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bulkedge/common.hpp"
#include "bulkedge/conductance.hpp"
#include "bulkedge/ensemble.hpp"
#include "bulkedge/io.hpp"
#include "bulkedge/lattice_model.hpp"
#include "bulkedge/localization.hpp"
#include "bulkedge/spectral_engine.hpp"

namespace bulkedge::cli {

namespace fs = std::filesystem;

struct CommandOutput {
  json results;
  std::string csv_header;
  std::vector<std::vector<std::string>> rows;
  int failed_tasks = 0;
};

namespace detail {

inline std::vector<double> grid_from(const json& cfg, const char* key) {
  std::vector<double> v = cfg.at(key).get<std::vector<double>>();
  if (v.empty()) throw ConfigError(std::string("config: '") + key + "' must not be empty");
  return v;
}

inline std::vector<uint64_t> seeds_from(const json& cfg) {
  std::vector<uint64_t> v = cfg.at("seeds").get<std::vector<uint64_t>>();
  if (v.empty()) throw ConfigError("config: 'seeds' must not be empty");
  return v;
}

inline std::vector<double> energies_from(const json& cfg) {
  std::vector<double> es = cfg.at("E_grid").get<std::vector<double>>();
  if (es.empty()) es.push_back(cfg.at("fermi_energy").get<double>());
  return es;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// bulk: transport coefficients of the translation-covariant sample on the
// torus, three independent formulas per (fermi energy, seed), plus the
// clean-system band invariant for the configured flux.

inline CommandOutput run_bulk(const json& cfg, const fs::path& out_dir, const std::string& stem,
                              std::vector<std::string>& warnings) {
  ModelSpec spec = model_from_config(cfg);
  spec.wall.present = false;  // bulk samples never carry a wall
  spec.geometry.bc_x1 = BC::periodic;
  spec.geometry.bc_x2 = BC::periodic;
  spec.validate();
  const SwitchProfile prof = switch_from_config(cfg);
  const double hw = cfg.at("box_halfwidth").get<double>();
  const auto energies = detail::energies_from(cfg);
  const auto seeds = detail::seeds_from(cfg);

  CommandOutput out;
  out.csv_header = "fermi_energy,seed,hall,hall_commutator,position_local,imag_residual";
  json rows = json::array();
  json first_spectrum;
  RVec first_eigs;
  for (size_t si = 0; si < seeds.size(); ++si) {
    spec.disorder.seed = seeds[si];
    const HamiltonianMatrix hm = build_bulk(spec);
    const SpectralData sd = diagonalize(hm);
    if (si == 0) {
      first_eigs = sd.eigenvalues;
      first_spectrum = {{"min", sd.eigenvalues.minCoeff()},
                        {"max", sd.eigenvalues.maxCoeff()},
                        {"count", sd.dim()}};
    }
    const RVec l1 = switch_diagonal(spec.geometry, prof, 1, true);
    const RVec l2 = switch_diagonal(spec.geometry, prof, 2, true);
    for (double E : energies) {
      const Mat P = fermi_projector(sd, E);
      const HallResult h = hall_switch(P, l1, l2, spec.geometry, hw);
      const HallResult hdc = hall_double_commutator(P, l1, l2, spec.geometry, hw);
      const PositionLocalResult pl = hall_position_local(P, spec.geometry);
      if (h.imag_flagged)
        warnings.push_back("bulk: trace imaginary residual " + fmt_num(h.imag_residual) +
                           " at E=" + fmt_num(E) + " seed=" + std::to_string(seeds[si]));
      if (pl.boundary_flagged)
        warnings.push_back("bulk: position-local marker window touches the sample boundary");
      json r;
      r["fermi_energy"] = E;
      r["seed"] = seeds[si];
      r["hall"] = h.value;
      r["hall_commutator"] = hdc.value;
      r["position_local"] = pl.value;
      r["imag_residual"] = h.imag_residual;
      rows.push_back(r);
      out.rows.push_back({fmt_num(E), std::to_string(seeds[si]), fmt_num(h.value),
                          fmt_num(hdc.value), fmt_num(pl.value), fmt_num(h.imag_residual)});
    }
  }
  out.results["rows"] = rows;
  out.results["spectrum"] = first_spectrum;

  if (spec.flux.q >= 2) {
    const int bands = cfg.at("bands").get<int>();
    if (bands < 1 || bands > spec.flux.q - 1)
      throw ConfigError("config: 'bands' must lie in [1, flux_q - 1]");
    out.results["chern"] = chern_oracle(spec.flux, bands, 30, spec.shift);
    const auto band = clean_band_interval(spec.flux, bands - 1, 24, spec.shift);
    out.results["band"] = {band.first, band.second};
  } else {
    out.results["chern"] = nullptr;
    warnings.push_back("bulk: flux_q=1 has no gapped band structure, skipping the invariant");
  }
  write_eigenvalue_csv(out_dir / (stem + "_eigenvalues.csv"), cfg, first_eigs);
  return out;
}

// ---------------------------------------------------------------------------
// edge: regularized boundary conductance on the walled cylinder over the
// (wall distance, time scale) grid, with the exact trace identity and the
// regularization remainder alongside.

inline CommandOutput run_edge(const json& cfg, const fs::path& out_dir, const std::string& stem,
                              std::vector<std::string>& warnings, int workers) {
  ModelSpec base = model_from_config(cfg);
  if (!base.wall.present)
    throw ConfigError("edge: set model.wall.present=true (the edge sample needs its wall)");
  base.geometry.bc_x1 = BC::open;
  const EnergyWindow win = window_from_config(cfg);
  const TimeAverageKernel kernel = kernel_from_string(cfg.at("kernel").get<std::string>());
  const SwitchProfile prof = switch_from_config(cfg);
  const auto a_grid = detail::grid_from(cfg, "a_grid");
  const auto t_grid = detail::grid_from(cfg, "T_grid");
  const auto seeds = detail::seeds_from(cfg);
  for (double a : a_grid) {
    ModelSpec s = base;
    s.wall.distance_a = a;
    s.validate();
    if (a + s.wall.width >= s.geometry.Lx / 2.0)
      throw ConfigError("edge: wall at a=" + fmt_num(a) + " reaches past the sample center");
  }

  struct Task {
    uint64_t seed;
    double a;
  };
  std::vector<std::string> keys;
  std::vector<Task> tasks;
  for (uint64_t s : seeds)
    for (double a : a_grid) {
      keys.push_back("seed=" + std::to_string(s) + "/a=" + fmt_num(a));
      tasks.push_back({s, a});
    }
  std::map<std::string, Task> by_key;
  for (size_t i = 0; i < keys.size(); ++i) by_key[keys[i]] = tasks[i];

  auto fn = [&](const std::string& key) -> json {
    const Task t = by_key.at(key);
    ModelSpec s = base;
    s.disorder.seed = t.seed;
    s.wall.distance_a = t.a;
    const HamiltonianMatrix hm = build_edge(s);
    const SpectralData sd = diagonalize(hm);
    const RVec l1 = switch_diagonal(s.geometry, prof, 1);
    const RVec l2 = switch_diagonal(s.geometry, prof, 2, true);
    const EdgeOperators eo = make_edge_operators(hm, sd, l1, l2);
    json p;
    p["zero_trace"] = zero_trace_check(sd, l1, l2, win);
    p["sigma_edge_unreg"] = edge_conductance_regularized(eo, win, 0.0, kernel);
    json se = json::array(), rem = json::array();
    for (double T : t_grid) {
      se.push_back(edge_conductance_regularized(eo, win, T, kernel));
      rem.push_back(remainder_trace_average(eo, win, T, kernel));
    }
    p["sigma_edge"] = se;
    p["remainder"] = rem;
    p["sigma_edge_final"] = se.back();
    p["remainder_final"] = rem.back();
    return p;
  };
  const auto results = execute_sweep(keys, fn, workers, out_dir / (stem + "_records.jsonl"));

  CommandOutput out;
  out.csv_header = "wall_distance,time_scale,seed,sigma_edge,zero_trace,remainder";
  json rows = json::array();
  for (size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.status != "done") {
      ++out.failed_tasks;
      warnings.push_back("edge: task " + r.key + " failed: " + r.error);
      continue;
    }
    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
      const double se = r.payload.at("sigma_edge")[ti].get<double>();
      const double rm = r.payload.at("remainder")[ti].get<double>();
      json row;
      row["wall_distance"] = tasks[i].a;
      row["time_scale"] = t_grid[ti];
      row["seed"] = tasks[i].seed;
      row["sigma_edge"] = se;
      row["zero_trace"] = r.payload.at("zero_trace").get<double>();
      row["remainder"] = rm;
      rows.push_back(row);
      out.rows.push_back({fmt_num(tasks[i].a), fmt_num(t_grid[ti]), std::to_string(tasks[i].seed),
                          fmt_num(se), fmt_num(r.payload.at("zero_trace").get<double>()),
                          fmt_num(rm)});
    }
  }
  out.results["rows"] = rows;
  out.results["aggregate"] = aggregate_sweep(results);
  return out;
}

// ---------------------------------------------------------------------------
// compare: paired bulk/edge samples sharing disorder through the physical
// coordinate keying; reports the deviation table over (wall distance, time
// scale) and tail statistics at the largest wall distance and time.

inline CommandOutput run_compare(const json& cfg, const fs::path& out_dir, const std::string& stem,
                                 std::vector<std::string>& warnings, int workers) {
  ModelSpec bspec = model_from_config(cfg);
  bspec.wall.present = false;  // the wall belongs to the edge sample only
  bspec.geometry.bc_x1 = BC::periodic;
  bspec.geometry.bc_x2 = BC::periodic;
  bspec.validate();
  ModelSpec espec = model_from_config(cfg);
  espec.geometry.Lx = cfg.at("edge_Lx").get<int>();
  espec.geometry.bc_x1 = BC::open;
  espec.wall.present = true;

  const EnergyWindow win = window_from_config(cfg);
  const double EF = cfg.at("fermi_energy").get<double>();
  const TimeAverageKernel kernel = kernel_from_string(cfg.at("kernel").get<std::string>());
  const SwitchProfile prof = switch_from_config(cfg);
  const double hw = cfg.at("box_halfwidth").get<double>();
  const auto a_grid = detail::grid_from(cfg, "a_grid");
  const auto t_grid = detail::grid_from(cfg, "T_grid");
  const auto seeds = detail::seeds_from(cfg);
  for (double a : a_grid) {
    ModelSpec s = espec;
    s.wall.distance_a = a;
    s.validate();
  }

  std::vector<std::string> keys;
  for (uint64_t s : seeds) keys.push_back("seed=" + std::to_string(s));
  std::map<std::string, uint64_t> seed_by_key;
  for (size_t i = 0; i < keys.size(); ++i) seed_by_key[keys[i]] = seeds[i];

  auto fn = [&](const std::string& key) -> json {
    const uint64_t seed = seed_by_key.at(key);
    ModelSpec bs = bspec;
    bs.disorder.seed = seed;
    const HamiltonianMatrix hb = build_bulk(bs);
    const SpectralData sb = diagonalize(hb);
    const Mat P = fermi_projector(sb, EF);
    const RVec l1b = switch_diagonal(bs.geometry, prof, 1, true);
    const RVec l2b = switch_diagonal(bs.geometry, prof, 2, true);
    const double sigma_b = hall_switch(P, l1b, l2b, bs.geometry, hw).value;

    json se_table = json::array();
    double se_final = 0.0;
    for (double a : a_grid) {
      ModelSpec es = espec;
      es.disorder.seed = seed;
      es.wall.distance_a = a;
      const HamiltonianMatrix he = build_edge(es);
      const SpectralData sd = diagonalize(he);
      const RVec l1 = switch_diagonal(es.geometry, prof, 1);
      const RVec l2 = switch_diagonal(es.geometry, prof, 2, true);
      const EdgeOperators eo = make_edge_operators(he, sd, l1, l2);
      json per_t = json::array();
      for (double T : t_grid) per_t.push_back(edge_conductance_regularized(eo, win, T, kernel));
      se_final = per_t.back().get<double>();
      se_table.push_back(per_t);
    }
    json p;
    p["sigma_bulk"] = sigma_b;
    p["sigma_edge_table"] = se_table;
    p["sigma_edge_final"] = se_final;
    p["abs_diff_final"] = std::abs(sigma_b - se_final);
    return p;
  };
  const auto results = execute_sweep(keys, fn, workers, out_dir / (stem + "_records.jsonl"));

  CommandOutput out;
  out.csv_header = "wall_distance,time_scale,seed,sigma_bulk,sigma_edge,abs_diff";
  json rows = json::array();
  std::vector<double> final_diffs;
  for (size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.status != "done") {
      ++out.failed_tasks;
      warnings.push_back("compare: task " + r.key + " failed: " + r.error);
      continue;
    }
    const double sb = r.payload.at("sigma_bulk").get<double>();
    for (size_t ai = 0; ai < a_grid.size(); ++ai)
      for (size_t ti = 0; ti < t_grid.size(); ++ti) {
        const double se = r.payload.at("sigma_edge_table")[ai][ti].get<double>();
        json row;
        row["wall_distance"] = a_grid[ai];
        row["time_scale"] = t_grid[ti];
        row["seed"] = seeds[i];
        row["sigma_bulk"] = sb;
        row["sigma_edge"] = se;
        row["abs_diff"] = std::abs(sb - se);
        rows.push_back(row);
        out.rows.push_back({fmt_num(a_grid[ai]), fmt_num(t_grid[ti]), std::to_string(seeds[i]),
                            fmt_num(sb), fmt_num(se), fmt_num(std::abs(sb - se))});
      }
    final_diffs.push_back(r.payload.at("abs_diff_final").get<double>());
  }
  out.results["rows"] = rows;
  out.results["aggregate"] = aggregate_sweep(results);
  if (!final_diffs.empty())
    out.results["p90_abs_diff_final"] = quantile(final_diffs, 0.9);
  else
    out.results["p90_abs_diff_final"] = nullptr;
  return out;
}

// ---------------------------------------------------------------------------
// localize: dynamical moment averages with their growth ratio, projector and
// commutator kernel decay fits, and resolvent decay rates off the real axis.

inline CommandOutput run_localize(const json& cfg, const fs::path& out_dir,
                                  const std::string& stem, std::vector<std::string>& warnings) {
  ModelSpec spec = model_from_config(cfg);
  spec.wall.present = false;
  spec.geometry.bc_x1 = BC::periodic;
  spec.geometry.bc_x2 = BC::periodic;
  spec.validate();
  const json& mj = cfg.at("moment");
  const double mass = mj.at("mass").get<double>();
  const double zeta = mj.at("zeta").get<double>();
  const int stride = mj.at("site_stride").get<int>();
  if (stride < 1 || stride > spec.geometry.Lx)
    throw ConfigError("config: 'moment.site_stride' out of range");
  EnergyBump bump{mj.at("bump_lo").get<double>(), mj.at("bump_hi").get<double>(),
                  mj.at("shoulder").get<double>()};
  if (bump.lo >= bump.hi) {
    // default target: the lowest clean band, padded by one bandwidth so its
    // states sit on the bump plateau
    const auto band = clean_band_interval(spec.flux, 0, 24, spec.shift);
    const double bw = band.second - band.first;
    bump = EnergyBump{band.first - bw, band.second + bw, mj.at("shoulder").get<double>()};
  }
  bump.validate();
  const auto t_grid = detail::grid_from(cfg, "T_grid");
  const auto seeds = detail::seeds_from(cfg);
  const double EF = cfg.at("fermi_energy").get<double>();
  const SwitchProfile prof = switch_from_config(cfg);
  const double ct_E = cfg.at("ct_energy").get<double>();
  const auto ct_eta = cfg.at("ct_eta").get<std::vector<double>>();
  if (ct_eta.empty()) throw ConfigError("config: 'ct_eta' must not be empty");

  CommandOutput out;
  out.csv_header = "probe,label,value";
  auto push = [&out](const std::string& probe, double label, double value) {
    out.rows.push_back({probe, fmt_num(label), fmt_num(value)});
  };

  const auto sites = sample_sites(spec.geometry, stride);
  std::vector<std::vector<double>> per_T(t_grid.size());
  SpectralData first_sd;
  for (size_t si = 0; si < seeds.size(); ++si) {
    spec.disorder.seed = seeds[si];
    const SpectralData sd = diagonalize(build_bulk(spec));
    if (si == 0) first_sd = sd;
    for (size_t ti = 0; ti < t_grid.size(); ++ti)
      per_T[ti].push_back(
          averaged_moment_single(sd, spec.geometry, sites, bump, mass, zeta, t_grid[ti]));
  }
  json moments = json::array();
  for (size_t ti = 0; ti < t_grid.size(); ++ti) {
    const MeanStderr ms = mean_stderr(per_T[ti]);
    json m;
    m["T"] = t_grid[ti];
    m["mean"] = ms.mean;
    m["stderr"] = ms.stderr_;
    moments.push_back(m);
    push("moment_avg", t_grid[ti], ms.mean);
    push("moment_stderr", t_grid[ti], ms.stderr_);
  }
  if (mean_stderr(per_T.front()).mean <= 0.0)
    warnings.push_back("localize: the bump window holds no spectral weight; set moment.bump_lo/hi");
  const double growth =
      mean_stderr(per_T.back()).mean / std::max(mean_stderr(per_T.front()).mean, 1e-300);
  push("moment_growth", 0.0, growth);
  const double t_single = mj.at("time").get<double>();
  const double m_single =
      moment(first_sd, spec.geometry, sites.front(), bump, mass, zeta, t_single);
  push("moment_single_time", t_single, m_single);
  out.results["moment"] = {{"per_T", moments},
                           {"growth", growth},
                           {"bump", {bump.lo, bump.hi}},
                           {"single_time", m_single},
                           {"sites", sites.size()}};

  // projector kernel decay on the first realization
  const Mat P = fermi_projector(first_sd, EF);
  const auto pd = projector_kernel_decay(P, spec.geometry);
  push("projector_rate", 0.0, pd.fit.m);
  push("projector_rms", 0.0, pd.fit.fit_residual);
  out.results["projector_decay"] = {{"rate", pd.fit.m},
                                    {"rms", pd.fit.fit_residual},
                                    {"bins", pd.fit.bins}};
  write_decay_csv(out_dir / (stem + "_decay.csv"), cfg, pd.profile);

  // commutator kernel decay on a fully open box (a step on a periodic axis
  // would jump twice)
  {
    ModelSpec os = spec;
    os.geometry.bc_x1 = BC::open;
    os.geometry.bc_x2 = BC::open;
    os.disorder.seed = seeds.front();
    const SpectralData sd = diagonalize(build_edge(os));
    const Mat Po = fermi_projector(sd, EF);
    const RVec l2 = switch_diagonal(os.geometry, prof, 2);
    const auto cd = commutator_kernel_decay(Po, l2, os.geometry);
    push("commutator_along_rate", 0.0, cd.along_step.m);
    push("commutator_endpoint_x_rate", 0.0, cd.endpoint_x.m);
    push("commutator_endpoint_y_rate", 0.0, cd.endpoint_y.m);
    push("commutator_same_side_max", 0.0, cd.same_side_deep_max);
    out.results["commutator_decay"] = {{"along_rate", cd.along_step.m},
                                       {"endpoint_x_rate", cd.endpoint_x.m},
                                       {"endpoint_y_rate", cd.endpoint_y.m},
                                       {"same_side_deep_max", cd.same_side_deep_max}};
  }

  // resolvent decay vs distance from the spectrum
  {
    spec.disorder.seed = seeds.front();
    const HamiltonianMatrix hm = build_bulk(spec);
    std::vector<cplx> zs;
    for (double eta : ct_eta) zs.push_back(cplx(ct_E, eta));
    const auto ct = combes_thomas_check(hm.H, spec.geometry, zs);
    json ctj = json::array();
    double prev = -1.0;
    bool monotone = true;
    for (const auto& r : ct) {
      push("ct_rate", r.eta, r.fit.m);
      json c;
      c["eta"] = r.eta;
      c["rate"] = r.fit.m;
      ctj.push_back(c);
      if (r.fit.m < prev) monotone = false;
      prev = r.fit.m;
    }
    if (!monotone) warnings.push_back("localize: resolvent decay rate not monotone in eta");
    out.results["resolvent_decay"] = {{"rows", ctj}, {"monotone", monotone}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// oracle: clean-system invariants for the configured flux, one row per
// number of filled bands.

inline CommandOutput run_oracle(const json& cfg, const fs::path&, const std::string&,
                                std::vector<std::string>&) {
  ModelSpec spec = model_from_config(cfg);
  spec.flux.validate();
  if (spec.flux.q < 2)
    throw ConfigError("oracle: flux_q must be >= 2 to have gapped bands");
  const int bands = cfg.at("bands").get<int>();
  if (bands < 1 || bands > spec.flux.q - 1)
    throw ConfigError("config: 'bands' must lie in [1, flux_q - 1]");

  CommandOutput out;
  out.csv_header = "flux_p,flux_q,bands,chern,band_lo,band_hi";
  json rows = json::array();
  for (int nb = 1; nb <= bands; ++nb) {
    const int c = chern_oracle(spec.flux, nb, 30, spec.shift);
    const auto band = clean_band_interval(spec.flux, nb - 1, 24, spec.shift);
    json r;
    r["flux_p"] = spec.flux.p;
    r["flux_q"] = spec.flux.q;
    r["bands"] = nb;
    r["chern"] = c;
    r["band_lo"] = band.first;
    r["band_hi"] = band.second;
    rows.push_back(r);
    out.rows.push_back({std::to_string(spec.flux.p), std::to_string(spec.flux.q),
                        std::to_string(nb), std::to_string(c), fmt_num(band.first),
                        fmt_num(band.second)});
  }
  out.results["rows"] = rows;
  return out;
}

// ---------------------------------------------------------------------------
// sweep: keyed disorder sweep for one probe ("hall", "edge", or "pair"),
// with resumable records and order-independent aggregation.

inline CommandOutput run_sweep(const json& cfg, const fs::path& out_dir, const std::string& stem,
                               std::vector<std::string>& warnings, int workers) {
  const std::string probe = cfg.at("probe").get<std::string>();
  const auto seeds = detail::seeds_from(cfg);
  const SwitchProfile prof = switch_from_config(cfg);
  const double hw = cfg.at("box_halfwidth").get<double>();
  const double EF = cfg.at("fermi_energy").get<double>();

  std::vector<std::string> keys;
  TaskFn fn;

  if (probe == "hall") {
    ModelSpec spec = model_from_config(cfg);
    spec.wall.present = false;
    spec.geometry.bc_x1 = BC::periodic;
    spec.geometry.bc_x2 = BC::periodic;
    spec.validate();
    const auto energies = detail::energies_from(cfg);
    struct Task {
      uint64_t seed;
      double E;
    };
    auto by_key = std::make_shared<std::map<std::string, Task>>();
    for (uint64_t s : seeds)
      for (double E : energies) {
        std::string k = "seed=" + std::to_string(s) + "/E=" + fmt_num(E);
        keys.push_back(k);
        (*by_key)[k] = {s, E};
      }
    fn = [spec, prof, hw, by_key](const std::string& key) -> json {
      const auto t = by_key->at(key);
      ModelSpec s = spec;
      s.disorder.seed = t.seed;
      const SpectralData sd = diagonalize(build_bulk(s));
      const Mat P = fermi_projector(sd, t.E);
      const RVec l1 = switch_diagonal(s.geometry, prof, 1, true);
      const RVec l2 = switch_diagonal(s.geometry, prof, 2, true);
      const HallResult h = hall_switch(P, l1, l2, s.geometry, hw);
      json p;
      p["hall"] = h.value;
      p["imag_residual"] = h.imag_residual;
      return p;
    };
  } else if (probe == "edge" || probe == "pair") {
    ModelSpec bspec = model_from_config(cfg);
    bspec.wall.present = false;
    bspec.geometry.bc_x1 = BC::periodic;
    bspec.geometry.bc_x2 = BC::periodic;
    bspec.validate();
    ModelSpec espec = model_from_config(cfg);
    espec.geometry.bc_x1 = BC::open;
    espec.wall.present = true;
    if (probe == "pair") espec.geometry.Lx = cfg.at("edge_Lx").get<int>();
    const EnergyWindow win = window_from_config(cfg);
    const TimeAverageKernel kernel = kernel_from_string(cfg.at("kernel").get<std::string>());
    const double T = detail::grid_from(cfg, "T_grid").back();
    const auto a_grid = detail::grid_from(cfg, "a_grid");
    struct Task {
      uint64_t seed;
      double a;
    };
    auto by_key = std::make_shared<std::map<std::string, Task>>();
    for (uint64_t s : seeds)
      for (double a : a_grid) {
        std::string k = "seed=" + std::to_string(s) + "/a=" + fmt_num(a);
        keys.push_back(k);
        (*by_key)[k] = {s, a};
      }
    const bool paired = probe == "pair";
    fn = [bspec, espec, prof, win, kernel, T, hw, EF, paired,
          by_key](const std::string& key) -> json {
      const auto t = by_key->at(key);
      ModelSpec es = espec;
      es.disorder.seed = t.seed;
      es.wall.distance_a = t.a;
      es.validate();
      const HamiltonianMatrix he = build_edge(es);
      const SpectralData sd = diagonalize(he);
      const RVec l1 = switch_diagonal(es.geometry, prof, 1);
      const RVec l2 = switch_diagonal(es.geometry, prof, 2, true);
      const EdgeOperators eo = make_edge_operators(he, sd, l1, l2);
      const double se = edge_conductance_regularized(eo, win, T, kernel);
      json p;
      p["sigma_edge"] = se;
      p["zero_trace"] = zero_trace_check(sd, l1, l2, win);
      if (paired) {
        ModelSpec bs = bspec;
        bs.disorder.seed = t.seed;
        const SpectralData sb = diagonalize(build_bulk(bs));
        const Mat P = fermi_projector(sb, EF);
        const RVec l1b = switch_diagonal(bs.geometry, prof, 1, true);
        const RVec l2b = switch_diagonal(bs.geometry, prof, 2, true);
        const double sigma_b = hall_switch(P, l1b, l2b, bs.geometry, hw).value;
        p["sigma_bulk"] = sigma_b;
        p["abs_diff"] = std::abs(sigma_b - se);
      }
      return p;
    };
  } else {
    throw ConfigError("config: 'probe' must be one of hall, edge, pair");
  }

  const auto results = execute_sweep(keys, fn, workers, out_dir / (stem + "_records.jsonl"));
  CommandOutput out;
  json tasks = json::array();
  for (const auto& r : results) {
    json t;
    t["key"] = r.key;
    t["status"] = r.status;
    if (r.status == "done") {
      t["payload"] = r.payload;
    } else {
      ++out.failed_tasks;
      t["error"] = r.error;
      warnings.push_back("sweep: task " + r.key + " failed: " + r.error);
    }
    tasks.push_back(t);
  }
  const json agg = aggregate_sweep(results);
  out.results["tasks"] = tasks;
  out.results["aggregate"] = agg;
  out.csv_header = "field,n,mean,stderr,min,max";
  for (auto it = agg.at("fields").begin(); it != agg.at("fields").end(); ++it) {
    const json& f = it.value();
    out.rows.push_back({it.key(), std::to_string(f.at("n").get<long>()),
                        fmt_num(f.at("mean").get<double>()), fmt_num(f.at("stderr").get<double>()),
                        fmt_num(f.at("min").get<double>()), fmt_num(f.at("max").get<double>())});
  }
  return out;
}

// Subcommand-independent validation of the resolved config, so an invalid
// field is rejected even by subcommands that do not consume it.
inline void validate_common(const json& cfg) {
  ModelSpec spec = model_from_config(cfg);
  spec.geometry.validate();
  spec.flux.validate();
  spec.disorder.validate();
  if (spec.wall.present) spec.wall.validate();
  window_from_config(cfg);
  switch_from_config(cfg);
  kernel_from_string(cfg.at("kernel").get<std::string>());
  for (const char* key : {"T_grid", "a_grid"})
    for (double v : detail::grid_from(cfg, key))
      if (v < 0.0) throw ConfigError(std::string("config: '") + key + "' values must be >= 0");
  detail::seeds_from(cfg);
  if (cfg.at("box_halfwidth").get<double>() <= 0.0)
    throw ConfigError("config: 'box_halfwidth' must be > 0");
  if (cfg.at("edge_Lx").get<int>() < 2) throw ConfigError("config: 'edge_Lx' must be >= 2");
  if (cfg.at("bands").get<int>() < 1) throw ConfigError("config: 'bands' must be >= 1");
  const json& mj = cfg.at("moment");
  if (mj.at("mass").get<double>() < 0.0) throw ConfigError("config: 'moment.mass' must be >= 0");
  if (mj.at("zeta").get<double>() <= 0.0) throw ConfigError("config: 'moment.zeta' must be > 0");
  const double sh = mj.at("shoulder").get<double>();
  if (sh <= 0.0 || sh > 0.5)
    throw ConfigError("config: 'moment.shoulder' must lie in (0, 0.5]");
  if (mj.at("site_stride").get<int>() < 1)
    throw ConfigError("config: 'moment.site_stride' must be >= 1");
  if (cfg.at("ct_eta").get<std::vector<double>>().empty())
    throw ConfigError("config: 'ct_eta' must not be empty");
  const std::string probe = cfg.at("probe").get<std::string>();
  if (probe != "hall" && probe != "edge" && probe != "pair")
    throw ConfigError("config: 'probe' must be one of hall, edge, pair");
}

// ---------------------------------------------------------------------------
// Entry point. Returns the process exit code.

inline int run(const std::vector<std::string>& args) {
  CLI::App app{"bulk and edge transport on disordered magnetic lattices"};
  app.require_subcommand(1);

  std::string config_path, out_str = ".", format_flag;
  std::vector<std::string> sets;
  int workers_flag = 0;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"bulk", "bulk transport coefficients on the torus"},
      {"edge", "regularized boundary conductance on the walled cylinder"},
      {"compare", "paired bulk/edge deviation table with shared disorder"},
      {"localize", "dynamical moments, kernel decay fits, resolvent decay"},
      {"oracle", "clean-system band invariants"},
      {"sweep", "keyed disorder sweep with resumable records"},
  };
  for (const auto& [name, desc] : subs) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->add_option("--config", config_path, "JSON config file");
    s->add_option("--set", sets, "override, dotted.path=value (repeatable)");
    s->add_option("--out", out_str, "output directory");
    s->add_option("--workers", workers_flag, "worker threads");
    s->add_option("--format", format_flag, "csv or json");
  }

  std::vector<const char*> argv;
  argv.push_back("bulkedge");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 2;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    json user = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      user = json::parse(in, nullptr, false);
      if (user.is_discarded())
        throw ConfigError("config file is not valid JSON: " + config_path);
    }
    json cfg = resolve_config(user);
    for (const auto& s : sets) apply_override(cfg, s);
    if (workers_flag > 0) cfg["workers"] = workers_flag;
    if (!format_flag.empty()) cfg["format"] = format_flag;

    const std::string format = cfg.at("format").get<std::string>();
    if (format != "csv" && format != "json")
      throw ConfigError("config: 'format' must be csv or json");
    const int workers = cfg.at("workers").get<int>();
    if (workers < 1) throw ConfigError("config: 'workers' must be >= 1");

    // execution-only keys do not change results, so they stay out of the
    // resolved config embedded in (and hashing) the outputs
    json cfg_c = cfg;
    cfg_c.erase("workers");
    cfg_c.erase("format");
    validate_common(cfg_c);

    const fs::path out_dir(out_str);
    const std::string stem = sub + "_" + config_hash(cfg_c);
    std::vector<std::string> warnings;

    CommandOutput o;
    if (sub == "bulk")
      o = run_bulk(cfg_c, out_dir, stem, warnings);
    else if (sub == "edge")
      o = run_edge(cfg_c, out_dir, stem, warnings, workers);
    else if (sub == "compare")
      o = run_compare(cfg_c, out_dir, stem, warnings, workers);
    else if (sub == "localize")
      o = run_localize(cfg_c, out_dir, stem, warnings);
    else if (sub == "oracle")
      o = run_oracle(cfg_c, out_dir, stem, warnings);
    else
      o = run_sweep(cfg_c, out_dir, stem, warnings, workers);

    if (format == "json")
      write_json_output(out_dir / (stem + ".json"), cfg_c, o.results, warnings);
    else
      write_csv_text(out_dir / (stem + ".csv"), cfg_c, o.csv_header, o.rows);
    std::cout << (out_dir / (stem + "." + format)).string() << "\n";

    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return o.failed_tasks > 0 ? 3 : 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace bulkedge::cli
