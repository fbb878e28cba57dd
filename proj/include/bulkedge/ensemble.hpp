#pragma once

// Deterministic disorder-ensemble execution: keyed tasks, append-only run
// records with resume, order-independent aggregation, and the paired
// bulk/edge comparison with shared disorder in the overlap region.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bulkedge/common.hpp"
#include "bulkedge/conductance.hpp"
#include "bulkedge/lattice_model.hpp"
#include "bulkedge/spectral_engine.hpp"

namespace bulkedge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Task records. A sweep is a list of stable string keys plus a worker
// function mapping key -> json payload. Records are appended to a JSONL file
// as tasks finish; rerunning with the same file skips tasks already done.

struct TaskResult {
  std::string key;
  std::string status;  // "done" or "failed"
  json payload;        // worker output (empty on failure)
  std::string error;   // exception text on failure
  double wall_seconds = 0.0;
};

// Derives the per-task seed from a base seed and the task key, so seeds are
// independent of task order and worker count.
inline uint64_t task_seed(uint64_t base_seed, const std::string& key) {
  return hash_mix(base_seed, hash_string(key));
}

namespace detail {

inline json record_to_json(const TaskResult& r) {
  json j;
  j["key"] = r.key;
  j["status"] = r.status;
  j["payload"] = r.payload;
  if (!r.error.empty()) j["error"] = r.error;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

// Reads an existing record file; later lines win for duplicate keys. Corrupt
// lines are skipped (a crashed writer may leave a torn tail line).
inline std::map<std::string, TaskResult> load_records(const std::filesystem::path& file) {
  std::map<std::string, TaskResult> out;
  std::ifstream in(file);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j.contains("status"))
      continue;
    TaskResult r;
    r.key = j["key"].get<std::string>();
    r.status = j["status"].get<std::string>();
    if (j.contains("payload")) r.payload = j["payload"];
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    if (j.contains("wall_seconds")) r.wall_seconds = j["wall_seconds"].get<double>();
    out[r.key] = r;
  }
  return out;
}

}  // namespace detail

using TaskFn = std::function<json(const std::string& key)>;

// Runs the keyed tasks on `workers` threads. Tasks whose key already has a
// "done" record in `record_file` are not rerun; their stored payloads are
// returned. Failures are recorded and do not abort the sweep. The returned
// vector follows the input key order regardless of completion order.
inline std::vector<TaskResult> execute_sweep(const std::vector<std::string>& keys,
                                             const TaskFn& fn, int workers,
                                             const std::filesystem::path& record_file = {}) {
  if (workers < 1) throw ConfigError("execute_sweep: workers must be >= 1");
  {
    std::set<std::string> uniq(keys.begin(), keys.end());
    if (uniq.size() != keys.size()) throw ConfigError("execute_sweep: duplicate task keys");
  }
  std::map<std::string, TaskResult> prior;
  if (!record_file.empty()) prior = detail::load_records(record_file);

  std::vector<TaskResult> results(keys.size());
  std::vector<int> todo;
  for (size_t i = 0; i < keys.size(); ++i) {
    auto it = prior.find(keys[i]);
    if (it != prior.end() && it->second.status == "done")
      results[i] = it->second;
    else
      todo.push_back(static_cast<int>(i));
  }

  std::mutex io_mutex;
  std::ofstream rec;
  if (!record_file.empty()) {
    if (record_file.has_parent_path())
      std::filesystem::create_directories(record_file.parent_path());
    rec.open(record_file, std::ios::app);
    if (!rec) throw ConfigError("execute_sweep: cannot open record file " + record_file.string());
  }

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t t = next.fetch_add(1);
      if (t >= todo.size()) return;
      const int idx = todo[t];
      TaskResult r;
      r.key = keys[idx];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        r.payload = fn(r.key);
        r.status = "done";
      } catch (const std::exception& e) {
        r.status = "failed";
        r.error = e.what();
      }
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        if (rec.is_open()) rec << detail::record_to_json(r).dump() << "\n" << std::flush;
        results[idx] = std::move(r);
      }
    }
  };
  const int nthreads = std::min<int>(workers, std::max<size_t>(todo.size(), 1));
  std::vector<std::thread> pool;
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

// ---------------------------------------------------------------------------
// Aggregation. Collects every numeric field found in the done payloads
// (top-level keys only) into mean / stderr / min / max, iterating in input
// key order so the result is byte-identical for any worker count.

inline json aggregate_sweep(const std::vector<TaskResult>& results) {
  std::map<std::string, std::vector<double>> series;
  int done = 0, failed = 0;
  for (const auto& r : results) {
    if (r.status == "failed") {
      ++failed;
      continue;
    }
    if (r.status != "done") continue;
    ++done;
    if (!r.payload.is_object()) continue;
    for (auto it = r.payload.begin(); it != r.payload.end(); ++it)
      if (it.value().is_number()) series[it.key()].push_back(it.value().get<double>());
  }
  json agg;
  agg["tasks_done"] = done;
  agg["tasks_failed"] = failed;
  json fields = json::object();
  for (const auto& [name, vals] : series) {
    if (vals.empty()) continue;
    double mean = 0.0, lo = vals[0], hi = vals[0];
    for (double v : vals) {
      mean += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    mean /= vals.size();
    double se = 0.0;
    if (vals.size() > 1) {
      double ss = 0.0;
      for (double v : vals) ss += sqr(v - mean);
      se = std::sqrt(ss / (vals.size() - 1.0) / vals.size());
    }
    json f;
    f["n"] = vals.size();
    f["mean"] = mean;
    f["stderr"] = se;
    f["min"] = lo;
    f["max"] = hi;
    fields[name] = f;
  }
  agg["fields"] = fields;
  return agg;
}

// ---------------------------------------------------------------------------
// Paired bulk/edge comparison at one disorder seed. The bulk sample lives on
// a torus, the edge sample on a cylinder with a wall; both draw their
// disorder from the same seed keyed by physical coordinates, so the samples
// agree bitwise wherever the geometries overlap.

struct PairSettings {
  ModelSpec bulk;               // torus, no wall
  ModelSpec edge;               // open x1, wall present
  double fermi_energy = 2.9;
  EnergyWindow window{2.6, 3.2};
  SwitchProfile l1_profile{};   // step across x1 = 0
  SwitchProfile l2_profile{};   // step across x2 = 0
  double box_halfwidth = 6.0;
  double T = 1e3;
  TimeAverageKernel kernel = TimeAverageKernel::uniform;
};

struct PairResult {
  double sigma_bulk = 0.0;
  double sigma_edge = 0.0;
  double abs_diff = 0.0;
};

inline PairResult pair_bulk_edge(const PairSettings& s, uint64_t seed) {
  ModelSpec bspec = s.bulk;
  ModelSpec espec = s.edge;
  bspec.disorder.seed = seed;
  espec.disorder.seed = seed;
  if (bspec.geometry.Ly != espec.geometry.Ly)
    throw ConfigError("pair_bulk_edge: bulk and edge samples must share Ly");
  if (!espec.wall.present)
    throw ConfigError("pair_bulk_edge: edge sample needs a wall");
  s.window.validate();

  const HamiltonianMatrix hb = build_bulk(bspec);
  const SpectralData sb = diagonalize(hb);
  const Mat P = fermi_projector(sb, s.fermi_energy);
  const RVec l1b = switch_diagonal(bspec.geometry, s.l1_profile, 1, true);
  const RVec l2b = switch_diagonal(bspec.geometry, s.l2_profile, 2, true);
  const HallResult hall = hall_switch(P, l1b, l2b, bspec.geometry, s.box_halfwidth);

  const HamiltonianMatrix he = build_edge(espec);
  const SpectralData se = diagonalize(he);
  const RVec l1e = switch_diagonal(espec.geometry, s.l1_profile, 1);
  const RVec l2e = switch_diagonal(espec.geometry, s.l2_profile, 2, true);
  const EdgeOperators eo = make_edge_operators(he, se, l1e, l2e);
  const double sig_e = edge_conductance_regularized(eo, s.window, s.T, s.kernel);

  PairResult r;
  r.sigma_bulk = hall.value;
  r.sigma_edge = sig_e;
  r.abs_diff = std::abs(r.sigma_bulk - r.sigma_edge);
  return r;
}

}  // namespace bulkedge
