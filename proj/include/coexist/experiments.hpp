#pragma once

// Monte Carlo harness: sweep specification, per-trial scenario generation
// with common random numbers, raw records, and on-demand aggregation.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coexist/baselines.hpp"

namespace coexist {

inline constexpr const char* kSweepSchema = "coexist.sweep/1";
inline constexpr const char* kRecordSchema = "coexist.records/1";
inline constexpr const char* kSoftwareVersion = "0.1.0";

enum class Method { joint_gradient, joint_dual, non_interfering, disjoint, comm_first, radar_first };

std::string to_string(Method m);
/// Accepts "joint-gradient", "joint_gradient", ... .
Method parse_method(const std::string& name);

/// One grid coordinate.  cells == 0 means the full protected grid.
struct SweepPoint {
  double rho_db = 0.0;
  double delta = 0.0;
  double sigma2 = 0.0;
  int cells = 0;
};

struct SweepSpec {
  std::optional<Scenario> scenario;  // template; built-in default when empty
  std::vector<double> rho_db;
  std::vector<double> delta;
  std::vector<double> sigma2;
  std::vector<int> cells;
  std::vector<Method> methods;
  int trials = 50;
  std::uint64_t base_seed = 1;
  SolverOptions options;

  /// Throws ValidationError on empty grids, trials < 1 or bad values.
  void validate() const;
  Scenario template_scenario() const;
};

nlohmann::json sweep_spec_to_json(const SweepSpec& spec);
SweepSpec sweep_spec_from_json(const nlohmann::json& doc);
SweepSpec read_sweep_spec(const std::string& path);

struct SweepRecord {
  double rho_db = 0.0;
  double delta = 0.0;
  double sigma2 = 0.0;
  int cells = 0;
  Method method = Method::joint_dual;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | infeasible | failed
  double mutual_information = 0.0;  // bits per channel use, as designed
  double radar_power = 0.0;
  double comm_power = 0.0;  // tr(C) / N
  double margin = 0.0;      // min over cells of SDR / rho - 1
  double achievable_rho_db = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  double wall_time = 0.0;

  bool feasible() const { return status == "ok"; }
  bool operator==(const SweepRecord&) const = default;
};

/// Documented CSV column order.
inline constexpr std::array<const char*, 16> kRecordColumns = {
    "rho_db", "delta", "sigma2", "cells", "method", "trial", "seed", "status",
    "mutual_information", "radar_power", "comm_power", "margin", "achievable_rho_db",
    "outer_iterations", "converged", "wall_time"};

/// 64-bit mix of (base_seed, grid indices..., trial).
std::uint64_t record_seed(std::uint64_t base_seed, const std::vector<std::uint64_t>& indices,
                          int trial);

/// Seed of the random scenario draw for a trial.  It depends on
/// (base_seed, trial) only, so every grid point of a trial sees the same
/// channel and nested interference and cell sets.
std::uint64_t scenario_seed(std::uint64_t base_seed, int trial);

Scenario make_trial_scenario(const Scenario& templ, const SweepPoint& point,
                             std::uint64_t base_seed, int trial);

/// Runs one method on one scenario; failures are captured in the record.
SweepRecord run_trial(const Scenario& s, Method method, const SolverOptions& opts);

/// All (grid point x method x trial) records, ordered by
/// (rho, delta, sigma2, cells, method, trial).  Worker count comes from
/// COEXIST_WORKERS (default 1).
std::vector<SweepRecord> run_sweep(const SweepSpec& spec);

/// Full alternating-maximization trace for one trial of a grid point.
SolveTrace convergence_trace(const Scenario& templ, const SweepPoint& point,
                             std::uint64_t base_seed, int trial, CodebookMethod method,
                             const SolverOptions& opts);

enum class RecordFormat { csv, jsonl };
RecordFormat parse_record_format(const std::string& name);

std::string format_records(const std::vector<SweepRecord>& records, RecordFormat format);
/// Writes atomically (temporary file + rename).  Empty input is an error.
void write_records(const std::vector<SweepRecord>& records, const std::string& path,
                   RecordFormat format);
std::vector<SweepRecord> read_records(const std::string& path);
std::vector<SweepRecord> parse_records(const std::string& text, RecordFormat format);

/// Sidecar manifest: schema, software version, spec and record count.
nlohmann::json sweep_manifest(const SweepSpec& spec, std::size_t records, RecordFormat format);

struct AggregateRow {
  SweepPoint point;
  Method method = Method::joint_dual;
  int trials = 0;
  int feasible = 0;
  double mean_mi = 0.0;  // infeasible and failed trials count as 0
  double se_mi = 0.0;
  double mean_achievable_rho_db = 0.0;
};

/// Mean and standard error per (grid point, method), in first-seen order.
std::vector<AggregateRow> aggregate(const std::vector<SweepRecord>& records);

/// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace coexist
