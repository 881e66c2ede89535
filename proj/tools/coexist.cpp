// coexist: command-line front end.
//
// Exit status: 0 success, 1 infeasible, 2 usage or input error, 3 numerical
// or I/O failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coexist/experiments.hpp"
#include "coexist/scenario_io.hpp"

using namespace coexist;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInfeasible = 1, kUsage = 2, kNumerical = 3 };

struct Common {
  std::string scenario;
  std::string method = "gradient";
  std::vector<double> rho_db;
  std::vector<double> delta;
  std::vector<double> sigma2;
  std::string cells = "all";
  std::vector<std::string> cell_grid;
  int trials = 50;
  std::uint64_t seed = 1;
  int trial = 0;
  std::string out;
  std::string format = "csv";
  std::optional<double> tol_outer;
  std::optional<double> tol_inner;
  std::optional<int> max_iters;
  std::optional<int> inner_max_iters;
  std::string kind;
  std::string spec;
};

int parse_cells(const std::string& text) {
  if (text == "all") return 0;
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw ValidationError("--cells expects a count or 'all'");
  }
  if (used != text.size() || n < 0) throw ValidationError("--cells expects a count or 'all'");
  return n;
}

SolverOptions solver_options(const Common& c) {
  SolverOptions o;
  o.codebook_method = parse_codebook_method(c.method);
  if (c.tol_outer) o.outer_rel_tol = *c.tol_outer;
  if (c.tol_inner) o.inner_rel_tol = *c.tol_inner;
  if (c.max_iters) o.outer_max_iters = *c.max_iters;
  if (c.inner_max_iters) o.inner_max_iters = *c.inner_max_iters;
  o.validate();
  return o;
}

double single(const std::vector<double>& v, double fallback, const char* flag) {
  if (v.empty()) return fallback;
  if (v.size() != 1) throw ValidationError(std::string(flag) + " takes one value here");
  return v.front();
}

// Scenario from --scenario, or the built-in template drawn with the grid flags.
Scenario load_scenario(const Common& c) {
  Scenario s;
  if (!c.scenario.empty()) {
    s = read_scenario(c.scenario);
    if (!c.rho_db.empty()) s = with_threshold(s, from_db(single(c.rho_db, 0, "--rho-db")));
    return validate_scenario(s);
  }
  const SweepPoint point{single(c.rho_db, 0.0, "--rho-db"), single(c.delta, 0.0, "--delta"),
                         single(c.sigma2, 0.0, "--sigma2"), parse_cells(c.cells)};
  return make_trial_scenario(default_template(), point, c.seed, c.trial);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

json trace_json(const SolveTrace& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"iteration", r.iteration},
                    {"mutual_information", r.mutual_information},
                    {"radar_power", r.radar_power},
                    {"min_margin", r.min_margin},
                    {"comm_power", r.comm_power},
                    {"inner_iterations", r.inner_iterations},
                    {"wall_time", r.wall_time}});
  }
  return {{"converged", t.converged}, {"rows", rows}};
}

std::string trace_csv(const SolveTrace& t) {
  std::ostringstream os;
  os << "iteration,mutual_information,radar_power,min_margin,comm_power,inner_iterations,"
        "wall_time\n";
  char buf[256];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n", r.iteration,
                  r.mutual_information, r.radar_power, r.min_margin, r.comm_power,
                  r.inner_iterations, r.wall_time);
    os << buf;
  }
  return os.str();
}

json cell_json(const Scenario& s, const RVector& values) {
  json cells = json::array();
  for (std::size_t c = 0; c < s.radar.cells.size(); ++c) {
    const auto& cell = s.radar.cells[c];
    cells.push_back({{"range", cell.range},
                     {"beam", cell.beam},
                     {"value_db", to_db(values(static_cast<Eigen::Index>(c)))}});
  }
  return cells;
}

int cmd_make_scenario(const Common& c) {
  if (c.out.empty()) throw ValidationError("make-scenario requires --out");
  emit(c.out, dump_scenario(load_scenario(c)));
  return kOk;
}

int cmd_feasibility(const Common& c) {
  const Scenario s = load_scenario(c);
  const RVector bound = max_feasible_rho(s);
  Eigen::Index worst = 0;
  bound.minCoeff(&worst);
  const auto& cell = s.radar.cells[static_cast<std::size_t>(worst)];
  if (!c.out.empty()) {
    json doc = {{"global_bound_db", to_db(bound(worst))},
                {"worst_cell", {{"range", cell.range}, {"beam", cell.beam}}},
                {"cells", cell_json(s, bound)}};
    emit(c.out, doc.dump(2) + "\n");
  } else {
    for (std::size_t k = 0; k < s.radar.cells.size(); ++k) {
      const auto& ck = s.radar.cells[k];
      std::printf("cell range=%d beam=%d bound_db=%.6f\n", ck.range, ck.beam,
                  to_db(bound(static_cast<Eigen::Index>(k))));
    }
  }
  std::printf("global bound: %.4f dB (cell range=%d beam=%d)\n", to_db(bound(worst)), cell.range,
              cell.beam);
  return kOk;
}

int cmd_solve(const Common& c) {
  const Scenario s = load_scenario(c);
  const SolverOptions o = solver_options(c);
  const SolveResult r = alternating_maximization(s, o);
  const auto& v = r.variables;
  const int n = s.chips();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(v.covariance, Eigen::EigenvaluesOnly);
  const RVector lambda = eig.eigenvalues().reverse();
  int rank = 0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) rank += lambda(k) > 1e-12 * lambda(0) ? 1 : 0;
  const RVector sdr = all_sdr(v.covariance, v.radar_power, v.filters, s);
  const double mi = r.trace.rows.back().mutual_information;
  json doc = {{"method", to_string(o.codebook_method)},
              {"mutual_information", mi},
              {"radar_power", v.radar_power},
              {"comm_power", v.covariance.trace().real() / n},
              {"covariance_rank", rank},
              {"covariance_eigenvalues", std::vector<double>(lambda.data(), lambda.data() + lambda.size())},
              {"min_margin", min_sdr_margin(v, s)},
              {"sdr", cell_json(s, sdr)},
              {"trace", trace_json(r.trace)}};
  if (!c.out.empty()) emit(c.out, doc.dump(2) + "\n");
  std::printf("mutual information: %.6f bits/use  radar power: %.6g W  comm power: %.6g W  "
              "outer iterations: %zu\n",
              mi, v.radar_power, v.covariance.trace().real() / n, r.trace.rows.size() - 1);
  return kOk;
}

int cmd_baseline(const Common& c) {
  if (c.kind.empty()) throw ValidationError("baseline requires --kind");
  const BaselineKind kind = parse_baseline_kind(c.kind);
  const Scenario s = load_scenario(c);
  const BaselineResult b = evaluate_baseline(kind, s, solver_options(c));
  json doc = {{"kind", to_string(kind)},
              {"mutual_information", b.mutual_information},
              {"radar_power", b.variables.radar_power},
              {"comm_power", b.variables.covariance.trace().real() / s.chips()},
              {"min_sdr_db", to_db(b.min_sdr)},
              {"min_margin", b.min_margin},
              {"sdr", cell_json(s, b.sdr)}};
  if (!c.out.empty()) emit(c.out, doc.dump(2) + "\n");
  std::printf("%s: mutual information %.6f bits/use, min SDR %.4f dB, margin %.6g\n",
              to_string(kind).c_str(), b.mutual_information, to_db(b.min_sdr), b.min_margin);
  return b.min_margin < 1 - 1e-9 ? kInfeasible : kOk;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& methods, bool trials_set,
              bool seed_set) {
  SweepSpec spec;
  if (!c.spec.empty()) spec = read_sweep_spec(c.spec);
  if (!c.scenario.empty()) spec.scenario = read_scenario(c.scenario);
  if (!c.rho_db.empty()) spec.rho_db = c.rho_db;
  if (!c.delta.empty()) spec.delta = c.delta;
  if (!c.sigma2.empty()) spec.sigma2 = c.sigma2;
  if (!c.cell_grid.empty()) {
    spec.cells.clear();
    for (const auto& text : c.cell_grid) spec.cells.push_back(parse_cells(text));
  } else if (c.spec.empty()) {
    spec.cells = {0};
  }
  if (!methods.empty()) {
    spec.methods.clear();
    for (const auto& m : methods) spec.methods.push_back(parse_method(m));
  }
  if (trials_set || c.spec.empty()) spec.trials = c.trials;
  if (seed_set || c.spec.empty()) spec.base_seed = c.seed;
  if (c.tol_outer) spec.options.outer_rel_tol = *c.tol_outer;
  if (c.tol_inner) spec.options.inner_rel_tol = *c.tol_inner;
  if (c.max_iters) spec.options.outer_max_iters = *c.max_iters;
  if (c.inner_max_iters) spec.options.inner_max_iters = *c.inner_max_iters;
  spec.validate();
  if (c.out.empty()) throw ValidationError("sweep requires --out");
  const RecordFormat format = parse_record_format(c.format);

  const auto records = run_sweep(spec);
  write_records(records, c.out, format);
  write_file_atomic(c.out + ".manifest.json",
                    sweep_manifest(spec, records.size(), format).dump(2) + "\n");
  std::printf("%-8s %-6s %-9s %-5s %-16s %6s %8s %10s %9s %10s\n", "rho_db", "delta", "sigma2",
              "cells", "method", "trials", "feasible", "mean_mi", "se_mi", "ach_rho_db");
  for (const auto& row : aggregate(records)) {
    std::printf("%-8.2f %-6.3f %-9.3g %-5d %-16s %6d %8d %10.5f %9.5f %10.4f\n", row.point.rho_db,
                row.point.delta, row.point.sigma2, row.point.cells, to_string(row.method).c_str(),
                row.trials, row.feasible, row.mean_mi, row.se_mi, row.mean_achievable_rho_db);
  }
  return kOk;
}

int cmd_trace(const Common& c) {
  const SolverOptions o = solver_options(c);
  SolveTrace trace;
  if (!c.scenario.empty()) {
    trace = alternating_maximization(load_scenario(c), o).trace;
  } else {
    const SweepPoint point{single(c.rho_db, 0.0, "--rho-db"), single(c.delta, 0.0, "--delta"),
                           single(c.sigma2, 0.0, "--sigma2"), parse_cells(c.cells)};
    trace = convergence_trace(default_template(), point, c.seed, c.trial,
                              o.codebook_method, o);
  }
  const std::string text =
      c.format == "jsonl" ? trace_json(trace).dump() + "\n" : trace_csv(trace);
  if (c.format != "csv" && c.format != "jsonl") throw ValidationError("--format is csv or jsonl");
  emit(c.out, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint radar / MIMO communication co-design"};
  app.require_subcommand(1);
  Common c;
  std::vector<std::string> methods;

  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--rho-db", c.rho_db, "SDR threshold(s) in dB")->delimiter(',');
    sub->add_option("--delta", c.delta, "interference density value(s)")->delimiter(',');
    sub->add_option("--sigma2", c.sigma2, "interference intensity value(s)")->delimiter(',');
    sub->add_option("--cells", c.cells, "protected cell count or 'all'");
    sub->add_option("--seed", c.seed, "base seed");
    sub->add_option("--trial", c.trial, "trial index for a single draw");
  };
  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--method", c.method, "codebook method")
        ->check(CLI::IsMember({"gradient", "dual"}));
    sub->add_option("--tol-outer", c.tol_outer, "outer relative tolerance");
    sub->add_option("--tol-inner", c.tol_inner, "inner relative tolerance");
    sub->add_option("--max-iters", c.max_iters, "outer iteration cap");
    sub->add_option("--inner-max-iters", c.inner_max_iters, "inner iteration cap");
  };

  auto* solve = app.add_subcommand("solve", "joint design by alternating maximization");
  solve->add_option("--scenario", c.scenario, "scenario JSON");
  add_grid(solve);
  add_solver(solve);
  solve->add_option("--out", c.out, "summary JSON path");

  auto* feas = app.add_subcommand("feasibility", "per-cell SDR bounds and the global bound");
  feas->add_option("--scenario", c.scenario, "scenario JSON");
  add_grid(feas);
  feas->add_option("--out", c.out, "JSON output path");

  auto* base = app.add_subcommand("baseline", "evaluate a reference design");
  base->add_option("--kind", c.kind, "non_interfering | disjoint | comm_first | radar_first")
      ->required();
  base->add_option("--scenario", c.scenario, "scenario JSON");
  add_grid(base);
  add_solver(base);
  base->add_option("--out", c.out, "JSON output path");

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep");
  sweep->add_option("--spec", c.spec, "sweep spec JSON");
  sweep->add_option("--scenario", c.scenario, "template scenario JSON");
  sweep->add_option("--rho-db", c.rho_db, "threshold grid (dB)")->delimiter(',');
  sweep->add_option("--delta", c.delta, "density grid")->delimiter(',');
  sweep->add_option("--sigma2", c.sigma2, "intensity grid")->delimiter(',');
  sweep->add_option("--cells", c.cell_grid, "protected cell counts or 'all'")->delimiter(',');
  auto* trials_opt = sweep->add_option("--trials", c.trials, "trials per grid point");
  auto* seed_opt = sweep->add_option("--seed", c.seed, "base seed");
  sweep->add_option("--methods", methods, "methods to run")->delimiter(',');
  sweep->add_option("--tol-outer", c.tol_outer, "outer relative tolerance");
  sweep->add_option("--tol-inner", c.tol_inner, "inner relative tolerance");
  sweep->add_option("--max-iters", c.max_iters, "outer iteration cap");
  sweep->add_option("--inner-max-iters", c.inner_max_iters, "inner iteration cap");
  sweep->add_option("--out", c.out, "records path")->required();
  sweep->add_option("--format", c.format, "csv | jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  auto* trace = app.add_subcommand("trace", "convergence trace of one draw");
  trace->add_option("--scenario", c.scenario, "scenario JSON");
  add_grid(trace);
  add_solver(trace);
  trace->add_option("--out", c.out, "output path (default stdout)");
  trace->add_option("--format", c.format, "csv | jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  auto* make = app.add_subcommand("make-scenario", "instantiate the built-in template");
  add_grid(make);
  make->add_option("--out", c.out, "scenario JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) return cmd_solve(c);
    if (*feas) return cmd_feasibility(c);
    if (*base) return cmd_baseline(c);
    if (*sweep) return cmd_sweep(c, methods, trials_opt->count() > 0, seed_opt->count() > 0);
    if (*trace) return cmd_trace(c);
    if (*make) return cmd_make_scenario(c);
  } catch (const InfeasibleError& e) {
    std::cerr << e.what() << "\n";
    return kInfeasible;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
