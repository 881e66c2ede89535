#include "coexist/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "coexist/scenario_io.hpp"

namespace coexist {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

double min_bound(const Scenario& s) { return max_feasible_rho(s).minCoeff(); }

template <typename T>
std::vector<T> list_field(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_array() || doc.at(key).empty()) {
    throw ValidationError(std::string("sweep spec: '") + key + "' must be a non-empty list");
  }
  std::vector<T> out;
  for (const auto& v : doc.at(key)) {
    try {
      out.push_back(v.get<T>());
    } catch (const json::exception&) {
      throw ValidationError(std::string("sweep spec: bad entry in '") + key + "'");
    }
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json record_to_json(const SweepRecord& r) {
  return {{"rho_db", r.rho_db},
          {"delta", r.delta},
          {"sigma2", r.sigma2},
          {"cells", r.cells},
          {"method", to_string(r.method)},
          {"trial", r.trial},
          {"seed", r.seed},
          {"status", r.status},
          {"mutual_information", r.mutual_information},
          {"radar_power", r.radar_power},
          {"comm_power", r.comm_power},
          {"margin", r.margin},
          {"achievable_rho_db", r.achievable_rho_db},
          {"outer_iterations", r.outer_iterations},
          {"converged", r.converged},
          {"wall_time", r.wall_time}};
}

SweepRecord record_from_json(const json& j) {
  SweepRecord r;
  try {
    r.rho_db = j.at("rho_db").get<double>();
    r.delta = j.at("delta").get<double>();
    r.sigma2 = j.at("sigma2").get<double>();
    r.cells = j.at("cells").get<int>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.status = j.at("status").get<std::string>();
    r.mutual_information = j.at("mutual_information").get<double>();
    r.radar_power = j.at("radar_power").get<double>();
    r.comm_power = j.at("comm_power").get<double>();
    r.margin = j.at("margin").get<double>();
    r.achievable_rho_db = j.at("achievable_rho_db").get<double>();
    r.outer_iterations = j.at("outer_iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.wall_time = j.at("wall_time").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad record: ") + e.what());
  }
  return r;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ValidationError("bad number '" + s + "' in records");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Names

std::string to_string(Method m) {
  switch (m) {
    case Method::joint_gradient: return "joint-gradient";
    case Method::joint_dual: return "joint-dual";
    case Method::non_interfering: return "non-interfering";
    case Method::disjoint: return "disjoint";
    case Method::comm_first: return "comm-first";
    case Method::radar_first: return "radar-first";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '_', '-');
  for (auto m : {Method::joint_gradient, Method::joint_dual, Method::non_interfering,
                 Method::disjoint, Method::comm_first, Method::radar_first}) {
    if (to_string(m) == key) return m;
  }
  throw DomainError("unknown method '" + name + "'");
}

RecordFormat parse_record_format(const std::string& name) {
  if (name == "csv") return RecordFormat::csv;
  if (name == "jsonl") return RecordFormat::jsonl;
  throw DomainError("unknown record format '" + name + "'");
}

// ---------------------------------------------------------------------------
// Spec

void SweepSpec::validate() const {
  if (rho_db.empty() || delta.empty() || sigma2.empty() || cells.empty() || methods.empty()) {
    throw ValidationError("sweep spec: every grid must be non-empty");
  }
  if (trials < 1) throw ValidationError("sweep spec: trials must be >= 1");
  for (double d : delta) {
    if (!(d >= 0 && d <= 1)) throw ValidationError("sweep spec: delta outside [0, 1]");
  }
  for (double v : sigma2) {
    if (!(v >= 0)) throw ValidationError("sweep spec: negative sigma2");
  }
  for (double r : rho_db) {
    if (!std::isfinite(r)) throw ValidationError("sweep spec: non-finite rho");
  }
  for (int c : cells) {
    if (c < 0) throw ValidationError("sweep spec: negative cell count");
  }
  try {
    options.validate();
  } catch (const DomainError& e) {
    throw ValidationError(std::string("sweep spec: ") + e.what());
  }
}

Scenario SweepSpec::template_scenario() const {
  return scenario ? *scenario : default_template();
}

json sweep_spec_to_json(const SweepSpec& spec) {
  json doc;
  doc["schema"] = kSweepSchema;
  doc["template"] = spec.scenario ? scenario_to_json(*spec.scenario) : json("default");
  doc["rho_db"] = spec.rho_db;
  doc["delta"] = spec.delta;
  doc["sigma2"] = spec.sigma2;
  doc["cells"] = spec.cells;
  json methods = json::array();
  for (auto m : spec.methods) methods.push_back(to_string(m));
  doc["methods"] = methods;
  doc["trials"] = spec.trials;
  doc["base_seed"] = spec.base_seed;
  const auto& o = spec.options;
  doc["options"] = {{"codebook_method", to_string(o.codebook_method)},
                    {"outer_max_iters", o.outer_max_iters},
                    {"outer_rel_tol", o.outer_rel_tol},
                    {"inner_max_iters", o.inner_max_iters},
                    {"inner_rel_tol", o.inner_rel_tol},
                    {"inner_window", o.inner_window},
                    {"step_a", o.step.a},
                    {"step_b", o.step.b},
                    {"rank_cut", o.rank_cut}};
  return doc;
}

SweepSpec sweep_spec_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema") || doc.at("schema") != kSweepSchema) {
    throw ValidationError(std::string("sweep spec: schema must be ") + kSweepSchema);
  }
  SweepSpec spec;
  if (doc.contains("template")) {
    const auto& t = doc.at("template");
    if (t.is_string()) {
      if (t.get<std::string>() != "default") {
        throw ValidationError("sweep spec: unknown template '" + t.get<std::string>() + "'");
      }
    } else {
      spec.scenario = scenario_from_json(t);
    }
  }
  spec.rho_db = list_field<double>(doc, "rho_db");
  spec.delta = list_field<double>(doc, "delta");
  spec.sigma2 = list_field<double>(doc, "sigma2");
  if (!doc.contains("cells") || !doc.at("cells").is_array() || doc.at("cells").empty()) {
    throw ValidationError("sweep spec: 'cells' must be a non-empty list");
  }
  for (const auto& c : doc.at("cells")) {
    if (c.is_string() && c.get<std::string>() == "all") {
      spec.cells.push_back(0);
    } else if (c.is_number_integer()) {
      spec.cells.push_back(c.get<int>());
    } else {
      throw ValidationError("sweep spec: cells entries are integers or \"all\"");
    }
  }
  for (const auto& name : list_field<std::string>(doc, "methods")) {
    try {
      spec.methods.push_back(parse_method(name));
    } catch (const DomainError& e) {
      throw ValidationError(std::string("sweep spec: ") + e.what());
    }
  }
  if (doc.contains("trials")) spec.trials = doc.at("trials").get<int>();
  if (doc.contains("base_seed")) spec.base_seed = doc.at("base_seed").get<std::uint64_t>();
  if (doc.contains("options")) {
    const auto& o = doc.at("options");
    auto& opt = spec.options;
    try {
      if (o.contains("codebook_method")) {
        opt.codebook_method = parse_codebook_method(o.at("codebook_method").get<std::string>());
      }
      if (o.contains("outer_max_iters")) opt.outer_max_iters = o.at("outer_max_iters").get<int>();
      if (o.contains("outer_rel_tol")) opt.outer_rel_tol = o.at("outer_rel_tol").get<double>();
      if (o.contains("inner_max_iters")) opt.inner_max_iters = o.at("inner_max_iters").get<int>();
      if (o.contains("inner_rel_tol")) opt.inner_rel_tol = o.at("inner_rel_tol").get<double>();
      if (o.contains("inner_window")) opt.inner_window = o.at("inner_window").get<int>();
      if (o.contains("step_a")) opt.step.a = o.at("step_a").get<double>();
      if (o.contains("step_b")) opt.step.b = o.at("step_b").get<double>();
      if (o.contains("rank_cut")) opt.rank_cut = o.at("rank_cut").get<double>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("sweep spec options: ") + e.what());
    } catch (const DomainError& e) {
      throw ValidationError(std::string("sweep spec options: ") + e.what());
    }
  }
  spec.validate();
  return spec;
}

SweepSpec read_sweep_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return sweep_spec_from_json(doc);
}

// ---------------------------------------------------------------------------
// Trials

std::uint64_t record_seed(std::uint64_t base_seed, const std::vector<std::uint64_t>& indices,
                          int trial) {
  std::uint64_t h = splitmix64(base_seed);
  for (auto v : indices) h = mix(h, v);
  return mix(h, static_cast<std::uint64_t>(trial));
}

std::uint64_t scenario_seed(std::uint64_t base_seed, int trial) {
  return mix(splitmix64(base_seed ^ 0x5ce7a210ULL), static_cast<std::uint64_t>(trial));
}

Scenario make_trial_scenario(const Scenario& templ, const SweepPoint& point,
                             std::uint64_t base_seed, int trial) {
  const std::uint64_t seed = scenario_seed(base_seed, trial);
  Scenario s = random_scenario(templ, point.delta, point.sigma2, seed);
  s = select_cells(s, point.cells, seed);
  return validate_scenario(with_threshold(std::move(s), from_db(point.rho_db)));
}

SweepRecord run_trial(const Scenario& s, Method method, const SolverOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  SweepRecord r;
  r.method = method;
  const int n = s.chips();
  auto finish = [&] {
    r.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    return r;
  };
  const double threshold = s.radar.cells.front().threshold;
  try {
    const double bound = min_bound(s);
    switch (method) {
      case Method::joint_gradient:
      case Method::joint_dual: {
        r.achievable_rho_db = to_db(bound);
        try {
          require_feasible(s);
        } catch (const InfeasibleError&) {
          r.status = "infeasible";
          r.margin = bound / threshold - 1;
          r.radar_power = s.radar.max_power;
          r.converged = true;
          return finish();
        }
        SolverOptions o = opts;
        o.codebook_method =
            method == Method::joint_gradient ? CodebookMethod::gradient : CodebookMethod::dual;
        const SolveResult res = alternating_maximization(s, o);
        const auto& last = res.trace.rows.back();
        r.mutual_information = last.mutual_information;
        r.radar_power = res.variables.radar_power;
        r.comm_power = res.variables.covariance.trace().real() / n;
        r.margin = min_sdr_margin(res.variables, s) - 1;
        r.outer_iterations = static_cast<int>(res.trace.rows.size()) - 1;
        r.converged = res.trace.converged;
        break;
      }
      case Method::non_interfering:
      case Method::disjoint:
      case Method::radar_first: {
        BaselineKind kind = method == Method::non_interfering ? BaselineKind::non_interfering
                            : method == Method::disjoint      ? BaselineKind::disjoint
                                                              : BaselineKind::radar_first;
        BaselineResult b;
        try {
          b = evaluate_baseline(kind, s, opts);
        } catch (const InfeasibleError&) {
          r.status = "infeasible";
          r.achievable_rho_db = to_db(bound);
          r.margin = bound / threshold - 1;
          r.converged = true;
          return finish();
        }
        r.mutual_information = b.mutual_information;
        r.radar_power = b.variables.radar_power;
        r.comm_power = b.variables.covariance.trace().real() / n;
        r.margin = b.min_margin - 1;
        r.achievable_rho_db = method == Method::disjoint ? to_db(b.min_sdr) : to_db(bound);
        r.converged = true;
        if (b.min_margin < 1 - 1e-9) r.status = "infeasible";
        break;
      }
      case Method::comm_first: {
        const CMatrix cw = waterfilling_covariance(s);
        const RVector best =
            all_sdr(cw, s.radar.max_power, update_filters(cw, s.radar.max_power, s), s);
        r.achievable_rho_db = to_db(best.minCoeff());
        try {
          const BaselineResult b = comm_first_overlay(s);
          r.mutual_information = b.mutual_information;
          r.radar_power = b.variables.radar_power;
          r.comm_power = b.variables.covariance.trace().real() / n;
          r.margin = b.min_margin - 1;
        } catch (const InfeasibleError&) {
          r.status = "infeasible";
          r.radar_power = s.radar.max_power;
          r.comm_power = cw.trace().real() / n;
          r.margin = best.minCoeff() / threshold - 1;
        }
        r.converged = true;
        break;
      }
    }
  } catch (const std::exception&) {
    r.status = "failed";
    r.mutual_information = 0.0;
  }
  return finish();
}

std::vector<SweepRecord> run_sweep(const SweepSpec& spec) {
  spec.validate();
  const Scenario templ = validate_scenario(spec.template_scenario());
  struct Item {
    SweepPoint point;
    std::vector<std::uint64_t> index;
    Method method;
    int trial;
  };
  std::vector<Item> items;
  for (std::size_t a = 0; a < spec.rho_db.size(); ++a) {
    for (std::size_t b = 0; b < spec.delta.size(); ++b) {
      for (std::size_t c = 0; c < spec.sigma2.size(); ++c) {
        for (std::size_t d = 0; d < spec.cells.size(); ++d) {
          for (std::size_t m = 0; m < spec.methods.size(); ++m) {
            for (int t = 0; t < spec.trials; ++t) {
              items.push_back({{spec.rho_db[a], spec.delta[b], spec.sigma2[c], spec.cells[d]},
                               {a, b, c, d, m},
                               spec.methods[m],
                               t});
            }
          }
        }
      }
    }
  }

  std::vector<SweepRecord> records(items.size());
  auto work = [&](std::size_t k) {
    const auto& it = items[k];
    SweepRecord r;
    try {
      const Scenario s = make_trial_scenario(templ, it.point, spec.base_seed, it.trial);
      r = run_trial(s, it.method, spec.options);
    } catch (const std::exception&) {
      r.status = "failed";
    }
    r.rho_db = it.point.rho_db;
    r.delta = it.point.delta;
    r.sigma2 = it.point.sigma2;
    r.cells = it.point.cells;
    r.method = it.method;
    r.trial = it.trial;
    r.seed = record_seed(spec.base_seed, it.index, it.trial);
    records[k] = std::move(r);
  };

  int workers = 1;
  if (const char* env = std::getenv("COEXIST_WORKERS")) workers = std::max(1, std::atoi(env));
  if (workers == 1 || items.size() < 2) {
    for (std::size_t k = 0; k < items.size(); ++k) work(k);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < items.size(); k = next++) work(k);
    });
  }
  for (auto& th : pool) th.join();
  return records;
}

SolveTrace convergence_trace(const Scenario& templ, const SweepPoint& point,
                             std::uint64_t base_seed, int trial, CodebookMethod method,
                             const SolverOptions& opts) {
  const Scenario s = make_trial_scenario(validate_scenario(templ), point, base_seed, trial);
  SolverOptions o = opts;
  o.codebook_method = method;
  return alternating_maximization(s, o).trace;
}

// ---------------------------------------------------------------------------
// Records I/O

std::string format_records(const std::vector<SweepRecord>& records, RecordFormat format) {
  if (records.empty()) throw DomainError("no records to write");
  std::string out;
  if (format == RecordFormat::jsonl) {
    for (const auto& r : records) out += record_to_json(r).dump() + "\n";
    return out;
  }
  for (std::size_t c = 0; c < kRecordColumns.size(); ++c) {
    out += (c ? "," : "") + std::string(kRecordColumns[c]);
  }
  out += "\n";
  for (const auto& r : records) {
    out += format_double(r.rho_db) + "," + format_double(r.delta) + "," + format_double(r.sigma2) +
           "," + std::to_string(r.cells) + "," + to_string(r.method) + "," +
           std::to_string(r.trial) + "," + std::to_string(r.seed) + "," + r.status + "," +
           format_double(r.mutual_information) + "," + format_double(r.radar_power) + "," +
           format_double(r.comm_power) + "," + format_double(r.margin) + "," +
           format_double(r.achievable_rho_db) + "," + std::to_string(r.outer_iterations) + "," +
           (r.converged ? "true" : "false") + "," + format_double(r.wall_time) + "\n";
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

void write_records(const std::vector<SweepRecord>& records, const std::string& path,
                   RecordFormat format) {
  write_file_atomic(path, format_records(records, format));
}

std::vector<SweepRecord> parse_records(const std::string& text, RecordFormat format) {
  std::vector<SweepRecord> out;
  std::istringstream in(text);
  std::string line;
  if (format == RecordFormat::jsonl) {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        out.push_back(record_from_json(json::parse(line)));
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("bad JSON record: ") + e.what());
      }
    }
    return out;
  }
  if (!std::getline(in, line)) throw ValidationError("empty CSV");
  const auto header = split_csv(line);
  if (header.size() != kRecordColumns.size()) throw ValidationError("unexpected CSV header");
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != kRecordColumns[c]) throw ValidationError("unexpected CSV header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != kRecordColumns.size()) throw ValidationError("CSV row has wrong column count");
    SweepRecord r;
    r.rho_db = parse_double(f[0]);
    r.delta = parse_double(f[1]);
    r.sigma2 = parse_double(f[2]);
    r.cells = std::stoi(f[3]);
    r.method = parse_method(f[4]);
    r.trial = std::stoi(f[5]);
    r.seed = std::stoull(f[6]);
    r.status = f[7];
    r.mutual_information = parse_double(f[8]);
    r.radar_power = parse_double(f[9]);
    r.comm_power = parse_double(f[10]);
    r.margin = parse_double(f[11]);
    r.achievable_rho_db = parse_double(f[12]);
    r.outer_iterations = std::stoi(f[13]);
    r.converged = f[14] == "true";
    r.wall_time = parse_double(f[15]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool jsonl = first != std::string::npos && text[first] == '{';
  return parse_records(text, jsonl ? RecordFormat::jsonl : RecordFormat::csv);
}

json sweep_manifest(const SweepSpec& spec, std::size_t records, RecordFormat format) {
  return {{"schema", kRecordSchema},
          {"software_version", kSoftwareVersion},
          {"format", format == RecordFormat::csv ? "csv" : "jsonl"},
          {"columns", kRecordColumns},
          {"records", records},
          {"spec", sweep_spec_to_json(spec)}};
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<AggregateRow> aggregate(const std::vector<SweepRecord>& records) {
  using Key = std::tuple<double, double, double, int, int>;
  std::map<Key, std::size_t> index;
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    const Key key{r.rho_db, r.delta, r.sigma2, r.cells, static_cast<int>(r.method)};
    auto [it, fresh] = index.emplace(key, rows.size());
    if (fresh) {
      AggregateRow row;
      row.point = {r.rho_db, r.delta, r.sigma2, r.cells};
      row.method = r.method;
      rows.push_back(row);
      values.emplace_back();
    }
    auto& row = rows[it->second];
    row.trials += 1;
    row.feasible += r.feasible() ? 1 : 0;
    row.mean_achievable_rho_db += r.achievable_rho_db;
    values[it->second].push_back(r.feasible() ? r.mutual_information : 0.0);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& row = rows[k];
    const auto& v = values[k];
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    row.mean_mi = mean;
    row.se_mi = v.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    row.mean_achievable_rho_db /= n;
  }
  return rows;
}

}  // namespace coexist
