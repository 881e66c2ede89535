#include "coexist/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coexist {

namespace {

void fill_metrics(BaselineResult& r, const Scenario& eval) {
  const auto& v = r.variables;
  r.mutual_information = mutual_information(v.covariance, v.radar_power, eval);
  r.sdr = all_sdr(v.covariance, v.radar_power, v.filters, eval);
  r.min_sdr = r.sdr.minCoeff();
  r.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < eval.radar.cells.size(); ++c) {
    r.min_margin = std::min(r.min_margin,
                            r.sdr(static_cast<Eigen::Index>(c)) / eval.radar.cells[c].threshold);
  }
}

DesignVariables isolated_variables(const Scenario& s) {
  DesignVariables v;
  v.radar_power = s.radar.max_power;
  v.covariance = waterfilling_covariance(s);
  const int dim = s.tx() * s.chips();
  v.filters = update_filters(CMatrix::Zero(dim, dim), v.radar_power, without_interference(s));
  return v;
}

}  // namespace

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::non_interfering: return "non_interfering";
    case BaselineKind::disjoint: return "disjoint";
    case BaselineKind::comm_first: return "comm_first";
    case BaselineKind::radar_first: return "radar_first";
  }
  return "unknown";
}

BaselineKind parse_baseline_kind(const std::string& name) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto k : {BaselineKind::non_interfering, BaselineKind::disjoint, BaselineKind::comm_first,
                 BaselineKind::radar_first}) {
    if (to_string(k) == key) return k;
  }
  throw DomainError("unknown baseline '" + name + "'");
}

BaselineResult non_interfering_design(const Scenario& s) {
  BaselineResult r;
  r.kind = BaselineKind::non_interfering;
  r.variables = isolated_variables(s);
  fill_metrics(r, without_interference(s));
  return r;
}

BaselineResult disjoint_evaluation(const Scenario& s) {
  BaselineResult r;
  r.kind = BaselineKind::disjoint;
  r.variables = isolated_variables(s);
  fill_metrics(r, s);
  return r;
}

BaselineResult comm_first_overlay(const Scenario& s) {
  BaselineResult r;
  r.kind = BaselineKind::comm_first;
  auto& v = r.variables;
  v.covariance = waterfilling_covariance(s);
  v.radar_power = s.radar.max_power;
  for (int pass = 0; pass < 50; ++pass) {
    v.filters = update_filters(v.covariance, v.radar_power, s);
    const double next = update_radar_power(v.covariance, v.filters, s);
    const bool settled = std::abs(next - v.radar_power) <= 1e-8 * v.radar_power;
    v.radar_power = next;
    if (settled) break;
  }
  fill_metrics(r, s);
  return r;
}

BaselineResult radar_first_overlay(const Scenario& s, const SolverOptions& opts) {
  BaselineResult r;
  r.kind = BaselineKind::radar_first;
  auto& v = r.variables;
  const int dim = s.tx() * s.chips();
  v.radar_power = s.radar.max_power;
  v.filters = update_filters(CMatrix::Zero(dim, dim), v.radar_power, without_interference(s));
  const ConstraintSet constraints = constraint_coefficients(v.filters, v.radar_power, s);
  const WhitenedChannel channel = whitened_channel(v.radar_power, s);
  v.covariance = opts.codebook_method == CodebookMethod::gradient
                     ? optimize_codebook_gradient(channel, constraints, CMatrix(), opts).covariance
                     : optimize_codebook_dual(channel, constraints, opts).covariance;
  fill_metrics(r, s);
  return r;
}

BaselineResult evaluate_baseline(BaselineKind kind, const Scenario& s, const SolverOptions& opts) {
  switch (kind) {
    case BaselineKind::non_interfering: return non_interfering_design(s);
    case BaselineKind::disjoint: return disjoint_evaluation(s);
    case BaselineKind::comm_first: return comm_first_overlay(s);
    case BaselineKind::radar_first: return radar_first_overlay(s, opts);
  }
  throw DomainError("unknown baseline kind");
}

}  // namespace coexist
