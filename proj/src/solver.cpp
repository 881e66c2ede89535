#include "coexist/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace coexist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string cell_name(const ProtectedCell& c) {
  std::ostringstream os;
  os << "cell (range " << c.range << ", beam " << c.beam << ")";
  return os.str();
}

CMatrix identity_plus(const CMatrix& s, double scale = 1.0) {
  CMatrix out = scale * hermitian_part(s);
  out.diagonal().array() += 1.0;
  return out;
}

// Largest t with t^2 tr(E_l X X^H) <= a_l for all rows, shrunk by 1e-12
// to stay strictly inside.
double radial_scale(const RVector& traces, const RVector& bounds) {
  double t = kInf;
  for (Eigen::Index l = 0; l < traces.size(); ++l) {
    if (traces(l) <= 0) continue;
    if (bounds(l) <= 0) return 0.0;
    t = std::min(t, std::sqrt(bounds(l) / traces(l)));
  }
  if (!std::isfinite(t)) return 0.0;
  return t * (1.0 - 1e-12);
}

}  // namespace

std::string to_string(CodebookMethod m) {
  return m == CodebookMethod::gradient ? "gradient" : "dual";
}

CodebookMethod parse_codebook_method(const std::string& name) {
  if (name == "gradient") return CodebookMethod::gradient;
  if (name == "dual") return CodebookMethod::dual;
  throw DomainError("unknown codebook method '" + name + "'");
}

void SolverOptions::validate() const {
  if (outer_max_iters < 1 || inner_max_iters < 1) {
    throw DomainError("SolverOptions: iteration caps must be >= 1");
  }
  if (!(outer_rel_tol > 0) || !(inner_rel_tol > 0) || !(psd_clip_tol > 0) || !(rank_cut > 0)) {
    throw DomainError("SolverOptions: tolerances must be positive");
  }
  if (!(step.a > 0) || !(step.b > -1)) throw DomainError("SolverOptions: invalid step schedule");
  if (inner_window < 1) throw DomainError("SolverOptions: inner window must be >= 1");
}

// ---------------------------------------------------------------------------
// Radar blocks

std::vector<CVector> update_filters(const CMatrix& covariance, double radar_power,
                                    const Scenario& s) {
  if (!(radar_power >= 0)) throw DomainError("update_filters: negative radar power");
  const auto& cells = s.radar.cells;
  std::vector<std::optional<Eigen::LLT<CMatrix>>> per_beam(static_cast<std::size_t>(s.radar.beams));
  std::vector<CVector> filters;
  filters.reserve(cells.size());
  for (const auto& cell : cells) {
    auto& llt = per_beam.at(static_cast<std::size_t>(cell.beam));
    if (!llt) {
      llt.emplace(radar_disturbance(cell.beam, covariance, radar_power, s));
      if (llt->info() != Eigen::Success) {
        throw DefinitenessError("update_filters: disturbance covariance is not positive definite");
      }
    }
    CVector w = llt->solve(shifted_code(s.radar.code, cell.range, s.chips()));
    w.normalize();
    filters.push_back(std::move(w));
  }
  return filters;
}

double update_radar_power(const CMatrix& covariance, const std::vector<CVector>& filters,
                          const Scenario& s) {
  const auto& cells = s.radar.cells;
  if (filters.size() != cells.size()) throw DomainError("update_radar_power: filter count mismatch");
  const int n = s.chips();
  const ScatterOperator op(s);
  const CMatrix q = shifted_code_matrix(s.radar.code, n);
  std::vector<std::optional<CMatrix>> scatter(static_cast<std::size_t>(s.radar.beams));
  double power = 0.0;
  int binding = -1;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const auto& w = filters[c];
    if (w.squaredNorm() == 0) throw DomainError("update_radar_power: zero filter");
    auto& phi = scatter.at(static_cast<std::size_t>(cell.beam));
    if (!phi) phi = op.apply(cell.beam, covariance);
    const RVector gains = (q.adjoint() * w).cwiseAbs2();
    const double denom = cell.target_variance * gains(cell.range) -
                         cell.threshold * s.radar.clutter.col(cell.beam).dot(gains);
    if (!(denom > 0)) {
      throw InfeasibleError(cell_name(cell) + " cannot reach its SDR threshold at any radar power",
                            static_cast<int>(c));
    }
    const double need =
        cell.threshold * (w.dot(*phi * w).real() + s.radar.noise_power * w.squaredNorm()) / denom;
    if (need > power) {
      power = need;
      binding = static_cast<int>(c);
    }
  }
  if (power > s.radar.max_power * (1 + 1e-9)) {
    throw PowerBudgetError(cell_name(cells[static_cast<std::size_t>(binding)]) + " needs radar power " +
                               std::to_string(power) + " W above the budget",
                           binding);
  }
  return std::min(power, s.radar.max_power);
}

// ---------------------------------------------------------------------------
// Codebook: gradient method on C = X X^H

CMatrix codebook_gradient(const CMatrix& gram, const CMatrix& factor) {
  const CMatrix y = gram * factor;
  Eigen::LLT<CMatrix> llt(identity_plus(factor.adjoint() * y));
  if (llt.info() != Eigen::Success) throw DefinitenessError("codebook_gradient: I + S not PD");
  return llt.solve(y.adjoint()).adjoint();
}

double factor_objective(const CMatrix& gram, const CMatrix& factor) {
  return logdet_hpd(identity_plus(factor.adjoint() * gram * factor));
}

CMatrix initial_factor(const ConstraintSet& constraints) {
  const int n = constraints.dimension();
  const RVector traces = constraints.traces(CMatrix::Identity(n, n));
  const RVector a = constraints.bounds();
  double eps = kInf;
  for (Eigen::Index l = 0; l < a.size(); ++l) {
    if (traces(l) > 0) eps = std::min(eps, std::sqrt(a(l) / traces(l)));
  }
  return 0.9 * eps * CMatrix::Identity(n, n);
}

CodebookResult optimize_codebook_gradient(const WhitenedChannel& channel,
                                          const ConstraintSet& constraints, const CMatrix& start,
                                          const SolverOptions& opts) {
  opts.validate();
  const int n = constraints.dimension();
  if (channel.gram.rows() != n) throw DomainError("optimize_codebook_gradient: dimension mismatch");
  const RVector a = constraints.bounds();
  const CMatrix eps_start = initial_factor(constraints);
  CMatrix x = start.size() == 0 ? eps_start : start;
  if (x.rows() != n) throw DomainError("optimize_codebook_gradient: start has wrong row count");
  // Every feasible factor satisfies ||X||_F^2 <= a_U.
  const double radius = std::sqrt(a(a.size() - 1));

  const CMatrix& g = channel.gram;
  CodebookResult out;
  auto& trace = out.trace;
  double best = -kInf;
  CMatrix best_x;
  const double a_floor = a.maxCoeff() * 1e-300;

  for (int k = 1; k <= opts.inner_max_iters; ++k) {
    const CMatrix y = g * x;
    const CMatrix s = hermitian_part(x.adjoint() * y);
    const RVector tr = constraints.traces(x * x.adjoint());

    const double t = radial_scale(tr, a);
    if (t > 0) {
      const double value = logdet_hpd(identity_plus(s, t * t));
      if (value > best) {
        best = value;
        best_x = t * x;
      }
    }
    trace.iterations = k;
    trace.history.push_back(std::max(best, 0.0));

    RVector weights = RVector::Zero(a.size());
    bool violated = false;
    for (Eigen::Index l = 0; l < a.size(); ++l) {
      if (tr(l) > a(l)) {
        weights(l) = 1.0 / std::max(a(l), a_floor);
        violated = true;
      }
    }
    CMatrix dir;
    if (violated) {
      dir = -(constraints.weighted_sum(weights) * x);
    } else {
      Eigen::LLT<CMatrix> llt(identity_plus(s));
      dir = llt.solve(y.adjoint()).adjoint();
    }
    const double dn = dir.norm();
    if (!(dn > 0)) {
      trace.converged = true;
      break;
    }
    x += (opts.step(k) * radius / dn) * dir;

    const auto w = static_cast<std::size_t>(opts.inner_window);
    if (trace.history.size() > w) {
      const double then = trace.history[trace.history.size() - 1 - w];
      const double now = trace.history.back();
      if (now - then <= opts.inner_rel_tol * std::abs(now)) {
        trace.converged = true;
        break;
      }
    }
  }

  if (best_x.size() == 0 || !(best > 0)) {
    trace.no_progress = true;
    trace.objective = 0.0;
    out.covariance = CMatrix::Zero(n, n);
    out.factor = CMatrix::Zero(n, 1);
    return out;
  }
  trace.objective = best;
  out.factor = std::move(best_x);
  out.covariance = hermitian_part(out.factor * out.factor.adjoint());
  return out;
}

// ---------------------------------------------------------------------------
// Codebook: eigenmode-restricted dual method

CodebookResult optimize_codebook_dual(const WhitenedChannel& channel,
                                      const ConstraintSet& constraints,
                                      const SolverOptions& opts) {
  opts.validate();
  const int n = constraints.dimension();
  if (channel.gram.rows() != n) throw DomainError("optimize_codebook_dual: dimension mismatch");
  CodebookResult out;
  out.covariance = CMatrix::Zero(n, n);
  out.factor = CMatrix::Zero(n, 1);
  out.multipliers = RVector::Zero(static_cast<Eigen::Index>(constraints.size()));
  const RVector a = constraints.bounds();
  if (a.maxCoeff() <= 0) {
    out.trace.no_progress = true;
    return out;
  }

  const Svd svd = svd_complex(channel.whitened);
  const RVector& xi = svd.values;
  if (xi.size() == 0 || xi(0) <= 0) {
    out.trace.no_progress = true;
    return out;
  }
  Eigen::Index rank = 0;
  while (rank < xi.size() && xi(rank) > opts.rank_cut * xi(0)) ++rank;
  const CMatrix v = svd.right.leftCols(rank);
  const RVector sigma2 = xi.head(rank).cwiseAbs2().cwiseInverse();

  RMatrix e = constraints.mode_coefficients(v);
  const double e_scale = e.cwiseAbs().maxCoeff();
  if (e.minCoeff() < -opts.psd_clip_tol * e_scale) {
    throw DefinitenessError("optimize_codebook_dual: negative mode coefficient");
  }
  e = e.cwiseMax(0.0);

  // Rows normalized by a_l; rows with a_l = 0 only block the modes they touch.
  const Eigen::Index rows = e.rows();
  RMatrix et = RMatrix::Zero(rows, rank);
  std::vector<bool> active(static_cast<std::size_t>(rows), false);
  RVector cap = RVector::Constant(rank, kInf);
  for (Eigen::Index l = 0; l < rows; ++l) {
    for (Eigen::Index i = 0; i < rank; ++i) {
      if (e(l, i) <= 1e-14 * e_scale) continue;
      cap(i) = a(l) > 0 ? std::min(cap(i), a(l) / e(l, i)) : 0.0;
    }
    if (a(l) > 0) {
      et.row(l) = e.row(l) / a(l);
      active[static_cast<std::size_t>(l)] = true;
    }
  }

  auto primal_for = [&](const RVector& mu) {
    const RVector price = et.transpose() * mu;
    RVector p(rank);
    for (Eigen::Index i = 0; i < rank; ++i) {
      const double level = price(i) > 0 ? 1.0 / price(i) : kInf;
      p(i) = std::clamp(level - sigma2(i), 0.0, cap(i));
    }
    return p;
  };
  auto value_of = [&](const RVector& p) {
    return (p.array() / sigma2.array()).log1p().sum();
  };

  // Start from the power-only water-filling multiplier.
  RVector mu = RVector::Zero(rows);
  {
    const RVector wf = water_filling(sigma2, a(rows - 1));
    double level = 0;
    for (Eigen::Index i = 0; i < rank; ++i) {
      if (wf(i) > 0) level = std::max(level, wf(i) + sigma2(i));
    }
    mu(rows - 1) = level > 0 ? a(rows - 1) / level : 1.0;
  }
  const double mu_scale = mu.norm();

  double best_primal = -kInf;
  double best_dual = kInf;
  RVector best_p = RVector::Zero(rank);
  auto& trace = out.trace;
  for (int k = 1; k <= opts.inner_max_iters; ++k) {
    const RVector p = primal_for(mu);
    const RVector load = et * p;
    double dual = value_of(p) - (et.transpose() * mu).dot(p);
    for (Eigen::Index l = 0; l < rows; ++l) {
      if (active[static_cast<std::size_t>(l)]) dual += mu(l);
    }
    best_dual = std::min(best_dual, dual);

    const double worst = load.maxCoeff();
    const RVector repaired = worst > 1 ? RVector(p / worst * (1 - 1e-12)) : p;
    const double primal = value_of(repaired);
    if (primal > best_primal) {
      best_primal = primal;
      best_p = repaired;
    }
    trace.iterations = k;
    trace.history.push_back(best_primal);
    if (best_dual - best_primal <= opts.inner_rel_tol * std::max(std::abs(best_primal), 1e-300)) {
      trace.converged = true;
      break;
    }

    RVector g = load.array() - 1.0;
    for (Eigen::Index l = 0; l < rows; ++l) {
      if (!active[static_cast<std::size_t>(l)] || (mu(l) <= 0 && g(l) < 0)) g(l) = 0;
    }
    const double gn = g.norm();
    if (!(gn > 0)) {
      trace.converged = true;
      break;
    }
    mu = (mu + (opts.step(k) * mu_scale / gn) * g).cwiseMax(0.0);
  }

  for (Eigen::Index l = 0; l < rows; ++l) {
    if (active[static_cast<std::size_t>(l)]) out.multipliers(l) = mu(l) / a(l);
  }
  out.mode_power = best_p;
  trace.objective = std::max(best_primal, 0.0);
  if (!(best_p.maxCoeff() > 0)) {
    trace.no_progress = true;
    return out;
  }
  out.factor = v * best_p.cwiseSqrt().asDiagonal();
  out.covariance = hermitian_part(out.factor * out.factor.adjoint());
  return out;
}

// ---------------------------------------------------------------------------
// Alternating maximization

double min_sdr_margin(const DesignVariables& v, const Scenario& s) {
  const RVector sdr = all_sdr(v.covariance, v.radar_power, v.filters, s);
  double margin = kInf;
  for (std::size_t c = 0; c < s.radar.cells.size(); ++c) {
    margin = std::min(margin, sdr(static_cast<Eigen::Index>(c)) / s.radar.cells[c].threshold);
  }
  return margin;
}

void require_feasible(const Scenario& s) {
  const RVector bound = max_feasible_rho(s);
  const auto& cells = s.radar.cells;
  double worst = kInf;
  int worst_cell = -1;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double ratio = bound(static_cast<Eigen::Index>(c)) / cells[c].threshold;
    if (ratio < worst) {
      worst = ratio;
      worst_cell = static_cast<int>(c);
    }
  }
  if (worst < 1 - 1e-12) {
    const auto& cell = cells[static_cast<std::size_t>(worst_cell)];
    std::ostringstream os;
    os << "infeasible: " << cell_name(cell) << " requires SDR " << to_db(cell.threshold)
       << " dB but at most " << to_db(bound(worst_cell)) << " dB is attainable";
    throw InfeasibleError(os.str(), worst_cell);
  }
}

CMatrix waterfilling_transmit_covariance(const Scenario& s) {
  const Svd svd = svd_complex(s.comm.channel);
  const Eigen::Index modes = svd.values.size();
  RVector noise(modes);
  for (Eigen::Index k = 0; k < modes; ++k) {
    const double gain = svd.values(k) * svd.values(k);
    noise(k) = gain > 0 ? s.comm.noise_power / gain : std::numeric_limits<double>::infinity();
  }
  const RVector p = water_filling(noise, s.comm.max_power);
  const CMatrix w = svd.right.leftCols(modes);
  return hermitian_part(w * p.asDiagonal() * w.adjoint());
}

CMatrix waterfilling_covariance(const Scenario& s) {
  const CMatrix cw = waterfilling_transmit_covariance(s);
  const int n = s.chips();
  const int m = s.tx();
  CMatrix c = CMatrix::Zero(m * n, m * n);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) c.block(a * n, b * n, n, n).diagonal().setConstant(cw(a, b));
  }
  return c;
}

namespace {

// Largest t in [0, 1] with every cell at threshold for t * cw, SDR-optimal
// filters and Pr_max.
double waterfilling_scale(const CMatrix& cw, const Scenario& s) {
  auto feasible = [&](double t) {
    DesignVariables v;
    v.covariance = t * cw;
    v.radar_power = s.radar.max_power;
    v.filters = update_filters(v.covariance, v.radar_power, s);
    return min_sdr_margin(v, s) >= 1.0;
  };
  if (feasible(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

using Clock = std::chrono::steady_clock;

SolveResult ascend(const Scenario& s, const SolverOptions& opts, CMatrix covariance, CMatrix factor,
                   bool codebook_first, Clock::time_point t0) {
  const int n = s.chips();
  const double bits = 1.0 / (n * std::numbers::ln2);

  SolveResult result;
  auto& v = result.variables;
  auto& trace = result.trace;
  v.covariance = std::move(covariance);
  v.radar_power = s.radar.max_power;
  v.filters = update_filters(v.covariance, v.radar_power, s);

  auto record = [&](int iteration, double objective, int inner) {
    TraceRow row;
    row.iteration = iteration;
    row.mutual_information = objective * bits;
    row.radar_power = v.radar_power;
    row.min_margin = min_sdr_margin(v, s);
    row.comm_power = v.covariance.trace().real() / n;
    row.inner_iterations = inner;
    row.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
    trace.rows.push_back(row);
  };
  double previous = v.covariance.isZero(0.0)
                        ? 0.0
                        : log_det_gain(whitened_channel(v.radar_power, s), v.covariance);
  record(0, previous, 0);

  for (int t = 1; t <= opts.outer_max_iters; ++t) {
    if (t > 1 || !codebook_first) {
      v.filters = update_filters(v.covariance, v.radar_power, s);
      v.radar_power = update_radar_power(v.covariance, v.filters, s);
    }
    const WhitenedChannel channel = whitened_channel(v.radar_power, s);
    const ConstraintSet constraints = constraint_coefficients(v.filters, v.radar_power, s);

    CodebookResult candidate = opts.codebook_method == CodebookMethod::gradient
                                   ? optimize_codebook_gradient(channel, constraints, factor, opts)
                                   : optimize_codebook_dual(channel, constraints, opts);
    // The previous covariance stays feasible for the new constraints, so the
    // better of the two is kept.
    const double kept = log_det_gain(channel, v.covariance);
    const double fresh = log_det_gain(channel, candidate.covariance);
    double objective = kept;
    if (fresh > kept) {
      objective = fresh;
      v.covariance = std::move(candidate.covariance);
      factor = std::move(candidate.factor);
    }
    record(t, objective, candidate.trace.iterations);
    if (std::abs(objective - previous) <= opts.outer_rel_tol * std::abs(objective)) {
      trace.converged = true;
      break;
    }
    previous = objective;
  }
  return result;
}

}  // namespace

SolveResult alternating_maximization(const Scenario& s, const SolverOptions& opts) {
  opts.validate();
  require_feasible(s);
  const auto t0 = Clock::now();
  const int n = s.chips();
  const int m = s.tx();

  SolveResult best = ascend(s, opts, CMatrix::Zero(m * n, m * n), CMatrix(), true, t0);

  const CMatrix cw = waterfilling_transmit_covariance(s);
  const double scale = waterfilling_scale(waterfilling_covariance(s), s);
  if (scale > 0) {
    const CMatrix root = std::sqrt(scale) * psd_sqrt(cw);
    CMatrix factor = CMatrix::Zero(m * n, m * n);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) factor.block(a * n, b * n, n, n).diagonal().setConstant(root(a, b));
    try {
      SolveResult other = ascend(s, opts, hermitian_part(factor * factor.adjoint()), factor, false, t0);
      if (other.trace.rows.back().mutual_information > best.trace.rows.back().mutual_information) {
        best = std::move(other);
      }
    } catch (const InfeasibleError&) {
      // Bisection round-off left the start marginally infeasible.
    }
  }
  return best;
}

}  // namespace coexist
