#pragma once

// Block coordinate ascent over (filters, radar power, codeword covariance)
// and the two codebook sub-solvers.

#include <string>
#include <vector>

#include "coexist/metrics.hpp"

namespace coexist {

enum class CodebookMethod { gradient, dual };

std::string to_string(CodebookMethod m);
CodebookMethod parse_codebook_method(const std::string& name);

/// alpha_k = a / (b + k), k = 1, 2, ...  The gradient solver multiplies it by
/// the feasible radius sqrt(a_U).
struct StepSchedule {
  double a = 3.0;
  double b = 0.0;
  double operator()(int k) const { return a / (b + k); }
};

struct SolverOptions {
  CodebookMethod codebook_method = CodebookMethod::gradient;
  int outer_max_iters = 100;
  double outer_rel_tol = 1e-6;
  int inner_max_iters = 5000;
  double inner_rel_tol = 1e-8;
  StepSchedule step;
  double psd_clip_tol = 1e-10;
  double rank_cut = 1e-12;
  /// Stall window (iterations) for the inner relative-improvement test.
  int inner_window = 200;

  /// Throws DomainError on non-positive tolerances or iteration caps.
  void validate() const;
};

struct InnerTrace {
  int iterations = 0;
  bool converged = false;
  bool no_progress = false;
  double objective = 0.0;       // log det(I + F C F^H), nats
  std::vector<double> history;  // best objective after each iteration
};

struct CodebookResult {
  CMatrix covariance;  // MN x MN
  CMatrix factor;      // covariance = factor * factor^H
  InnerTrace trace;
  RVector multipliers;  // dual solver only, aligned with the constraint rows
  RVector mode_power;   // dual solver only
};

struct TraceRow {
  int iteration = 0;
  double mutual_information = 0.0;  // bits per channel use
  double radar_power = 0.0;
  double min_margin = 0.0;  // min over cells of SDR / rho
  double comm_power = 0.0;  // tr(C) / N
  int inner_iterations = 0;
  double wall_time = 0.0;  // seconds since the solve started
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  bool converged = false;
};

struct SolveResult {
  DesignVariables variables;
  SolveTrace trace;
};

/// SDR-optimal filters w = D_j^{-1} q_n, unit norm, aligned with s.radar.cells.
std::vector<CVector> update_filters(const CMatrix& covariance, double radar_power,
                                    const Scenario& s);

/// Least radar power meeting every SDR constraint for fixed C and filters.
/// Throws InfeasibleError when a cell cannot reach its threshold at any
/// power and PowerBudgetError when the result exceeds Pr_max.
double update_radar_power(const CMatrix& covariance, const std::vector<CVector>& filters,
                          const Scenario& s);

/// F^H F X (I + X^H F^H F X)^{-1}: the conjugate gradient of log det(I + F X X^H F^H).
CMatrix codebook_gradient(const CMatrix& gram, const CMatrix& factor);

/// log det(I + X^H G X) for G = F^H F.
double factor_objective(const CMatrix& gram, const CMatrix& factor);

/// epsilon * I with epsilon = 0.9 min_l sqrt(a_l / tr E_l).
CMatrix initial_factor(const ConstraintSet& constraints);

/// Projected gradient ascent on the factor X of C = X X^H.  `start` may be
/// empty (then initial_factor is used).
CodebookResult optimize_codebook_gradient(const WhitenedChannel& channel,
                                          const ConstraintSet& constraints, const CMatrix& start,
                                          const SolverOptions& opts);

/// Eigenmode-restricted solution via projected subgradient on the dual.
CodebookResult optimize_codebook_dual(const WhitenedChannel& channel,
                                      const ConstraintSet& constraints,
                                      const SolverOptions& opts);

/// M x M transmit covariance water-filled over the singular values of H at
/// per-chip power Pc_max.
CMatrix waterfilling_transmit_covariance(const Scenario& s);

/// Cw (x) I_N in the stacked-codeword layout.
CMatrix waterfilling_covariance(const Scenario& s);

/// Min over cells of SDR / rho.
double min_sdr_margin(const DesignVariables& v, const Scenario& s);

/// Throws InfeasibleError naming the worst cell when some threshold exceeds
/// its feasibility bound.
void require_feasible(const Scenario& s);

/// Block coordinate ascent from two feasible starts, returning the better:
/// C = 0 at Pr_max with the codebook block first, and the largest feasible
/// multiple of the water-filling covariance with the filter block first.
SolveResult alternating_maximization(const Scenario& s, const SolverOptions& opts);

}  // namespace coexist
