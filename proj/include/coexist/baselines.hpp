#pragma once

// Reference designs: the two systems designed in isolation, evaluated with
// and without their mutual interference, and the two one-sided overlays.

#include <string>

#include "coexist/solver.hpp"

namespace coexist {

enum class BaselineKind { non_interfering, disjoint, comm_first, radar_first };

std::string to_string(BaselineKind kind);
/// Accepts "non_interfering" or "non-interfering" style names.
BaselineKind parse_baseline_kind(const std::string& name);

struct BaselineResult {
  BaselineKind kind = BaselineKind::non_interfering;
  DesignVariables variables;
  double mutual_information = 0.0;  // bits per channel use
  RVector sdr;                      // per cell, linear
  double min_sdr = 0.0;             // largest uniform threshold still met
  double min_margin = 0.0;          // min over cells of SDR / rho
};

/// Radar at Pr_max with interference-free filters, comm water-filling; all
/// metrics with cross-interference removed.
BaselineResult non_interfering_design(const Scenario& s);

/// The non-interfering variables re-evaluated under the true interference.
BaselineResult disjoint_evaluation(const Scenario& s);

/// C fixed to water-filling; radar filters and power cycled to a fixed point.
BaselineResult comm_first_overlay(const Scenario& s);

/// Radar fixed at Pr_max with interference-free filters; one codebook solve.
BaselineResult radar_first_overlay(const Scenario& s, const SolverOptions& opts);

BaselineResult evaluate_baseline(BaselineKind kind, const Scenario& s, const SolverOptions& opts);

}  // namespace coexist
