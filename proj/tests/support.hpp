#pragma once

// Shared fixtures and independent oracles for the test binaries.  Oracles
// build every quantity from the defining formulas with dense matrices and
// avoid the library's own structured code paths.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "coexist/model.hpp"

namespace coexist::test {

using cd = std::complex<double>;

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                              double variance = 1.0) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2));
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cd(g(rng), g(rng));
  return m;
}

/// G G^H / n + floor I.
inline CMatrix random_hpd(Eigen::Index n, std::mt19937_64& rng, double floor = 0.1) {
  const CMatrix g = random_complex(n, n, rng);
  CMatrix a = g * g.adjoint() / double(n);
  a.diagonal().array() += floor;
  return (a + a.adjoint()) / 2.0;
}

inline CMatrix random_psd(Eigen::Index n, Eigen::Index rank, std::mt19937_64& rng,
                          double scale = 1.0) {
  const CMatrix g = random_complex(n, rank, rng);
  CMatrix a = scale * g * g.adjoint();
  return (a + a.adjoint()) / 2.0;
}

struct SmallSpec {
  int chips = 6;
  int code_length = 2;
  int beams = 2;
  int tx = 2;
  int rx = 2;
  int offset = 1;
  double clutter = 0.02;
  double alpha = 0.3;    // radar -> comm scale
  double scatter = 0.2;  // comm -> radar scale
  double power_budget = 0.5;
  /// Threshold as a fraction of the smallest feasibility bound (linear).
  double threshold_fraction = 0.4;
  std::uint64_t seed = 1;
};

/// O(1)-scaled random instance with dense (non-diagonal) interference
/// statistics on every chip.  Thresholds are set from the exact bound
/// oracle so the instance is always feasible.
Scenario small_scenario(const SmallSpec& spec);

/// Smallest per-cell feasibility bound, from bound_oracle.
double oracle_min_bound(const Scenario& s);

/// q_i built by hand.
CVector shifted_code_oracle(const CVector& code, int shift, int chips);

/// C_{m,m',i}: the two-block rearrangement of C_{m,m'} for chip i.
CMatrix shifted_cross_block(const CMatrix& covariance, int m, int mp, int chip, int offset,
                            int chips);

/// sum_i sum_{m,m'} sigma2_beta[m,m',i,beam] C_{m,m',i}.
CMatrix scatter_oracle(int beam, const CMatrix& covariance, const Scenario& s);

/// D_j = Pr sum_i sigma2_gamma q_i q_i^H + scatter + Pu I.
CMatrix disturbance_oracle(int beam, const CMatrix& covariance, double radar_power,
                           const Scenario& s);

double sdr_oracle(const ProtectedCell& cell, const CMatrix& covariance, double radar_power,
                  const CVector& filter, const Scenario& s);

/// Mutual information with a full KN x KN inverse, bits per channel use.
double mi_oracle(const CMatrix& covariance, double radar_power, const Scenario& s);

/// Largest threshold per cell via the generalized eigenvalue of the pencil.
double bound_oracle(const ProtectedCell& cell, const Scenario& s);

/// Water level by bisection; returns the powers.
RVector waterfill_oracle(const RVector& noise, double budget);

}  // namespace coexist::test
