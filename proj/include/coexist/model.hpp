#pragma once

// Coexistence scenario: radar and MIMO link parameters, second-order
// interference statistics, and the structural matrices of the chip-level
// signal model.
//
// Indexing is 0-based throughout: chips i in [0, N), range bins n in
// [0, N - L], beams j in [0, J), transmit antennas m in [0, M).  The stacked
// codeword is c = (c_0^T ... c_{M-1}^T)^T with c_m in C^N, and the stacked
// received vector is r = (r_0^T ... r_{K-1}^T)^T with r_k in C^N.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coexist/numerics.hpp"

namespace coexist {

struct ProtectedCell {
  int range = 0;
  int beam = 0;
  double target_variance = 0.0;  // sigma^2_g
  double threshold = 1.0;        // rho, linear
};

struct RadarParams {
  CVector code;  // length L, scaled to ||q||^2 = N
  int chips = 0;
  double max_power = 0.0;
  double noise_power = 0.0;
  int beams = 0;
  RMatrix clutter;  // N x J clutter variances
  std::vector<ProtectedCell> cells;

  int code_length() const { return static_cast<int>(code.size()); }
};

struct CommParams {
  int tx = 0;  // M
  int rx = 0;  // K
  CMatrix channel;  // K x M
  double max_power = 0.0;
  double noise_power = 0.0;
  double channel_variance = 0.0;  // used only when drawing random channels
  std::vector<CMatrix> interference;  // N Hermitian PSD K x K matrices
};

/// Non-zero M x M comm->radar scattering covariance at one chip offset.
struct ScatterSlice {
  int chip = 0;
  CMatrix covariance;
};

/// Sparse cross-covariances, one chip-sorted slice list per beam.
struct CrossInterference {
  std::vector<std::vector<ScatterSlice>> by_beam;
};

struct Scenario {
  RadarParams radar;
  CommParams comm;
  CrossInterference cross;
  int offset = 0;  // nu, stored reduced mod N

  int chips() const { return radar.chips; }
  int tx() const { return comm.tx; }
  int rx() const { return comm.rx; }
};

struct DesignVariables {
  CMatrix covariance;  // MN x MN
  double radar_power = 0.0;
  std::vector<CVector> filters;  // aligned with radar.cells
};

/// Barker-5 code (+1 +1 +1 -1 +1) scaled so that ||q||^2 = chips.
CVector barker5_code(int chips);

/// q_i: downward circular shift by `shift` of (q^T, 0, ..., 0)^T in C^N.
CVector shifted_code(const CVector& code, int shift, int chips);

/// N x N matrix whose i-th column is q_i.
CMatrix shifted_code_matrix(const CVector& code, int chips);

/// Selection matrices A_{m,i}, B_{m,i} (N x MN, 0/1 entries).
std::pair<RMatrix, RMatrix> selection_matrices(int antenna, int chip, int offset, int chips,
                                               int tx);

/// Checks every invariant and returns a normalized copy: offset reduced mod N,
/// code rescaled to ||q||^2 = N when within 1%, zero scattering slices
/// dropped and the rest sorted by chip.
Scenario validate_scenario(Scenario s);

/// Draws a scenario from `templ`: H ~ CN(0, channel_variance) entrywise;
/// Sigma_alpha[i] = sigma2 * I_K on a ceil(delta N)-subset of chips; per beam,
/// sigma2_beta[i, j] = sigma2 * I_M on an independent ceil(delta N)-subset.
/// Subsets are prefixes of full random permutations, so for a fixed seed the
/// active sets are nested in delta.
Scenario random_scenario(const Scenario& templ, double delta, double sigma2, std::uint64_t seed);

/// Replaces the protected set with `count` cells drawn uniformly without
/// replacement from the full (N - L + 1) x J grid (count <= 0 keeps all).
/// Target variance and threshold are taken from the first template cell.
Scenario select_cells(const Scenario& s, int count, std::uint64_t seed);

/// Protected set covering the full grid with uniform target variance and threshold.
std::vector<ProtectedCell> full_cell_grid(int chips, int code_length, int beams,
                                          double target_variance, double threshold);

/// Sets every protected-cell threshold to `threshold` (linear).
Scenario with_threshold(Scenario s, double threshold);

/// Copy of `s` with all cross-interference (both directions) removed.
Scenario without_interference(Scenario s);

/// Default numerical-study constants (N = 100, Barker-5, J = 3, M = K = 2).
/// The channel is zero and interference absent; use random_scenario to draw.
Scenario default_template();

/// Interference intensities of the numerical study.
inline constexpr double kWeakInterference = 1.2e-13;
inline constexpr double kStrongInterference = 1.2e-11;

}  // namespace coexist
