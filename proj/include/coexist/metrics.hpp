#pragma once

// Performance functionals (mutual information, per-cell SDR) and the data
// derived from them: the whitened channel, the linearized SDR constraints on
// the codeword covariance, and the feasibility bound.

#include <memory>
#include <optional>
#include <vector>

#include "coexist/model.hpp"

namespace coexist {

/// The linear map C -> sum_i sum_{m,m'} sigma2_beta[m,m',i,j] (A_{m,i} C A_{m',i}^T
/// + B_{m,i} C B_{m',i}^T) for each beam j, and its adjoint.  Only non-zero
/// slices are visited.
class ScatterOperator {
 public:
  ScatterOperator() = default;
  explicit ScatterOperator(const Scenario& s);

  int chips() const { return chips_; }
  int tx() const { return tx_; }
  int beams() const { return static_cast<int>(by_beam_.size()); }
  bool empty() const;

  /// N x N covariance of the comm interference seen on `beam` for codeword covariance C.
  CMatrix apply(int beam, const CMatrix& covariance) const;

  /// MN x MN adjoint: tr(C * adjoint(beam, W)) = tr(apply(beam, C) * W).
  CMatrix adjoint(int beam, const CMatrix& weight) const;

  /// For filters `w` (N x R, one column per row) and orthonormal directions V
  /// (MN x D), returns the R x D matrix v_d^H adjoint(beam, w_r w_r^H) v_d.
  RMatrix directional(int beam, const CMatrix& filters, const CMatrix& directions) const;

 private:
  int chips_ = 0;
  int tx_ = 0;
  int offset_ = 0;
  std::vector<std::vector<ScatterSlice>> by_beam_;
};

/// F = R^{-1/2} (H (x) I_N) with R the radar-interference-plus-noise covariance
/// at the comm receiver.  gram = F^H F is cached.
struct WhitenedChannel {
  CMatrix whitened;  // KN x MN
  CMatrix gram;      // MN x MN
  int chips = 0;
};

/// Linear constraints tr(E_l C) <= a_l on the codeword covariance.  Rows from
/// SDR cells are kept implicitly as (beam, filter) pairs on a shared
/// ScatterOperator; explicit dense rows may be appended; the last row is
/// always the power constraint E_U = I, a_U = N * Pc_max.
class ConstraintSet {
 public:
  ConstraintSet(std::shared_ptr<const ScatterOperator> op, int dimension, double power_bound);

  void add_cell(int beam, const CVector& filter, double bound, int cell);
  void add_dense(const CMatrix& matrix, double bound);

  /// U = number of rows including the power constraint.
  std::size_t size() const { return cells_.size() + dense_.size() + 1; }
  int dimension() const { return dimension_; }
  double bound(std::size_t row) const;
  RVector bounds() const;
  /// Cell index for SDR rows; empty for dense rows and the power row.
  std::optional<int> cell_of(std::size_t row) const;
  bool is_power_row(std::size_t row) const { return row + 1 == size(); }

  /// Dense E_l.
  CMatrix matrix(std::size_t row) const;

  /// tr(E_l C) for every row.
  RVector traces(const CMatrix& covariance) const;

  /// sum_l weights(l) E_l.
  CMatrix weighted_sum(const RVector& weights) const;

  /// U x D matrix of v_d^H E_l v_d for the columns v_d of `directions`.
  RMatrix mode_coefficients(const CMatrix& directions) const;

 private:
  struct CellRow {
    int beam;
    CVector filter;
    double bound;
    int cell;
  };
  struct DenseRow {
    CMatrix matrix;
    double bound;
  };
  std::shared_ptr<const ScatterOperator> op_;
  int dimension_;
  double power_bound_;
  std::vector<CellRow> cells_;
  std::vector<DenseRow> dense_;
};

/// KN x KN covariance Pr * sum_i Sigma_alpha[i] (x) q_i q_i^H + Pv * I.
CMatrix comm_disturbance(double radar_power, const Scenario& s);

/// H (x) I_N.
CMatrix lifted_channel(const Scenario& s);

WhitenedChannel whitened_channel(double radar_power, const Scenario& s);

/// log det(I + F C F^H) in nats (not normalized by N).
double log_det_gain(const WhitenedChannel& channel, const CMatrix& covariance);

/// (1/N) log2 det(I + F C F^H): bits per channel use.
double mutual_information(const WhitenedChannel& channel, const CMatrix& covariance);
double mutual_information(const CMatrix& covariance, double radar_power, const Scenario& s);

/// sum_i sigma2_gamma[i, beam] q_i q_i^H.
CMatrix clutter_covariance(int beam, const Scenario& s);

/// D_j = Pr * clutter + scatter(C) + Pu * I.
CMatrix radar_disturbance(int beam, const CMatrix& covariance, double radar_power,
                          const Scenario& s);

/// Signal-to-disturbance ratio (linear) of `cell` for filter w.
double sdr(const ProtectedCell& cell, const CMatrix& covariance, double radar_power,
           const CVector& filter, const Scenario& s);

/// SDR of every protected cell, filters aligned with s.radar.cells.
RVector all_sdr(const CMatrix& covariance, double radar_power, const std::vector<CVector>& filters,
                const Scenario& s);

/// Linearized SDR + power constraints for the given filters and radar power.
/// Throws InfeasibleError when some a_l < 0 (the cell cannot meet its
/// threshold even with C = 0).
ConstraintSet constraint_coefficients(const std::vector<CVector>& filters, double radar_power,
                                      const Scenario& s);

/// Largest threshold each cell can meet (C = 0, Pr = Pr_max, SDR-optimal
/// filters), linear scale, aligned with s.radar.cells.
RVector max_feasible_rho(const Scenario& s);

}  // namespace coexist
