#include "coexist/metrics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace coexist {

namespace {

int lag_of(int offset, int chip, int chips) { return (offset + chip) % chips; }

}  // namespace

// ---------------------------------------------------------------------------
// ScatterOperator

ScatterOperator::ScatterOperator(const Scenario& s)
    : chips_(s.chips()), tx_(s.tx()), offset_(s.offset), by_beam_(s.cross.by_beam) {
  by_beam_.resize(static_cast<std::size_t>(s.radar.beams));
}

bool ScatterOperator::empty() const {
  for (const auto& slices : by_beam_) {
    if (!slices.empty()) return false;
  }
  return true;
}

CMatrix ScatterOperator::apply(int beam, const CMatrix& covariance) const {
  const int n = chips_;
  CMatrix out = CMatrix::Zero(n, n);
  for (const auto& slice : by_beam_.at(static_cast<std::size_t>(beam))) {
    const int lag = lag_of(offset_, slice.chip, n);
    const int head = n - lag;
    for (int m = 0; m < tx_; ++m) {
      for (int mp = 0; mp < tx_; ++mp) {
        const auto weight = slice.covariance(m, mp);
        if (weight == 0.0) continue;
        const auto block = covariance.block(m * n, mp * n, n, n);
        out.bottomRightCorner(head, head) += weight * block.topLeftCorner(head, head);
        if (lag > 0) out.topLeftCorner(lag, lag) += weight * block.bottomRightCorner(lag, lag);
      }
    }
  }
  return out;
}

CMatrix ScatterOperator::adjoint(int beam, const CMatrix& weight) const {
  const int n = chips_;
  CMatrix out = CMatrix::Zero(tx_ * n, tx_ * n);
  for (const auto& slice : by_beam_.at(static_cast<std::size_t>(beam))) {
    const int lag = lag_of(offset_, slice.chip, n);
    const int head = n - lag;
    for (int m = 0; m < tx_; ++m) {
      for (int mp = 0; mp < tx_; ++mp) {
        const auto sigma = slice.covariance(m, mp);
        if (sigma == 0.0) continue;
        auto block = out.block(mp * n, m * n, n, n);
        block.topLeftCorner(head, head) += sigma * weight.bottomRightCorner(head, head);
        if (lag > 0) block.bottomRightCorner(lag, lag) += sigma * weight.topLeftCorner(lag, lag);
      }
    }
  }
  return out;
}

RMatrix ScatterOperator::directional(int beam, const CMatrix& filters,
                                     const CMatrix& directions) const {
  const int n = chips_;
  const auto rows = filters.cols();
  const auto dims = directions.cols();
  RMatrix out = RMatrix::Zero(rows, dims);
  std::vector<CMatrix> proj(static_cast<std::size_t>(tx_));
  auto accumulate = [&](const CMatrix& sigma) {
    for (int m = 0; m < tx_; ++m) {
      for (int mp = 0; mp < tx_; ++mp) {
        const auto weight = sigma(m, mp);
        if (weight == 0.0) continue;
        const auto& gm = proj[static_cast<std::size_t>(m)];
        const auto& gp = proj[static_cast<std::size_t>(mp)];
        if (m == mp) {
          out += weight.real() * gm.cwiseAbs2();
        } else {
          out += (weight * gm.cwiseProduct(gp.conjugate())).real();
        }
      }
    }
  };
  for (const auto& slice : by_beam_.at(static_cast<std::size_t>(beam))) {
    const int lag = lag_of(offset_, slice.chip, n);
    const int head = n - lag;
    for (int m = 0; m < tx_; ++m) {
      proj[static_cast<std::size_t>(m)].noalias() =
          filters.bottomRows(head).adjoint() * directions.middleRows(m * n, head);
    }
    accumulate(slice.covariance);
    if (lag == 0) continue;
    for (int m = 0; m < tx_; ++m) {
      proj[static_cast<std::size_t>(m)].noalias() =
          filters.topRows(lag).adjoint() * directions.middleRows(m * n + head, lag);
    }
    accumulate(slice.covariance);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ConstraintSet

ConstraintSet::ConstraintSet(std::shared_ptr<const ScatterOperator> op, int dimension,
                             double power_bound)
    : op_(std::move(op)), dimension_(dimension), power_bound_(power_bound) {
  if (!op_) op_ = std::make_shared<ScatterOperator>();
  if (!(power_bound >= 0)) throw DomainError("ConstraintSet: negative power bound");
}

void ConstraintSet::add_cell(int beam, const CVector& filter, double bound, int cell) {
  if (!(bound >= 0)) throw DomainError("ConstraintSet: negative bound");
  if (filter.size() != op_->chips()) throw DomainError("ConstraintSet: filter length mismatch");
  cells_.push_back({beam, filter, bound, cell});
}

void ConstraintSet::add_dense(const CMatrix& matrix, double bound) {
  if (!(bound >= 0)) throw DomainError("ConstraintSet: negative bound");
  if (matrix.rows() != dimension_ || matrix.cols() != dimension_) {
    throw DomainError("ConstraintSet: dense row has wrong dimension");
  }
  dense_.push_back({hermitian_part(matrix), bound});
}

double ConstraintSet::bound(std::size_t row) const {
  if (row < cells_.size()) return cells_[row].bound;
  row -= cells_.size();
  if (row < dense_.size()) return dense_[row].bound;
  if (row == dense_.size()) return power_bound_;
  throw DomainError("ConstraintSet: row out of range");
}

RVector ConstraintSet::bounds() const {
  RVector a(static_cast<Eigen::Index>(size()));
  for (std::size_t l = 0; l < size(); ++l) a(static_cast<Eigen::Index>(l)) = bound(l);
  return a;
}

std::optional<int> ConstraintSet::cell_of(std::size_t row) const {
  if (row < cells_.size()) return cells_[row].cell;
  return std::nullopt;
}

CMatrix ConstraintSet::matrix(std::size_t row) const {
  if (row < cells_.size()) {
    const auto& c = cells_[row];
    return hermitian_part(op_->adjoint(c.beam, c.filter * c.filter.adjoint()));
  }
  row -= cells_.size();
  if (row < dense_.size()) return dense_[row].matrix;
  if (row == dense_.size()) return CMatrix::Identity(dimension_, dimension_);
  throw DomainError("ConstraintSet: row out of range");
}

RVector ConstraintSet::traces(const CMatrix& covariance) const {
  RVector out(static_cast<Eigen::Index>(size()));
  std::vector<std::optional<CMatrix>> per_beam(static_cast<std::size_t>(op_->beams()));
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    const auto& c = cells_[l];
    auto& scatter = per_beam.at(static_cast<std::size_t>(c.beam));
    if (!scatter) scatter = op_->apply(c.beam, covariance);
    out(static_cast<Eigen::Index>(l)) = c.filter.dot(*scatter * c.filter).real();
  }
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    out(static_cast<Eigen::Index>(cells_.size() + d)) =
        dense_[d].matrix.cwiseProduct(covariance.conjugate()).sum().real();
  }
  out(out.size() - 1) = covariance.trace().real();
  return out;
}

CMatrix ConstraintSet::weighted_sum(const RVector& weights) const {
  if (static_cast<std::size_t>(weights.size()) != size()) {
    throw DomainError("ConstraintSet: weight vector size mismatch");
  }
  CMatrix out = CMatrix::Zero(dimension_, dimension_);
  const int n = op_->chips();
  std::vector<std::optional<CMatrix>> per_beam(static_cast<std::size_t>(op_->beams()));
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    const double wl = weights(static_cast<Eigen::Index>(l));
    if (wl == 0) continue;
    const auto& c = cells_[l];
    auto& acc = per_beam.at(static_cast<std::size_t>(c.beam));
    if (!acc) acc = CMatrix::Zero(n, n);
    *acc += wl * c.filter * c.filter.adjoint();
  }
  for (std::size_t j = 0; j < per_beam.size(); ++j) {
    if (per_beam[j]) out += op_->adjoint(static_cast<int>(j), *per_beam[j]);
  }
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    const double wl = weights(static_cast<Eigen::Index>(cells_.size() + d));
    if (wl != 0) out += wl * dense_[d].matrix;
  }
  out.diagonal().array() += weights(weights.size() - 1);
  return out;
}

RMatrix ConstraintSet::mode_coefficients(const CMatrix& directions) const {
  const auto dims = directions.cols();
  RMatrix out(static_cast<Eigen::Index>(size()), dims);
  const int n = op_->chips();
  std::vector<std::vector<std::size_t>> rows_of_beam(static_cast<std::size_t>(op_->beams()));
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    rows_of_beam.at(static_cast<std::size_t>(cells_[l].beam)).push_back(l);
  }
  for (std::size_t j = 0; j < rows_of_beam.size(); ++j) {
    const auto& rows = rows_of_beam[j];
    if (rows.empty()) continue;
    CMatrix filters(n, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      filters.col(static_cast<Eigen::Index>(r)) = cells_[rows[r]].filter;
    }
    const RMatrix block = op_->directional(static_cast<int>(j), filters, directions);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.row(static_cast<Eigen::Index>(rows[r])) = block.row(static_cast<Eigen::Index>(r));
    }
  }
  for (std::size_t d = 0; d < dense_.size(); ++d) {
    const CMatrix ev = dense_[d].matrix * directions;
    out.row(static_cast<Eigen::Index>(cells_.size() + d)) =
        directions.conjugate().cwiseProduct(ev).colwise().sum().real();
  }
  out.row(out.rows() - 1) = directions.colwise().squaredNorm();
  return out;
}

// ---------------------------------------------------------------------------
// Communication side

CMatrix comm_disturbance(double radar_power, const Scenario& s) {
  const int n = s.chips();
  const int k = s.rx();
  CMatrix r = CMatrix::Zero(k * n, k * n);
  r.diagonal().setConstant(s.comm.noise_power);
  if (radar_power == 0) return r;
  for (int i = 0; i < n; ++i) {
    const auto& sigma = s.comm.interference[static_cast<std::size_t>(i)];
    if (sigma.cwiseAbs().maxCoeff() == 0) continue;
    const CVector qi = shifted_code(s.radar.code, i, n);
    const CMatrix outer = qi * qi.adjoint();
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        if (sigma(a, b) == 0.0) continue;
        r.block(a * n, b * n, n, n) += (radar_power * sigma(a, b)) * outer;
      }
    }
  }
  return hermitian_part(r);
}

CMatrix lifted_channel(const Scenario& s) {
  const int n = s.chips();
  CMatrix out = CMatrix::Zero(s.rx() * n, s.tx() * n);
  for (int k = 0; k < s.rx(); ++k) {
    for (int m = 0; m < s.tx(); ++m) {
      out.block(k * n, m * n, n, n).diagonal().setConstant(s.comm.channel(k, m));
    }
  }
  return out;
}

WhitenedChannel whitened_channel(double radar_power, const Scenario& s) {
  if (!(radar_power >= 0)) throw DomainError("whitened_channel: negative radar power");
  bool quiet = radar_power == 0;
  if (!quiet) {
    quiet = true;
    for (const auto& sigma : s.comm.interference) {
      if (sigma.cwiseAbs().maxCoeff() != 0) {
        quiet = false;
        break;
      }
    }
  }
  WhitenedChannel out;
  out.chips = s.chips();
  const CMatrix lifted = lifted_channel(s);
  if (quiet) {
    out.whitened = lifted / std::sqrt(s.comm.noise_power);
  } else {
    out.whitened.noalias() = herm_inv_sqrt(comm_disturbance(radar_power, s)) * lifted;
  }
  out.gram = hermitian_part(out.whitened.adjoint() * out.whitened);
  return out;
}

double log_det_gain(const WhitenedChannel& channel, const CMatrix& covariance) {
  const auto& f = channel.whitened;
  CMatrix m = f * covariance * f.adjoint();
  m.diagonal().array() += 1.0;
  return logdet_hpd(hermitian_part(m));
}

double mutual_information(const WhitenedChannel& channel, const CMatrix& covariance) {
  return log_det_gain(channel, covariance) / (channel.chips * std::numbers::ln2);
}

double mutual_information(const CMatrix& covariance, double radar_power, const Scenario& s) {
  if (!(radar_power >= 0)) throw DomainError("mutual_information: negative radar power");
  return mutual_information(whitened_channel(radar_power, s), covariance);
}

// ---------------------------------------------------------------------------
// Radar side

CMatrix clutter_covariance(int beam, const Scenario& s) {
  const int n = s.chips();
  const CMatrix q = shifted_code_matrix(s.radar.code, n);
  const RVector var = s.radar.clutter.col(beam);
  return hermitian_part(q * var.asDiagonal() * q.adjoint());
}

namespace {

CMatrix disturbance_with(const ScatterOperator& op, const CMatrix& clutter, int beam,
                         const CMatrix& covariance, double radar_power, double noise) {
  CMatrix d = radar_power * clutter;
  if (covariance.size() != 0) d += op.apply(beam, covariance);
  d.diagonal().array() += noise;
  return hermitian_part(d);
}

void require_filter(const CVector& w) {
  if (w.size() == 0 || w.squaredNorm() == 0.0) throw DomainError("sdr: zero filter");
}

}  // namespace

CMatrix radar_disturbance(int beam, const CMatrix& covariance, double radar_power,
                          const Scenario& s) {
  const ScatterOperator op(s);
  return disturbance_with(op, clutter_covariance(beam, s), beam, covariance, radar_power,
                          s.radar.noise_power);
}

double sdr(const ProtectedCell& cell, const CMatrix& covariance, double radar_power,
           const CVector& filter, const Scenario& s) {
  require_filter(filter);
  if (filter.size() != s.chips()) throw DomainError("sdr: filter length mismatch");
  const CMatrix d = radar_disturbance(cell.beam, covariance, radar_power, s);
  const CVector qn = shifted_code(s.radar.code, cell.range, s.chips());
  const double signal = radar_power * cell.target_variance * std::norm(filter.dot(qn));
  return signal / filter.dot(d * filter).real();
}

RVector all_sdr(const CMatrix& covariance, double radar_power, const std::vector<CVector>& filters,
                const Scenario& s) {
  const auto& cells = s.radar.cells;
  if (filters.size() != cells.size()) throw DomainError("all_sdr: filter count mismatch");
  const ScatterOperator op(s);
  std::vector<std::optional<CMatrix>> per_beam(static_cast<std::size_t>(s.radar.beams));
  RVector out(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const auto& w = filters[c];
    require_filter(w);
    auto& d = per_beam.at(static_cast<std::size_t>(cell.beam));
    if (!d) {
      d = disturbance_with(op, clutter_covariance(cell.beam, s), cell.beam, covariance,
                           radar_power, s.radar.noise_power);
    }
    const CVector qn = shifted_code(s.radar.code, cell.range, s.chips());
    const double signal = radar_power * cell.target_variance * std::norm(w.dot(qn));
    out(static_cast<Eigen::Index>(c)) = signal / w.dot(*d * w).real();
  }
  return out;
}

ConstraintSet constraint_coefficients(const std::vector<CVector>& filters, double radar_power,
                                      const Scenario& s) {
  const auto& cells = s.radar.cells;
  if (filters.size() != cells.size()) {
    throw DomainError("constraint_coefficients: filter count mismatch");
  }
  const int n = s.chips();
  auto op = std::make_shared<const ScatterOperator>(s);
  ConstraintSet set(op, s.tx() * n, n * s.comm.max_power);
  const CMatrix q = shifted_code_matrix(s.radar.code, n);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const auto& w = filters[c];
    require_filter(w);
    const RVector gains = (q.adjoint() * w).cwiseAbs2();
    const double signal =
        radar_power * cell.target_variance / cell.threshold * gains(cell.range);
    const double clutter = radar_power * s.radar.clutter.col(cell.beam).dot(gains);
    const double noise = s.radar.noise_power * w.squaredNorm();
    double bound = signal - clutter - noise;
    if (bound < 0) {
      if (bound < -1e-9 * std::max(signal, clutter + noise)) {
        throw InfeasibleError("cell (" + std::to_string(cell.range) + ", " +
                                  std::to_string(cell.beam) +
                                  ") cannot meet its SDR threshold with these filters and power",
                              static_cast<int>(c));
      }
      bound = 0;
    }
    set.add_cell(cell.beam, w, bound, static_cast<int>(c));
  }
  return set;
}

RVector max_feasible_rho(const Scenario& s) {
  const auto& cells = s.radar.cells;
  const int n = s.chips();
  const double pmax = s.radar.max_power;
  RVector out(static_cast<Eigen::Index>(cells.size()));
  std::vector<std::optional<Eigen::LLT<CMatrix>>> per_beam(static_cast<std::size_t>(s.radar.beams));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    auto& llt = per_beam.at(static_cast<std::size_t>(cell.beam));
    if (!llt) {
      CMatrix d = pmax * clutter_covariance(cell.beam, s);
      d.diagonal().array() += s.radar.noise_power;
      llt.emplace(d);
      if (llt->info() != Eigen::Success) throw DefinitenessError("max_feasible_rho: factorization failed");
    }
    const CVector qn = shifted_code(s.radar.code, cell.range, n);
    out(static_cast<Eigen::Index>(c)) =
        cell.target_variance * pmax * qn.dot(llt->solve(qn)).real();
  }
  return out;
}

}  // namespace coexist
