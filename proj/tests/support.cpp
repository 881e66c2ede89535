#include "support.hpp"

#include <algorithm>

#include <Eigen/Eigenvalues>

namespace coexist::test {

CVector shifted_code_oracle(const CVector& code, int shift, int chips) {
  CVector q = CVector::Zero(chips);
  for (int k = 0; k < code.size(); ++k) q((k + shift) % chips) = code(k);
  return q;
}

Scenario small_scenario(const SmallSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = spec.chips;
  Scenario s;
  auto& radar = s.radar;
  radar.chips = n;
  radar.code = CVector(spec.code_length);
  for (int k = 0; k < spec.code_length; ++k) radar.code(k) = std::polar(1.0, 6.283185307179586 * unit(rng));
  radar.code *= std::sqrt(double(n) / radar.code.squaredNorm());
  radar.max_power = 1.0;
  radar.noise_power = 0.1;
  radar.beams = spec.beams;
  radar.clutter = RMatrix(n, spec.beams);
  for (Eigen::Index i = 0; i < radar.clutter.size(); ++i) radar.clutter(i) = spec.clutter * unit(rng);
  radar.cells = full_cell_grid(n, spec.code_length, spec.beams, 1.0, 1.0);

  auto& comm = s.comm;
  comm.tx = spec.tx;
  comm.rx = spec.rx;
  comm.channel = random_complex(spec.rx, spec.tx, rng);
  comm.max_power = spec.power_budget;
  comm.noise_power = 0.1;
  comm.channel_variance = 1.0;
  for (int i = 0; i < n; ++i) {
    comm.interference.push_back(random_psd(spec.rx, spec.rx, rng, spec.alpha / spec.rx));
  }
  s.cross.by_beam.assign(static_cast<std::size_t>(spec.beams), {});
  for (int j = 0; j < spec.beams; ++j) {
    for (int i = 0; i < n; ++i) {
      s.cross.by_beam[static_cast<std::size_t>(j)].push_back(
          {i, random_psd(spec.tx, spec.tx, rng, spec.scatter / spec.tx)});
    }
  }
  s.offset = spec.offset;
  s = validate_scenario(s);
  return with_threshold(s, spec.threshold_fraction * oracle_min_bound(s));
}

double oracle_min_bound(const Scenario& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cell : s.radar.cells) best = std::min(best, bound_oracle(cell, s));
  return best;
}

CMatrix shifted_cross_block(const CMatrix& covariance, int m, int mp, int chip, int offset,
                            int chips) {
  const int n = chips;
  const int ell = (offset + chip) % n;
  const CMatrix cmm = covariance.block(m * n, mp * n, n, n);
  CMatrix out = CMatrix::Zero(n, n);
  out.topLeftCorner(ell, ell) = cmm.bottomRightCorner(ell, ell);
  out.bottomRightCorner(n - ell, n - ell) = cmm.topLeftCorner(n - ell, n - ell);
  return out;
}

CMatrix scatter_oracle(int beam, const CMatrix& covariance, const Scenario& s) {
  const int n = s.chips();
  CMatrix out = CMatrix::Zero(n, n);
  for (const auto& slice : s.cross.by_beam[static_cast<std::size_t>(beam)]) {
    for (int m = 0; m < s.tx(); ++m)
      for (int mp = 0; mp < s.tx(); ++mp)
        out += slice.covariance(m, mp) *
               shifted_cross_block(covariance, m, mp, slice.chip, s.offset, n);
  }
  return out;
}

CMatrix disturbance_oracle(int beam, const CMatrix& covariance, double radar_power,
                           const Scenario& s) {
  const int n = s.chips();
  CMatrix d = scatter_oracle(beam, covariance, s);
  for (int i = 0; i < n; ++i) {
    const CVector q = shifted_code_oracle(s.radar.code, i, n);
    d += radar_power * s.radar.clutter(i, beam) * q * q.adjoint();
  }
  d.diagonal().array() += s.radar.noise_power;
  return d;
}

double sdr_oracle(const ProtectedCell& cell, const CMatrix& covariance, double radar_power,
                  const CVector& filter, const Scenario& s) {
  const CVector q = shifted_code_oracle(s.radar.code, cell.range, s.chips());
  const CMatrix d = disturbance_oracle(cell.beam, covariance, radar_power, s);
  const double num = radar_power * cell.target_variance * std::norm(filter.dot(q));
  return num / (filter.adjoint() * d * filter)(0, 0).real();
}

double mi_oracle(const CMatrix& covariance, double radar_power, const Scenario& s) {
  const int n = s.chips();
  const int k = s.rx();
  CMatrix r = CMatrix::Zero(k * n, k * n);
  for (int i = 0; i < n; ++i) {
    const CVector q = shifted_code_oracle(s.radar.code, i, n);
    const CMatrix qq = q * q.adjoint();
    const CMatrix& sigma = s.comm.interference[static_cast<std::size_t>(i)];
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) r.block(a * n, b * n, n, n) += radar_power * sigma(a, b) * qq;
  }
  r.diagonal().array() += s.comm.noise_power;
  CMatrix lifted = CMatrix::Zero(k * n, s.tx() * n);
  for (int a = 0; a < k; ++a)
    for (int m = 0; m < s.tx(); ++m)
      lifted.block(a * n, m * n, n, n) = s.comm.channel(a, m) * CMatrix::Identity(n, n);
  CMatrix g = CMatrix::Identity(k * n, k * n) + lifted * covariance * lifted.adjoint() * r.inverse();
  Eigen::PartialPivLU<CMatrix> lu(g);
  double logdet = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) logdet += std::log(std::abs(lu.matrixLU()(i, i)));
  return logdet / std::log(2.0) / n;
}

double bound_oracle(const ProtectedCell& cell, const Scenario& s) {
  const int n = s.chips();
  const double pr = s.radar.max_power;
  const CMatrix d = disturbance_oracle(cell.beam, CMatrix::Zero(s.tx() * n, s.tx() * n), pr, s);
  const CVector q = shifted_code_oracle(s.radar.code, cell.range, n);
  const CMatrix signal = pr * cell.target_variance * q * q.adjoint();
  Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> ges(signal, d, Eigen::EigenvaluesOnly);
  return ges.eigenvalues().maxCoeff();
}

RVector waterfill_oracle(const RVector& noise, double budget) {
  auto used = [&](double level) { return (level - noise.array()).max(0.0).sum(); };
  double lo = 0, hi = noise.maxCoeff() + budget;
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2;
    (used(mid) > budget ? hi : lo) = mid;
  }
  return ((lo + hi) / 2 - noise.array()).max(0.0).matrix();
}

}  // namespace coexist::test
