#include "coexist/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace coexist {

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::vector<int> permutation(int n, std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  // Full Fisher-Yates so the stream consumption is independent of how many
  // entries the caller keeps.
  for (int k = n - 1; k > 0; --k) {
    std::uniform_int_distribution<int> pick(0, k);
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  return idx;
}

int active_count(double delta, int n) {
  const int k = static_cast<int>(std::ceil(delta * n - 1e-9));
  return std::clamp(k, 0, n);
}

}  // namespace

CVector barker5_code(int chips) {
  CVector q(5);
  q << 1.0, 1.0, 1.0, -1.0, 1.0;
  return q * std::sqrt(static_cast<double>(chips) / 5.0);
}

CVector shifted_code(const CVector& code, int shift, int chips) {
  if (chips <= 0 || code.size() > chips) {
    throw DomainError("shifted_code: code longer than the PRT");
  }
  if (shift < 0 || shift >= chips) throw DomainError("shifted_code: shift out of range");
  CVector out = CVector::Zero(chips);
  for (Eigen::Index l = 0; l < code.size(); ++l) {
    out((l + shift) % chips) = code(l);
  }
  return out;
}

CMatrix shifted_code_matrix(const CVector& code, int chips) {
  CMatrix q(chips, chips);
  for (int i = 0; i < chips; ++i) q.col(i) = shifted_code(code, i, chips);
  return q;
}

std::pair<RMatrix, RMatrix> selection_matrices(int antenna, int chip, int offset, int chips,
                                               int tx) {
  if (antenna < 0 || antenna >= tx) throw DomainError("selection_matrices: antenna out of range");
  if (chip < 0 || chip >= chips) throw DomainError("selection_matrices: chip out of range");
  const int n = chips;
  const int lag = ((offset + chip) % n + n) % n;
  RMatrix a = RMatrix::Zero(n, tx * n);
  RMatrix b = RMatrix::Zero(n, tx * n);
  // A: rows lag..N-1 take the first N - lag symbols of the current codeword.
  for (int r = lag; r < n; ++r) a(r, antenna * n + (r - lag)) = 1.0;
  // B: rows 0..lag-1 take the last lag symbols of the previous codeword.
  for (int r = 0; r < lag; ++r) b(r, antenna * n + (n - lag) + r) = 1.0;
  return {a, b};
}

Scenario validate_scenario(Scenario s) {
  auto& radar = s.radar;
  auto& comm = s.comm;
  const int n = radar.chips;
  check(n > 0, "chips must be positive");
  const int len = radar.code_length();
  check(len > 0 && len < n, "code length must satisfy 0 < L < N");
  check(radar.code.allFinite(), "radar code has non-finite entries");
  const double norm2 = radar.code.squaredNorm();
  check(std::abs(norm2 - n) <= 0.01 * n,
        "radar code energy deviates from N by more than 1% (||q||^2 = " + std::to_string(norm2) +
            ")");
  if (std::abs(norm2 - n) > 1e-12 * n) radar.code *= std::sqrt(n / norm2);

  check(radar.max_power > 0, "radar max power must be positive");
  check(radar.noise_power > 0, "radar noise power must be positive");
  check(radar.beams > 0, "beam count must be positive");
  check(radar.clutter.rows() == n && radar.clutter.cols() == radar.beams,
        "clutter matrix must be N x J");
  check(radar.clutter.allFinite() && radar.clutter.minCoeff() >= 0,
        "clutter variances must be finite and non-negative");
  check(!radar.cells.empty(), "protected cell set is empty");
  std::set<std::pair<int, int>> seen;
  for (const auto& c : radar.cells) {
    check(c.range >= 0 && c.range <= n - len, "protected cell range bin out of [0, N-L]");
    check(c.beam >= 0 && c.beam < radar.beams, "protected cell beam out of range");
    check(std::isfinite(c.target_variance) && c.target_variance >= 0,
          "target variance must be non-negative");
    check(std::isfinite(c.threshold) && c.threshold > 0, "SDR threshold must be positive");
    check(seen.emplace(c.range, c.beam).second, "duplicate protected cell");
  }

  check(comm.tx > 0 && comm.rx > 0, "antenna counts must be positive");
  check(comm.channel.rows() == comm.rx && comm.channel.cols() == comm.tx,
        "channel matrix must be K x M");
  check(comm.channel.allFinite(), "channel has non-finite entries");
  check(comm.max_power > 0, "comm max power must be positive");
  check(comm.noise_power > 0, "comm noise power must be positive");
  check(comm.channel_variance >= 0, "channel variance must be non-negative");
  if (comm.interference.empty()) {
    comm.interference.assign(static_cast<std::size_t>(n), CMatrix::Zero(comm.rx, comm.rx));
  }
  check(static_cast<int>(comm.interference.size()) == n, "need N radar->comm covariances");
  for (auto& sigma : comm.interference) {
    check(sigma.rows() == comm.rx && sigma.cols() == comm.rx,
          "radar->comm covariance must be K x K");
    check(sigma.allFinite(), "radar->comm covariance has non-finite entries");
    check(is_psd(sigma), "radar->comm covariance is not Hermitian PSD");
    sigma = hermitian_part(sigma);
  }

  s.offset = ((s.offset % n) + n) % n;

  auto& by_beam = s.cross.by_beam;
  if (by_beam.empty()) by_beam.resize(static_cast<std::size_t>(radar.beams));
  check(static_cast<int>(by_beam.size()) == radar.beams, "scattering slices: need one list per beam");
  for (auto& slices : by_beam) {
    std::vector<ScatterSlice> kept;
    for (auto& slice : slices) {
      check(slice.chip >= 0 && slice.chip < n, "scattering slice chip out of range");
      check(slice.covariance.rows() == comm.tx && slice.covariance.cols() == comm.tx,
            "scattering slice must be M x M");
      check(slice.covariance.allFinite(), "scattering slice has non-finite entries");
      check(is_psd(slice.covariance), "scattering slice is not Hermitian PSD");
      if (slice.covariance.cwiseAbs().maxCoeff() == 0) continue;
      slice.covariance = hermitian_part(slice.covariance);
      kept.push_back(std::move(slice));
    }
    std::sort(kept.begin(), kept.end(),
              [](const ScatterSlice& a, const ScatterSlice& b) { return a.chip < b.chip; });
    for (std::size_t k = 1; k < kept.size(); ++k) {
      check(kept[k].chip != kept[k - 1].chip, "duplicate scattering slice");
    }
    slices = std::move(kept);
  }
  return s;
}

Scenario random_scenario(const Scenario& templ, double delta, double sigma2, std::uint64_t seed) {
  if (!(delta >= 0 && delta <= 1)) throw DomainError("random_scenario: delta outside [0, 1]");
  if (!(sigma2 >= 0)) throw DomainError("random_scenario: negative interference intensity");
  Scenario s = templ;
  const int n = s.chips();
  const int m = s.tx();
  const int k = s.rx();
  std::mt19937_64 rng(seed);

  std::normal_distribution<double> gauss(0.0, std::sqrt(s.comm.channel_variance / 2.0));
  s.comm.channel.resize(k, m);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < m; ++c) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      s.comm.channel(r, c) = {re, im};
    }
  }

  const int active = active_count(delta, n);
  s.comm.interference.assign(static_cast<std::size_t>(n), CMatrix::Zero(k, k));
  const auto alpha_order = permutation(n, rng);
  for (int t = 0; t < active && sigma2 > 0; ++t) {
    s.comm.interference[static_cast<std::size_t>(alpha_order[static_cast<std::size_t>(t)])] =
        sigma2 * CMatrix::Identity(k, k);
  }

  s.cross.by_beam.assign(static_cast<std::size_t>(s.radar.beams), {});
  for (int j = 0; j < s.radar.beams; ++j) {
    const auto order = permutation(n, rng);
    if (sigma2 <= 0) continue;
    auto& slices = s.cross.by_beam[static_cast<std::size_t>(j)];
    for (int t = 0; t < active; ++t) {
      slices.push_back({order[static_cast<std::size_t>(t)], sigma2 * CMatrix::Identity(m, m)});
    }
    std::sort(slices.begin(), slices.end(),
              [](const ScatterSlice& a, const ScatterSlice& b) { return a.chip < b.chip; });
  }
  return s;
}

std::vector<ProtectedCell> full_cell_grid(int chips, int code_length, int beams,
                                          double target_variance, double threshold) {
  std::vector<ProtectedCell> cells;
  for (int j = 0; j < beams; ++j) {
    for (int n = 0; n <= chips - code_length; ++n) {
      cells.push_back({n, j, target_variance, threshold});
    }
  }
  return cells;
}

Scenario select_cells(const Scenario& s, int count, std::uint64_t seed) {
  if (s.radar.cells.empty()) throw DomainError("select_cells: template has no cells");
  Scenario out = s;
  const auto& proto = s.radar.cells.front();
  auto grid = full_cell_grid(s.chips(), s.radar.code_length(), s.radar.beams,
                             proto.target_variance, proto.threshold);
  const int total = static_cast<int>(grid.size());
  if (count <= 0 || count >= total) {
    out.radar.cells = std::move(grid);
    return out;
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto order = permutation(total, rng);
  std::vector<int> chosen(order.begin(), order.begin() + count);
  std::sort(chosen.begin(), chosen.end());
  out.radar.cells.clear();
  for (int idx : chosen) out.radar.cells.push_back(grid[static_cast<std::size_t>(idx)]);
  return out;
}

Scenario with_threshold(Scenario s, double threshold) {
  if (!(threshold > 0)) throw DomainError("with_threshold: threshold must be positive");
  for (auto& c : s.radar.cells) c.threshold = threshold;
  return s;
}

Scenario without_interference(Scenario s) {
  for (auto& sigma : s.comm.interference) sigma.setZero();
  for (auto& slices : s.cross.by_beam) slices.clear();
  return s;
}

Scenario default_template() {
  Scenario s;
  constexpr int kChips = 100;  // 15 kHz PRF at 1.5 MHz bandwidth
  constexpr int kBeams = 3;
  auto& radar = s.radar;
  radar.chips = kChips;
  radar.code = barker5_code(kChips);
  radar.max_power = 25.0;         // W, 500 W peak at duty cycle L/N
  radar.noise_power = 2.39e-14;   // W, 4e-21 W/Hz * 1.5 MHz * NF 6 dB
  radar.beams = kBeams;
  radar.clutter = RMatrix::Constant(kChips, kBeams, 4.8e-17);  // 7 dB CNR at full power
  // sigma2_g * N * Pr_max / Pu = 17 dB; 0 dB threshold until overridden.
  radar.cells = full_cell_grid(kChips, 5, kBeams, 4.8e-16, 1.0);

  auto& comm = s.comm;
  comm.tx = 2;
  comm.rx = 2;
  comm.channel = CMatrix::Zero(2, 2);
  comm.max_power = 10e-3;          // W
  comm.noise_power = 2.39e-14;     // W
  comm.channel_variance = 3e-10;   // sigma2_h * Pc_max / Pv = 21 dB
  comm.interference.assign(kChips, CMatrix::Zero(2, 2));

  s.cross.by_beam.assign(kBeams, {});
  s.offset = 0;
  return s;
}

}  // namespace coexist
