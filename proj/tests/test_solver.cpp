#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "coexist/solver.hpp"
#include "support.hpp"

using namespace coexist;
using coexist::test::cd;

namespace {

Scenario decoupled(const test::SmallSpec& spec) { return without_interference(test::small_scenario(spec)); }

double sdr_ratio_min(const CMatrix& c, double pr, const std::vector<CVector>& w, const Scenario& s) {
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.radar.cells.size(); ++k) {
    const auto& cell = s.radar.cells[k];
    out = std::min(out, test::sdr_oracle(cell, c, pr, w[k], s) / cell.threshold);
  }
  return out;
}

// Power-only problem on a fixed channel: log det(I + G C) with tr C <= budget.
double waterfilling_optimum(const CMatrix& gram, double budget) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const RVector lambda = eig.eigenvalues().cwiseMax(1e-300);
  const RVector p = test::waterfill_oracle(lambda.cwiseInverse(), budget);
  return (1 + p.array() * lambda.array()).log().sum();
}

WhitenedChannel channel_from(const CMatrix& f) {
  WhitenedChannel ch;
  ch.whitened = f;
  ch.gram = f.adjoint() * f;
  ch.chips = static_cast<int>(f.rows());
  return ch;
}

ConstraintSet power_only(int dim, double budget) {
  return ConstraintSet(std::make_shared<ScatterOperator>(), dim, budget);
}

}  // namespace

TEST_CASE("SolverOptions validation and method names") {
  SolverOptions o;
  CHECK_NOTHROW(o.validate());
  o.outer_rel_tol = 0;
  CHECK_THROWS_AS(o.validate(), DomainError);
  o = SolverOptions{};
  o.inner_max_iters = 0;
  CHECK_THROWS_AS(o.validate(), DomainError);
  CHECK(parse_codebook_method("dual") == CodebookMethod::dual);
  CHECK(to_string(CodebookMethod::gradient) == "gradient");
  CHECK_THROWS(parse_codebook_method("newton"));
  CHECK(StepSchedule{}(4) == doctest::Approx(0.75));
  CHECK(StepSchedule{2.0, 3.0}(1) == doctest::Approx(0.5));
}

TEST_CASE("update_filters: matched filter without disturbance structure") {
  Scenario s = test::small_scenario({.seed = 3});
  s.radar.clutter.setZero();
  const auto w = update_filters(CMatrix::Zero(12, 12), 0.8, s);
  REQUIRE(w.size() == s.radar.cells.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const CVector q = test::shifted_code_oracle(s.radar.code, s.radar.cells[k].range, 6);
    CHECK(w[k].norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(w[k].dot(q)) / q.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("update_filters: optimality against oracles") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Scenario s = test::small_scenario({.chips = 6, .seed = seed});
    std::mt19937_64 rng(seed);
    const CMatrix c = test::random_psd(12, 5, rng, 0.1);
    const double pr = 0.7;
    const auto w = update_filters(c, pr, s);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto& cell = s.radar.cells[k];
      const CVector q = test::shifted_code_oracle(s.radar.code, cell.range, 6);
      const CMatrix d = test::disturbance_oracle(cell.beam, c, pr, s);
      const double achieved = test::sdr_oracle(cell, c, pr, w[k], s);
      const double closed = pr * cell.target_variance * (q.adjoint() * d.inverse() * q)(0, 0).real();
      CHECK(std::abs(achieved - closed) < 1e-8 * closed);
      Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> ges(
          CMatrix(pr * cell.target_variance * q * q.adjoint()), d, Eigen::EigenvaluesOnly);
      CHECK(std::abs(achieved - ges.eigenvalues().maxCoeff()) < 1e-8 * achieved);
      for (int trial = 0; trial < 100; ++trial) {
        const CVector alt = test::random_complex(6, 1, rng);
        CHECK(test::sdr_oracle(cell, c, pr, alt, s) <= achieved * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("update_radar_power: closed form, tightness and monotonicity") {
  {
    Scenario s = test::small_scenario({.seed = 4});
    s.radar.clutter.setZero();
    const CMatrix zero = CMatrix::Zero(12, 12);
    std::vector<CVector> matched;
    for (const auto& cell : s.radar.cells) matched.push_back(test::shifted_code_oracle(s.radar.code, cell.range, 6));
    const double rho = s.radar.cells[0].threshold;
    CHECK(update_radar_power(zero, matched, s) ==
          doctest::Approx(rho * s.radar.noise_power / (1.0 * 6)).epsilon(1e-12));
  }
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Scenario s = test::small_scenario({.chips = 6, .threshold_fraction = 0.2, .seed = seed});
    std::mt19937_64 rng(seed);
    const CMatrix c = test::random_psd(12, 3, rng, 0.01);
    const auto w = update_filters(c, 1.0, s);
    const double pr = update_radar_power(c, w, s);
    CHECK(pr <= s.radar.max_power);
    CHECK(std::abs(sdr_ratio_min(c, pr, w, s) - 1.0) < 1e-8);
    double prev = pr;
    for (int k = 0; k < 5; ++k) {
      for (auto& beam : s.cross.by_beam)
        for (auto& slice : beam) slice.covariance *= 1.3;
      const double next = update_radar_power(c, w, s);
      CHECK(next >= prev * (1 - 1e-12));
      prev = next;
    }
  }
}

TEST_CASE("update_radar_power: error cases") {
  const Scenario s = test::small_scenario({.seed = 6});
  const auto w = update_filters(CMatrix::Zero(12, 12), 1.0, s);
  const Scenario hard = with_threshold(s, 50 * test::oracle_min_bound(s));
  CHECK_THROWS_AS(update_radar_power(CMatrix::Zero(12, 12), w, hard), InfeasibleError);
  const CMatrix loud = 1e4 * CMatrix::Identity(12, 12);
  CHECK_THROWS_AS(update_radar_power(loud, update_filters(loud, 1.0, s), s), PowerBudgetError);
}

TEST_CASE("codebook_gradient matches central finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scenario s = test::small_scenario({.chips = 4, .seed = seed});
    const WhitenedChannel ch = whitened_channel(0.5, s);
    std::mt19937_64 rng(seed);
    const CMatrix x = test::random_complex(8, 8, rng, 0.05);
    const CMatrix g = codebook_gradient(ch.gram, x);
    const double h = 1e-6;
    double worst = 0;
    for (Eigen::Index j = 0; j < 8; ++j)
      for (Eigen::Index i = 0; i < 8; ++i)
        for (cd dir : {cd(1, 0), cd(0, 1)}) {
          CMatrix xp = x, xm = x;
          xp(i, j) += h * dir;
          xm(i, j) -= h * dir;
          const double fd = (factor_objective(ch.gram, xp) - factor_objective(ch.gram, xm)) / (2 * h);
          const double analytic = 2 * (std::conj(g(i, j)) * dir).real();
          worst = std::max(worst, std::abs(fd - analytic));
        }
    CHECK(worst / (2 * g.cwiseAbs().maxCoeff()) < 1e-5);
  }
}

TEST_CASE("initial_factor is strictly feasible") {
  const Scenario s = test::small_scenario({.seed = 8});
  const auto w = update_filters(CMatrix::Zero(12, 12), 1.0, s);
  const ConstraintSet cs = constraint_coefficients(w, 1.0, s);
  const CMatrix x = initial_factor(cs);
  CHECK(((cs.traces(x * x.adjoint()) - cs.bounds()).array() < 0).all());
}

TEST_CASE("gradient solver: power-only case reaches water-filling") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    const CMatrix f = test::random_complex(8, 8, rng);
    const WhitenedChannel ch = channel_from(f);
    const ConstraintSet cs = power_only(8, 2.0);
    const CodebookResult r = optimize_codebook_gradient(ch, cs, CMatrix(), SolverOptions{});
    const double target = waterfilling_optimum(ch.gram, 2.0);
    CHECK(r.trace.objective >= target * (1 - 1e-4));
    CHECK(r.trace.objective <= target * (1 + 1e-9));
    CHECK(r.covariance.trace().real() <= 2.0 * (1 + 1e-9));
  }
}

TEST_CASE("gradient solver: feasible output, monotone best, no regress from start") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Scenario s = test::small_scenario({.chips = 6, .seed = seed});
    const auto w = update_filters(CMatrix::Zero(12, 12), 1.0, s);
    const ConstraintSet cs = constraint_coefficients(w, 1.0, s);
    const WhitenedChannel ch = whitened_channel(1.0, s);
    SolverOptions o;
    o.inner_max_iters = 1500;
    const CMatrix x0 = initial_factor(cs);
    const CodebookResult r = optimize_codebook_gradient(ch, cs, x0, o);
    CHECK(((cs.traces(r.covariance) - cs.bounds()).array() <= 1e-9 * cs.bounds().array()).all());
    CHECK(r.trace.objective >= factor_objective(ch.gram, x0));
    for (std::size_t k = 1; k < r.trace.history.size(); ++k) CHECK(r.trace.history[k] >= r.trace.history[k - 1]);
    CHECK(std::abs(r.trace.objective - log_det_gain(ch, r.covariance)) < 1e-9 * r.trace.objective);
  }
}

TEST_CASE("dual solver: power-only case is classical water-filling") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix f = test::random_complex(6, 6, rng);
    const WhitenedChannel ch = channel_from(f);
    const CodebookResult r = optimize_codebook_dual(ch, power_only(6, 1.5), SolverOptions{});
    const Svd d = svd_complex(f);
    const RVector sigma2 = d.values.cwiseAbs2().cwiseInverse();
    const RVector wf = test::waterfill_oracle(sigma2, 1.5);
    CHECK((r.mode_power - wf).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.trace.objective == doctest::Approx(waterfilling_optimum(ch.gram, 1.5)).epsilon(1e-8));
  }
}

TEST_CASE("dual solver: grid oracle and complementary slackness on U = 3") {
  // M = K = 1, N = 4: F is 4 x 4; two dense constraint rows plus power.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    const CMatrix u = Eigen::HouseholderQR<CMatrix>(test::random_complex(4, 4, rng)).householderQ();
    const CMatrix v = Eigen::HouseholderQR<CMatrix>(test::random_complex(4, 4, rng)).householderQ();
    RVector sigma2(4);
    sigma2 << 0.3, 0.45, 0.6, 0.8;
    const RVector xi = sigma2.cwiseInverse().cwiseSqrt();
    const WhitenedChannel ch = channel_from(u * xi.cast<cd>().asDiagonal() * v.adjoint());

    auto cs = power_only(4, 0.5);
    std::vector<CMatrix> rows;
    for (int l = 0; l < 2; ++l) rows.push_back(test::random_psd(4, 2, rng, 0.5));
    const RVector wf = test::waterfill_oracle(sigma2, 0.5);
    const CMatrix c_wf = v * wf.cast<cd>().asDiagonal() * v.adjoint();
    for (const auto& e : rows) cs.add_dense(e, 0.6 * (e * c_wf).trace().real());

    // Mode coefficients in the oracle's own basis.
    RMatrix e(3, 4);
    RVector a(3);
    for (int l = 0; l < 3; ++l) {
      const CMatrix m = cs.matrix(static_cast<std::size_t>(l));
      a(l) = cs.bound(static_cast<std::size_t>(l));
      for (int i = 0; i < 4; ++i) e(l, i) = (v.col(i).adjoint() * m * v.col(i))(0, 0).real();
    }
    auto value = [&](double p0, double p1, double p2, double p3) {
      return std::log1p(p0 / sigma2(0)) + std::log1p(p1 / sigma2(1)) + std::log1p(p2 / sigma2(2)) +
             std::log1p(p3 / sigma2(3));
    };
    const double step = 1e-3;
    double grid = 0;
    for (double p0 = 0;; p0 += step) {
      const RVector r0 = a - e.col(0) * p0;
      if (r0.minCoeff() < 0) break;
      for (double p1 = 0;; p1 += step) {
        const RVector r1 = r0 - e.col(1) * p1;
        if (r1.minCoeff() < 0) break;
        for (double p2 = 0;; p2 += step) {
          const RVector r2 = r1 - e.col(2) * p2;
          if (r2.minCoeff() < 0) break;
          double p3 = std::numeric_limits<double>::infinity();
          for (int l = 0; l < 3; ++l) if (e(l, 3) > 0) p3 = std::min(p3, r2(l) / e(l, 3));
          grid = std::max(grid, value(p0, p1, p2, p3));
        }
      }
    }

    const CodebookResult r = optimize_codebook_dual(ch, cs, SolverOptions{});
    const double primal = log_det_gain(ch, r.covariance);
    // Rounding the first three coordinates down to the grid stays feasible,
    // so the optimum lies within step * sum(1 / sigma2_i) of the grid value.
    const double slack = step * sigma2.head(3).cwiseInverse().sum();
    CHECK(primal >= grid - 1e-9);
    CHECK(primal <= grid + slack);
    CHECK(((cs.traces(r.covariance) - cs.bounds()).array() <= 1e-9 * cs.bounds().array()).all());

    // mu_l (a_l - sum_i e_li p_i), with p in the solver's own mode basis.
    const RVector residual = cs.bounds() - cs.traces(r.covariance);
    for (int l = 0; l < 3; ++l) CHECK(std::abs(r.multipliers(l) * residual(l)) < 1e-4);
  }
}

TEST_CASE("dual solver: all-zero bounds give the zero covariance") {
  std::mt19937_64 rng(11);
  auto cs = power_only(4, 0.0);
  cs.add_dense(test::random_psd(4, 4, rng), 0.0);
  const CodebookResult r = optimize_codebook_dual(channel_from(test::random_complex(4, 4, rng)), cs, SolverOptions{});
  CHECK(r.covariance.norm() == 0.0);
  CHECK(r.trace.no_progress);
}

TEST_CASE("alternating: decoupled systems settle after one codebook step") {
  for (auto method : {CodebookMethod::dual, CodebookMethod::gradient}) {
    const Scenario s = decoupled({.chips = 6, .seed = 12});
    SolverOptions o;
    o.codebook_method = method;
    const SolveResult r = alternating_maximization(s, o);
    const auto& rows = r.trace.rows;
    REQUIRE(rows.size() >= 2);
    CHECK(r.trace.converged);
    const WhitenedChannel ch = whitened_channel(1.0, s);
    const double wf_bits = waterfilling_optimum(ch.gram, 6 * s.comm.max_power) / (6 * std::log(2.0));
    const double tol = method == CodebookMethod::dual ? 1e-8 : 1e-2;
    CHECK(std::abs(rows[1].mutual_information - wf_bits) <= tol * wf_bits);
    CHECK(std::abs(rows.back().mutual_information - rows[1].mutual_information) <= 1e-6 * wf_bits);
    // Radar power drops to the least value meeting the thresholds.
    const double need = update_radar_power(r.variables.covariance, r.variables.filters, s);
    CHECK(r.variables.radar_power == doctest::Approx(need).epsilon(1e-9));
    CHECK(r.variables.radar_power < s.radar.max_power);
  }
}

TEST_CASE("alternating: monotone trace and feasibility invariant") {
  for (auto method : {CodebookMethod::dual, CodebookMethod::gradient}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Scenario s = test::small_scenario({.chips = 6, .threshold_fraction = 0.3, .seed = seed});
      SolverOptions o;
      o.codebook_method = method;
      o.inner_max_iters = 2000;
      const SolveResult r = alternating_maximization(s, o);
      const auto& rows = r.trace.rows;
      for (std::size_t t = 1; t < rows.size(); ++t) {
        CHECK(rows[t].mutual_information >= rows[t - 1].mutual_information - 1e-9);
        CHECK(rows[t].min_margin >= 1 - 1e-6);
        CHECK(rows[t].comm_power <= s.comm.max_power * (1 + 1e-9));
        CHECK(rows[t].radar_power <= s.radar.max_power);
      }
      const auto& v = r.variables;
      CHECK(sdr_ratio_min(v.covariance, v.radar_power, v.filters, s) >= 1 - 1e-6);
      CHECK(is_psd(v.covariance, 1e-9));
      CHECK(rows.back().mutual_information ==
            doctest::Approx(test::mi_oracle(v.covariance, v.radar_power, s)).epsilon(1e-9));
    }
  }
}

TEST_CASE("alternating: gradient is never worse than dual on small instances") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Scenario s = test::small_scenario({.chips = 5, .threshold_fraction = 0.5, .seed = seed});
    SolverOptions o;
    o.codebook_method = CodebookMethod::dual;
    const double dual = alternating_maximization(s, o).trace.rows.back().mutual_information;
    o.codebook_method = CodebookMethod::gradient;
    const double grad = alternating_maximization(s, o).trace.rows.back().mutual_information;
    CHECK(grad >= dual - 1e-3);
  }
}

TEST_CASE("alternating: infeasible thresholds name the worst cell") {
  Scenario s = test::small_scenario({.seed = 13});
  s = with_threshold(s, 2 * test::oracle_min_bound(s));
  try {
    alternating_maximization(s, SolverOptions{});
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.cell() >= 0);
    const auto& cell = s.radar.cells[static_cast<std::size_t>(e.cell())];
    CHECK(test::bound_oracle(cell, s) == doctest::Approx(test::oracle_min_bound(s)));
    CHECK(std::string(e.what()).find("range " + std::to_string(cell.range)) != std::string::npos);
  }
}

TEST_CASE("min_sdr_margin and require_feasible") {
  const Scenario s = test::small_scenario({.seed = 14});
  DesignVariables v;
  v.covariance = CMatrix::Zero(12, 12);
  v.radar_power = 1.0;
  v.filters = update_filters(v.covariance, 1.0, s);
  CHECK(min_sdr_margin(v, s) == doctest::Approx(1.0 / 0.4).epsilon(1e-9));
  CHECK_NOTHROW(require_feasible(s));
  CHECK_THROWS_AS(require_feasible(with_threshold(s, 3 * test::oracle_min_bound(s))), InfeasibleError);
}
