#pragma once

// Dense complex linear-algebra helpers.  Everything here is a free function
// over Eigen expressions and is templated on the underlying real type.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "coexist/errors.hpp"

namespace coexist {

template <typename Real>
using CMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVectorT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using RVectorT = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using CMatrix = CMatrixT<double>;
using CVector = CVectorT<double>;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (a.rows() != a.cols()) {
    throw DomainError(std::string(who) + ": matrix is not square");
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* who) {
  if (!a.allFinite()) {
    throw DomainError(std::string(who) + ": non-finite entry");
  }
}

}  // namespace detail

/// (a + a^H) / 2.
template <typename Derived>
CMatrixT<typename Derived::RealScalar> hermitian_part(const Eigen::MatrixBase<Derived>& a) {
  detail::require_square(a, "hermitian_part");
  CMatrixT<typename Derived::RealScalar> out = a;
  out = (out + out.adjoint().eval()) * typename Derived::RealScalar(0.5);
  return out;
}

/// Hermitian within `tol` relative to the largest entry magnitude.
template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a,
                  typename Derived::RealScalar tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const auto scale = a.cwiseAbs().maxCoeff();
  if (scale == 0) return true;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Returns s with s * a * s = I for Hermitian positive definite a.
template <typename Derived>
CMatrixT<typename Derived::RealScalar> herm_inv_sqrt(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  detail::require_square(a, "herm_inv_sqrt");
  detail::require_finite(a, "herm_inv_sqrt");
  Eigen::SelfAdjointEigenSolver<CMatrixT<Real>> eig(hermitian_part(a));
  if (eig.info() != Eigen::Success) {
    throw DefinitenessError("herm_inv_sqrt: eigendecomposition failed");
  }
  const auto& lambda = eig.eigenvalues();
  const Real top = lambda.cwiseAbs().maxCoeff();
  const Real floor = Real(a.rows()) * std::numeric_limits<Real>::epsilon() * top;
  if (lambda.size() > 0 && (lambda.minCoeff() <= floor || top == 0)) {
    throw DefinitenessError("herm_inv_sqrt: matrix is not positive definite");
  }
  const auto& v = eig.eigenvectors();
  CMatrixT<Real> out = v * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * v.adjoint();
  return hermitian_part(out);
}

/// Natural-log determinant of a Hermitian positive definite matrix via Cholesky.
template <typename Derived>
typename Derived::RealScalar logdet_hpd(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  detail::require_square(a, "logdet_hpd");
  Eigen::LLT<CMatrixT<Real>> llt(a.template cast<std::complex<Real>>());
  if (llt.info() != Eigen::Success) {
    throw DefinitenessError("logdet_hpd: Cholesky factorization failed");
  }
  Real sum = 0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const Real d = l(i, i).real();
    if (!(d > 0)) throw DefinitenessError("logdet_hpd: non-positive pivot");
    sum += std::log(d);
  }
  return 2 * sum;
}

template <typename Real>
struct SvdT {
  CMatrixT<Real> left;
  RVectorT<Real> values;  // descending
  CMatrixT<Real> right;
};
using Svd = SvdT<double>;

/// Full singular value decomposition a = left * diag(values) * right^H.
template <typename Derived>
SvdT<typename Derived::RealScalar> svd_complex(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  detail::require_finite(a, "svd_complex");
  CMatrixT<Real> m = a.template cast<std::complex<Real>>();
  Eigen::BDCSVD<CMatrixT<Real>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    throw DomainError("svd_complex: decomposition failed");
  }
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Projects a nearly-PSD Hermitian matrix onto the PSD cone.  Eigenvalues in
/// [-tol * lambda_max, 0) are clipped to zero; anything more negative throws.
template <typename Derived>
CMatrixT<typename Derived::RealScalar> psd_repair(const Eigen::MatrixBase<Derived>& a,
                                                 typename Derived::RealScalar tol = 1e-10) {
  using Real = typename Derived::RealScalar;
  detail::require_square(a, "psd_repair");
  Eigen::SelfAdjointEigenSolver<CMatrixT<Real>> eig(hermitian_part(a));
  if (eig.info() != Eigen::Success) throw DefinitenessError("psd_repair: eigensolver failed");
  RVectorT<Real> lambda = eig.eigenvalues();
  if (lambda.size() == 0) return CMatrixT<Real>(a.rows(), a.cols());
  const Real top = std::max<Real>(lambda.maxCoeff(), 0);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < 0) {
      if (lambda(i) < -tol * top || top == 0) {
        throw DefinitenessError("psd_repair: matrix has a significantly negative eigenvalue");
      }
      lambda(i) = 0;
    }
  }
  const auto& v = eig.eigenvectors();
  return hermitian_part(v * lambda.asDiagonal() * v.adjoint());
}

/// True when every eigenvalue is >= -tol * max(|lambda|).
template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a, typename Derived::RealScalar tol = 1e-10) {
  using Real = typename Derived::RealScalar;
  if (!is_hermitian(a, std::max<Real>(tol, 1e-10))) return false;
  if (a.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<CMatrixT<Real>> eig(hermitian_part(a), Eigen::EigenvaluesOnly);
  const auto& lambda = eig.eigenvalues();
  const Real top = lambda.cwiseAbs().maxCoeff();
  return lambda.minCoeff() >= -tol * top;
}

/// Hermitian square root of a PSD matrix (negative round-off eigenvalues are zeroed).
template <typename Derived>
CMatrixT<typename Derived::RealScalar> psd_sqrt(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  Eigen::SelfAdjointEigenSolver<CMatrixT<Real>> eig(hermitian_part(a));
  if (eig.info() != Eigen::Success) throw DefinitenessError("psd_sqrt: eigensolver failed");
  RVectorT<Real> root = eig.eigenvalues().cwiseMax(Real(0)).cwiseSqrt();
  const auto& v = eig.eigenvectors();
  return v * root.asDiagonal() * v.adjoint();
}

/// Classical water-filling: maximizes sum log(1 + p_i / noise_i) subject to
/// sum p_i <= budget, p_i >= 0.  Noise levels must be positive; +inf marks an
/// unusable mode.
template <typename Real>
RVectorT<Real> water_filling(const RVectorT<Real>& noise, Real budget) {
  const Eigen::Index n = noise.size();
  RVectorT<Real> power = RVectorT<Real>::Zero(n);
  if (n == 0 || !(budget > 0)) return power;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return noise(a) < noise(b); });
  Real level = 0;
  Real partial = 0;
  Eigen::Index active = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Real nk = noise(order[static_cast<std::size_t>(k)]);
    if (!std::isfinite(nk)) break;
    const Real candidate = (budget + partial + nk) / Real(k + 1);
    if (candidate <= nk) break;
    partial += nk;
    active = k + 1;
    level = candidate;
  }
  for (Eigen::Index k = 0; k < active; ++k) {
    const Eigen::Index i = order[static_cast<std::size_t>(k)];
    power(i) = std::max<Real>(level - noise(i), 0);
  }
  return power;
}

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace coexist
