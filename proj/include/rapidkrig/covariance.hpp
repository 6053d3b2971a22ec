#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "rapidkrig/bessel.hpp"
#include "rapidkrig/errors.hpp"

namespace rapidkrig {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// One planar location per row.
template <typename Scalar>
using Locations = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
template <typename Scalar>
using Point = Eigen::Matrix<Scalar, 1, 2>;

/// Matern correlation evaluated through the Bessel function for every nu.
template <typename Scalar>
Scalar matern_phi_bessel(Scalar d, Scalar nu) {
  if (!(nu > 0)) throw DomainError("matern_phi: smoothness must be positive");
  if (!(d >= 0)) throw DomainError("matern_phi: distance must be nonnegative");
  if (d < Scalar(1e-12)) return Scalar(1);
  const Scalar k = bessel_k(nu, d);
  if (!(k > 0)) return Scalar(0);
  if (nu == std::floor(nu) && nu <= Scalar(20)) {
    // 2^(nu-1) (nu-1)! exactly; d^nu K_nu(d) is bounded for these orders.
    Scalar norm = Scalar(1), dn = d;
    for (int j = 1; j < static_cast<int>(nu); ++j) {
      norm *= Scalar(2 * j);
      dn *= d;
    }
    const Scalar phi = dn * k / norm;
    if (std::isfinite(phi)) return phi > Scalar(1) ? Scalar(1) : phi;
  }
  using std::exp, std::log;
  const Scalar log_phi =
      nu * log(d) + log(k) - (nu - Scalar(1)) * std::numbers::ln2_v<Scalar> - std::lgamma(nu);
  const Scalar phi = exp(log_phi);
  return phi > Scalar(1) ? Scalar(1) : phi;
}

/// Matern correlation phi(d) = d^nu K_nu(d) / (2^(nu-1) Gamma(nu)), with phi(0) = 1.
/// Half-integer orders up to 5/2 use their closed forms.
template <typename Scalar>
Scalar matern_phi(Scalar d, Scalar nu) {
  if (!(nu > 0)) throw DomainError("matern_phi: smoothness must be positive");
  if (!(d >= 0)) throw DomainError("matern_phi: distance must be nonnegative");
  if (d < Scalar(1e-12)) return Scalar(1);
  using std::exp;
  if (nu == Scalar(0.5)) return exp(-d);
  if (nu == Scalar(1.5)) return (Scalar(1) + d) * exp(-d);
  if (nu == Scalar(2.5)) return (Scalar(1) + d + d * d / Scalar(3)) * exp(-d);
  return matern_phi_bessel(d, nu);
}

/// Stationary isotropic Matern covariance sigma2 * phi(alpha * |s - s'|), plus the nugget
/// variance tau2 of the observation noise (not part of the kernel itself).
///
/// alpha multiplies distance. A quoted "range" r corresponds to alpha = 1 / r.
template <typename Scalar>
struct CovarianceModel {
  Scalar sigma2 = 1;
  Scalar alpha = 1;
  Scalar nu = Scalar(0.5);
  Scalar tau2 = 0;

  static CovarianceModel from_range(Scalar sigma2, Scalar range, Scalar nu, Scalar tau2) {
    return CovarianceModel{sigma2, Scalar(1) / range, nu, tau2};
  }

  void validate(bool allow_zero_variance = false) const {
    const bool sigma_ok = allow_zero_variance ? sigma2 >= 0 : sigma2 > 0;
    if (!sigma_ok || !(alpha > 0) || !(nu > 0) || !(tau2 >= 0) || !std::isfinite(sigma2) ||
        !std::isfinite(alpha) || !std::isfinite(nu) || !std::isfinite(tau2)) {
      throw DomainError("CovarianceModel: require sigma2 > 0, alpha > 0, nu > 0, tau2 >= 0");
    }
  }

  /// Covariance at Euclidean separation `dist`.
  Scalar operator()(Scalar dist) const { return sigma2 * matern_phi(alpha * dist, nu); }
};

template <typename Scalar, typename A, typename B>
Scalar cov(const CovarianceModel<Scalar>& model, const Eigen::MatrixBase<A>& s,
           const Eigen::MatrixBase<B>& s2) {
  return model((s - s2).norm());
}

/// Dense cross-covariance between two location sets.
template <typename Scalar, typename A, typename B>
Matrix<Scalar> cov_matrix(const CovarianceModel<Scalar>& model, const Eigen::MatrixBase<A>& locs_a,
                          const Eigen::MatrixBase<B>& locs_b) {
  model.validate();
  if (locs_a.rows() == 0 || locs_b.rows() == 0)
    throw DomainError("cov_matrix: location lists must be nonempty");
  Matrix<Scalar> out(locs_a.rows(), locs_b.rows());
  for (Eigen::Index l = 0; l < locs_b.rows(); ++l)
    for (Eigen::Index i = 0; i < locs_a.rows(); ++i)
      out(i, l) = model((locs_a.row(i) - locs_b.row(l)).norm());
  return out;
}

/// Symmetric covariance of one location set with itself.
template <typename Scalar, typename A>
Matrix<Scalar> cov_matrix(const CovarianceModel<Scalar>& model, const Eigen::MatrixBase<A>& locs) {
  model.validate();
  if (locs.rows() == 0) throw DomainError("cov_matrix: location list must be nonempty");
  const Eigen::Index n = locs.rows();
  Matrix<Scalar> out(n, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    out(l, l) = model.sigma2;
    for (Eigen::Index i = l + 1; i < n; ++i) {
      out(i, l) = model((locs.row(i) - locs.row(l)).norm());
      out(l, i) = out(i, l);
    }
  }
  return out;
}

/// Scale alpha at which phi(alpha * dist) equals target_corr.
template <typename Scalar>
Scalar range_from_correlation(Scalar nu, Scalar target_corr, Scalar dist) {
  if (!(target_corr > 0 && target_corr < 1))
    throw DomainError("range_from_correlation: target correlation must lie in (0, 1)");
  if (!(dist > 0)) throw DomainError("range_from_correlation: distance must be positive");
  if (!(nu > 0)) throw DomainError("range_from_correlation: smoothness must be positive");

  auto f = [&](Scalar a) { return matern_phi(a * dist, nu) - target_corr; };
  Scalar lo = 0, hi = Scalar(1) / dist;
  int grow = 0;
  while (f(hi) > 0) {
    lo = hi;
    hi *= 2;
    if (++grow > 200) throw NumericError("range_from_correlation: could not bracket root");
  }
  for (int it = 0; it < 400; ++it) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    const Scalar fm = f(mid);
    if (fm > 0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= std::numeric_limits<Scalar>::epsilon() * hi) {
      const Scalar a = Scalar(0.5) * (lo + hi);
      using std::abs;
      if (abs(f(a)) > Scalar(1e-10))
        throw NumericError("range_from_correlation: root not resolved to tolerance");
      return a;
    }
  }
  throw NumericError("range_from_correlation: bisection did not converge");
}

}  // namespace rapidkrig
