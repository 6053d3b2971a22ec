#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "rapidkrig/covariance.hpp"
#include "rapidkrig/errors.hpp"

namespace rapidkrig {

/// Universal Kriging fit: Cholesky factor of M = K + tau2 I, GLS coefficients and the
/// Kriging coefficient vector c = M^-1 (z - X beta_hat).
template <typename Scalar>
struct KrigingFit {
  CovarianceModel<Scalar> model;
  Locations<Scalar> obs_locs;
  Matrix<Scalar> X;
  Vector<Scalar> z;
  Eigen::LLT<Matrix<Scalar>> chol_M;
  Matrix<Scalar> whitened_X;            // L^-1 X
  Eigen::LLT<Matrix<Scalar>> gls_chol;  // X^T M^-1 X
  Vector<Scalar> beta_hat;
  Vector<Scalar> c;
  Scalar ridge = 0;  // diagonal jitter added to M, zero unless the first factorization failed

  Eigen::Index n() const { return obs_locs.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// GLS coefficients and Kriging weights for a data vector, reusing the factorizations of a fit.
template <typename Scalar>
struct KrigingCoefficients {
  Vector<Scalar> beta_hat;
  Vector<Scalar> c;
};

namespace detail {

// Index of the first pivot at which an unblocked Cholesky of `m` breaks down, or -1.
template <typename Scalar>
Eigen::Index failing_pivot(Matrix<Scalar> m) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Scalar d = m(k, k) - m.row(k).head(k).squaredNorm();
    if (!(d > 0)) return k;
    d = std::sqrt(d);
    m(k, k) = d;
    for (Eigen::Index i = k + 1; i < n; ++i)
      m(i, k) = (m(i, k) - m.row(i).head(k).dot(m.row(k).head(k))) / d;
  }
  return -1;
}

template <typename Scalar>
KrigingCoefficients<Scalar> solve_coefficients(const KrigingFit<Scalar>& fit,
                                               const Vector<Scalar>& z) {
  const auto L = fit.chol_M.matrixL();
  const Vector<Scalar> y = L.solve(z);
  KrigingCoefficients<Scalar> out;
  out.beta_hat = fit.gls_chol.solve(fit.whitened_X.transpose() * y);
  out.c = fit.chol_M.solve(z - fit.X * out.beta_hat);
  return out;
}

}  // namespace detail

template <typename Scalar, typename Locs, typename Z, typename Cov>
KrigingFit<Scalar> fit(const CovarianceModel<Scalar>& model, const Eigen::MatrixBase<Locs>& obs_locs,
                       const Eigen::MatrixBase<Z>& z, const Eigen::MatrixBase<Cov>& X) {
  model.validate();
  const Eigen::Index n = obs_locs.rows(), p = X.cols();
  if (z.size() != n || X.rows() != n)
    throw DomainError("fit: observations, covariates and locations disagree in length");
  if (p < 1 || n < p) throw DomainError("fit: need n >= p >= 1");

  KrigingFit<Scalar> f;
  f.model = model;
  f.obs_locs = obs_locs;
  f.X = X;
  f.z = z;

  Matrix<Scalar> M = cov_matrix(model, f.obs_locs);
  M.diagonal().array() += model.tau2;
  f.chol_M.compute(M);
  if (f.chol_M.info() != Eigen::Success) {
    f.ridge = Scalar(1e-10) * M.trace() / Scalar(n);
    std::ostringstream msg;
    msg << "fit: covariance matrix not positive definite; retrying with ridge " << f.ridge;
    warn(msg.str());
    M.diagonal().array() += f.ridge;
    f.chol_M.compute(M);
    if (f.chol_M.info() != Eigen::Success) {
      throw NumericError("fit: Cholesky factorization failed at pivot " +
                         std::to_string(detail::failing_pivot<Scalar>(M)) +
                         " even after adding a ridge");
    }
  }

  f.whitened_X = f.chol_M.matrixL().solve(f.X);
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(f.whitened_X);
  if (qr.rank() < p) throw DomainError("fit: covariate matrix is rank deficient");
  f.gls_chol.compute(f.whitened_X.transpose() * f.whitened_X);
  if (f.gls_chol.info() != Eigen::Success)
    throw DomainError("fit: covariate matrix is numerically rank deficient");

  auto coef = detail::solve_coefficients(f, f.z);
  f.beta_hat = std::move(coef.beta_hat);
  f.c = std::move(coef.c);
  return f;
}

/// Re-estimate beta_hat and c for new data at the same locations and covariates.
template <typename Scalar, typename Z>
KrigingCoefficients<Scalar> refit(const KrigingFit<Scalar>& fit, const Eigen::MatrixBase<Z>& z) {
  if (z.size() != fit.n()) throw DomainError("refit: data length does not match the fit");
  return detail::solve_coefficients(fit, Vector<Scalar>(z));
}

namespace detail {

template <typename Scalar, typename T, typename Cov>
void check_targets(const KrigingFit<Scalar>& fit, const Eigen::MatrixBase<T>& targets,
                   const Eigen::MatrixBase<Cov>& target_X, const char* who) {
  if (target_X.rows() != targets.rows())
    throw DomainError(std::string(who) + ": one covariate row is required per target");
  if (target_X.cols() != fit.p())
    throw DomainError(std::string(who) + ": target covariates have the wrong number of columns");
}

}  // namespace detail

/// Exact prediction f_hat(s) = x(s) beta_hat + sum_i k(s, s_i) c_i.
template <typename Scalar, typename T, typename Cov>
Vector<Scalar> predict_exact(const KrigingFit<Scalar>& fit, const Eigen::MatrixBase<T>& targets,
                             const Eigen::MatrixBase<Cov>& target_X) {
  detail::check_targets(fit, targets, target_X, "predict_exact");
  Vector<Scalar> out = target_X * fit.beta_hat;
  const Eigen::Index n = fit.n();
  for (Eigen::Index j = 0; j < targets.rows(); ++j) {
    const Scalar tx = targets(j, 0), ty = targets(j, 1);
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar dx = tx - fit.obs_locs(i, 0), dy = ty - fit.obs_locs(i, 1);
      acc += fit.model(std::sqrt(dx * dx + dy * dy)) * fit.c(i);
    }
    out(j) += acc;
  }
  return out;
}

/// Universal Kriging prediction standard error, sqrt Var[f(s) - f_hat(s)], including the
/// inflation from estimating beta by GLS.
template <typename Scalar, typename T, typename Cov>
Vector<Scalar> kriging_se_exact(const KrigingFit<Scalar>& fit, const Eigen::MatrixBase<T>& targets,
                                const Eigen::MatrixBase<Cov>& target_X) {
  detail::check_targets(fit, targets, target_X, "kriging_se_exact");
  constexpr Eigen::Index block = 256;
  const Scalar tol = Scalar(1e-10) * std::max<Scalar>(Scalar(1), fit.model.sigma2);
  Vector<Scalar> out(targets.rows());
  for (Eigen::Index start = 0; start < targets.rows(); start += block) {
    const Eigen::Index b = std::min(block, targets.rows() - start);
    const Matrix<Scalar> k = cov_matrix(fit.model, fit.obs_locs, targets.middleRows(start, b));
    const Matrix<Scalar> v = fit.chol_M.matrixL().solve(k);
    const Matrix<Scalar> u =
        target_X.middleRows(start, b).transpose() - fit.whitened_X.transpose() * v;
    const Matrix<Scalar> gu = fit.gls_chol.solve(u);
    for (Eigen::Index j = 0; j < b; ++j) {
      Scalar var = fit.model.sigma2 - v.col(j).squaredNorm() + u.col(j).dot(gu.col(j));
      if (var < -tol) {
        std::ostringstream msg;
        msg << "kriging_se_exact: negative prediction variance " << var << " at target "
            << start + j;
        throw NumericError(msg.str());
      }
      out(start + j) = std::sqrt(std::max<Scalar>(var, 0));
    }
  }
  return out;
}

}  // namespace rapidkrig
