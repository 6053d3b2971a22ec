#pragma once

#include <atomic>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rapidkrig/circulant.hpp"
#include "rapidkrig/covariance.hpp"
#include "rapidkrig/errors.hpp"
#include "rapidkrig/gridding.hpp"

namespace rapidkrig {

namespace instrumentation {

inline std::atomic<long>& setup_builds() {
  static std::atomic<long> count{0};
  return count;
}

}  // namespace instrumentation

/// Everything the rapid predictor needs that does not depend on the coefficient vector.
///
/// Column i of `weights` holds the (2L)^2 nonzero entries of row i of the sparse
/// interpolation matrix A; column i of `neighbors` holds their padded-grid indices.
template <typename Scalar>
struct RapidSetup {
  CovarianceModel<Scalar> model;
  PaddedGrid<Scalar> grid;
  int L = 0;
  Matrix<Scalar> KN_inv;
  Matrix<Scalar> weights;
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> neighbors;
  Vector<Scalar> cond_var;  // sigma2 - k_i^T K_N^-1 k_i
  ComplexGrid<Scalar> filter_spectrum;
  Scalar ridge = 0;

  Eigen::Index n() const { return weights.cols(); }
  Eigen::Index block_size() const { return weights.rows(); }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> neighbor_covariance(const CovarianceModel<Scalar>& model, Scalar hx, Scalar hy,
                                   const std::vector<GridOffset>& offsets) {
  const auto m = static_cast<Eigen::Index>(offsets.size());
  Matrix<Scalar> K(m, m);
  for (Eigen::Index b = 0; b < m; ++b)
    for (Eigen::Index a = 0; a < m; ++a) {
      const Scalar dx = Scalar(offsets[a].dx - offsets[b].dx) * hx;
      const Scalar dy = Scalar(offsets[a].dy - offsets[b].dy) * hy;
      K(a, b) = model(std::sqrt(dx * dx + dy * dy));
    }
  return K;
}

// Covariances between a point at (fx, fy) inside the central box and the block nodes.
template <typename Scalar>
Vector<Scalar> neighbor_cross_covariance(const CovarianceModel<Scalar>& model, Scalar hx,
                                         Scalar hy, const std::vector<GridOffset>& offsets,
                                         Scalar fx, Scalar fy) {
  Vector<Scalar> k(static_cast<Eigen::Index>(offsets.size()));
  for (std::size_t a = 0; a < offsets.size(); ++a) {
    const Scalar dx = (fx - Scalar(offsets[a].dx)) * hx;
    const Scalar dy = (fy - Scalar(offsets[a].dy)) * hy;
    k(static_cast<Eigen::Index>(a)) = model(std::sqrt(dx * dx + dy * dy));
  }
  return k;
}

template <typename Scalar>
Matrix<Scalar> invert_neighbor_covariance(const CovarianceModel<Scalar>& model,
                                          const Matrix<Scalar>& K, Scalar& ridge) {
  Eigen::LLT<Matrix<Scalar>> llt(K);
  ridge = 0;
  if (llt.info() != Eigen::Success) {
    ridge = Scalar(1e-12) * model.sigma2 * Scalar(K.rows());
    std::ostringstream msg;
    msg << "neighbor covariance not positive definite; adding ridge " << ridge;
    warn(msg.str());
    Matrix<Scalar> Kr = K;
    Kr.diagonal().array() += ridge;
    llt.compute(Kr);
    if (llt.info() != Eigen::Success)
      throw NumericError(
          "build_setup: neighbor covariance K_N is not positive definite; reduce L or use a "
          "coarser grid relative to the correlation range");
  }
  return llt.solve(Matrix<Scalar>::Identity(K.rows(), K.cols()));
}

// Block position of offset (0, 0), the lower-left corner of the central box.
inline Eigen::Index corner_position(int L) { return (L - 1) + 2 * L * (L - 1); }

}  // namespace detail

/// Precompute K_N^-1, the interpolation weights of every observation, and the spectrum of
/// the lag filter embedded on a torus whose sides are 2-3 smooth and at least 2M - 1.
template <typename Scalar, typename Locs>
RapidSetup<Scalar> build_setup(const CovarianceModel<Scalar>& model, const PaddedGrid<Scalar>& grid,
                               int L, const Eigen::MatrixBase<Locs>& obs_locs) {
  model.validate();
  if (L < 1) throw DomainError("build_setup: neighbor order L must be >= 1");
  instrumentation::setup_builds().fetch_add(1, std::memory_order_relaxed);

  RapidSetup<Scalar> s;
  s.model = model;
  s.grid = grid;
  s.L = L;

  const auto offsets = block_offsets(L);
  const auto m = static_cast<Eigen::Index>(offsets.size());
  const Matrix<Scalar> KN = detail::neighbor_covariance(model, grid.hx, grid.hy, offsets);
  s.KN_inv = detail::invert_neighbor_covariance(model, KN, s.ridge);

  const Eigen::Index n = obs_locs.rows();
  s.weights.resize(m, n);
  s.neighbors.resize(m, n);
  s.cond_var.resize(n);
  const Eigen::Index corner = detail::corner_position(L);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nb = neighborhood(grid, obs_locs.row(i), L, i);
    for (Eigen::Index a = 0; a < m; ++a) s.neighbors(a, i) = nb.indices[static_cast<std::size_t>(a)];
    if (nb.dx == Scalar(0) && nb.dy == Scalar(0)) {
      // On a node: k_i is a column of K_N and the weights select that node.
      s.weights.col(i).setZero();
      s.weights(corner, i) = 1;
      s.cond_var(i) = 0;
      continue;
    }
    const Vector<Scalar> k =
        detail::neighbor_cross_covariance(model, grid.hx, grid.hy, offsets, nb.dx, nb.dy);
    s.weights.col(i).noalias() = s.KN_inv * k;
    s.cond_var(i) = model.sigma2 - k.dot(s.weights.col(i));
  }

  const Eigen::Index t1 = smooth23(2 * grid.total_x() - 1);
  const Eigen::Index t2 = smooth23(2 * grid.total_y() - 1);
  s.filter_spectrum = torus_kernel<Scalar>(t1, t2, grid.hx, grid.hy, model);
  Fft2<Scalar>().forward(s.filter_spectrum);
  return s;
}

/// c* = A^T c on the padded grid (flat index px + M1 * py).
template <typename Scalar, typename C>
Vector<Scalar> scatter_coefficients(const RapidSetup<Scalar>& setup, const Eigen::MatrixBase<C>& c) {
  if (c.size() != setup.n())
    throw DomainError("predict_rapid: coefficient vector length does not match the setup");
  Vector<Scalar> cstar = Vector<Scalar>::Zero(setup.grid.total_size());
  for (Eigen::Index i = 0; i < setup.n(); ++i) {
    const Scalar ci = c(i);
    for (Eigen::Index a = 0; a < setup.block_size(); ++a)
      cstar(setup.neighbors(a, i)) += setup.weights(a, i) * ci;
  }
  return cstar;
}

/// Convolve a padded-grid array with the lag filter; returns the interior m1 x m2 block,
/// row-major with x fastest.
template <typename Scalar>
Vector<Scalar> convolve_filter(const RapidSetup<Scalar>& setup, const Vector<Scalar>& padded) {
  const auto& g = setup.grid;
  if (padded.size() != g.total_size())
    throw DomainError("convolve_filter: array does not match the padded grid");
  ComplexGrid<Scalar> work =
      ComplexGrid<Scalar>::Zero(setup.filter_spectrum.rows(), setup.filter_spectrum.cols());
  for (Eigen::Index py = 0; py < g.total_y(); ++py)
    for (Eigen::Index px = 0; px < g.total_x(); ++px) work(px, py) = padded(g.index(px, py));
  Fft2<Scalar> fft;
  fft.forward(work);
  work.array() *= setup.filter_spectrum.array();
  fft.inverse(work);
  Vector<Scalar> out(g.interior_size());
  for (Eigen::Index iy = 0; iy < g.m2; ++iy)
    for (Eigen::Index ix = 0; ix < g.m1; ++ix)
      out(ix + g.m1 * iy) = work(ix + g.pad_left, iy + g.pad_bottom).real();
  return out;
}

/// Spatial part of the rapid prediction on the interior grid.
template <typename Scalar, typename C>
Vector<Scalar> rapid_spatial(const RapidSetup<Scalar>& setup, const Eigen::MatrixBase<C>& c) {
  return convolve_filter(setup, scatter_coefficients(setup, c));
}

/// Rapid grid prediction: fixed part grid_X * beta_hat plus the convolution of the lag
/// filter with A^T c. Pass an empty beta_hat and a zero-column grid_X to omit the fixed part.
template <typename Scalar, typename C, typename B, typename Cov>
Vector<Scalar> predict_rapid(const RapidSetup<Scalar>& setup, const Eigen::MatrixBase<C>& c,
                             const Eigen::MatrixBase<B>& beta_hat,
                             const Eigen::MatrixBase<Cov>& grid_X) {
  if (grid_X.rows() != setup.grid.interior_size() || grid_X.cols() != beta_hat.size())
    throw DomainError("predict_rapid: grid covariates must be (m1*m2) x p");
  Vector<Scalar> out = rapid_spatial(setup, c);
  if (beta_hat.size() > 0) out.noalias() += grid_X * beta_hat;
  return out;
}

template <typename Scalar>
struct ApproxErrorStats {
  Scalar sup = 0;
  Point<Scalar> argmax = Point<Scalar>::Zero();
};

/// sup over eval_points of |k_approx(s, s_star) - k(s, s_star)|, where k_approx interpolates
/// the kernel centered at s_star from its order-L grid neighborhood.
template <typename Scalar, typename P, typename E>
ApproxErrorStats<Scalar> kernel_approx_error(const CovarianceModel<Scalar>& model,
                                             const PaddedGrid<Scalar>& grid, int L,
                                             const Eigen::MatrixBase<P>& s_star,
                                             const Eigen::MatrixBase<E>& eval_points) {
  model.validate();
  const auto offsets = block_offsets(L);
  const auto nb = neighborhood(grid, s_star, L);
  const auto m = static_cast<Eigen::Index>(offsets.size());
  Vector<Scalar> w;
  if (nb.dx == Scalar(0) && nb.dy == Scalar(0)) {
    w = Vector<Scalar>::Zero(m);
    w(detail::corner_position(L)) = 1;
  } else {
    Scalar ridge = 0;
    const Matrix<Scalar> KN_inv = detail::invert_neighbor_covariance(
        model, detail::neighbor_covariance(model, grid.hx, grid.hy, offsets), ridge);
    w = KN_inv * detail::neighbor_cross_covariance(model, grid.hx, grid.hy, offsets, nb.dx, nb.dy);
  }
  Locations<Scalar> nodes(m, 2);
  for (Eigen::Index a = 0; a < m; ++a) nodes.row(a) = grid.location(nb.indices[static_cast<std::size_t>(a)]);

  const Point<Scalar> center = s_star;
  ApproxErrorStats<Scalar> out;
  for (Eigen::Index e = 0; e < eval_points.rows(); ++e) {
    const Point<Scalar> s = eval_points.row(e);
    Scalar approx = 0;
    for (Eigen::Index a = 0; a < m; ++a) approx += model((s - nodes.row(a)).norm()) * w(a);
    const Scalar err = std::abs(approx - model((s - center).norm()));
    if (err > out.sup) {
      out.sup = err;
      out.argmax = s;
    }
  }
  return out;
}

}  // namespace rapidkrig
