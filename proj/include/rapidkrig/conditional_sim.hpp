#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include <Eigen/Core>

#include "rapidkrig/circulant.hpp"
#include "rapidkrig/covariance.hpp"
#include "rapidkrig/errors.hpp"
#include "rapidkrig/exact_kriging.hpp"
#include "rapidkrig/gridding.hpp"
#include "rapidkrig/random.hpp"
#include "rapidkrig/rapid_predictor.hpp"

namespace rapidkrig {

/// Square roots of the (scaled) circulant eigenvalues for simulating a stationary field on
/// the padded grid.
template <typename Scalar>
struct CirculantEmbedding {
  PaddedGrid<Scalar> grid;
  Matrix<Scalar> sqrt_eigen;  // t1 x t2, already divided by t1 * t2 under the root
  Scalar min_eigenvalue = 0;  // most negative eigenvalue before clamping
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> embedding_eigenvalues(const CovarianceModel<Scalar>& model,
                                     const PaddedGrid<Scalar>& grid, Eigen::Index t1,
                                     Eigen::Index t2) {
  ComplexGrid<Scalar> c = torus_kernel<Scalar>(t1, t2, grid.hx, grid.hy, model);
  Fft2<Scalar>().forward(c);
  return c.real();
}

}  // namespace detail

/// Circulant embedding of the covariance on the padded grid. A torus with clearly negative
/// eigenvalues is doubled once; if that still fails the embedding is rejected.
template <typename Scalar>
CirculantEmbedding<Scalar> build_embedding(const CovarianceModel<Scalar>& model,
                                           const PaddedGrid<Scalar>& grid) {
  model.validate(/*allow_zero_variance=*/true);
  Eigen::Index t1 = smooth23(2 * grid.total_x() - 1);
  Eigen::Index t2 = smooth23(2 * grid.total_y() - 1);
  Matrix<Scalar> lambda = detail::embedding_eigenvalues(model, grid, t1, t2);
  auto negative = [](const Matrix<Scalar>& l) {
    return l.minCoeff() < -Scalar(1e-8) * std::max<Scalar>(l.maxCoeff(), 0);
  };
  if (negative(lambda)) {
    t1 *= 2;
    t2 *= 2;
    lambda = detail::embedding_eigenvalues(model, grid, t1, t2);
    if (negative(lambda)) {
      std::ostringstream msg;
      msg << "circulant embedding is not nonnegative definite (most negative eigenvalue "
          << lambda.minCoeff() << ", largest " << lambda.maxCoeff()
          << "); the correlation range is too long for this grid";
      throw NumericError(msg.str());
    }
  }
  CirculantEmbedding<Scalar> e;
  e.grid = grid;
  e.min_eigenvalue = std::min<Scalar>(lambda.minCoeff(), 0);
  e.sqrt_eigen = (lambda.array().max(Scalar(0)) / Scalar(t1 * t2)).sqrt().matrix();
  return e;
}

/// One mean-zero draw on the padded grid, flat index px + M1 * py.
template <typename Scalar>
Vector<Scalar> sample_embedding(const CirculantEmbedding<Scalar>& e, NormalStream& normals) {
  const Eigen::Index t1 = e.sqrt_eigen.rows(), t2 = e.sqrt_eigen.cols();
  ComplexGrid<Scalar> w(t1, t2);
  for (Eigen::Index j = 0; j < t2; ++j)
    for (Eigen::Index i = 0; i < t1; ++i) {
      const Scalar re = Scalar(normals());
      const Scalar im = Scalar(normals());
      w(i, j) = e.sqrt_eigen(i, j) * std::complex<Scalar>(re, im);
    }
  Fft2<Scalar>().forward(w);
  const auto& g = e.grid;
  Vector<Scalar> out(g.total_size());
  for (Eigen::Index py = 0; py < g.total_y(); ++py)
    for (Eigen::Index px = 0; px < g.total_x(); ++px) out(g.index(px, py)) = w(px, py).real();
  return out;
}

/// Unconditional stationary Gaussian field on the padded grid via circulant embedding.
template <typename Scalar>
Vector<Scalar> sim_unconditional_grid(const CovarianceModel<Scalar>& model,
                                      const PaddedGrid<Scalar>& grid, std::uint64_t seed) {
  NormalStream normals(seed, 0);
  return sample_embedding(build_embedding(model, grid), normals);
}

template <typename Scalar>
struct ObservationDraw {
  Vector<Scalar> g;  // process at the observation locations
  Vector<Scalar> z;  // g plus nugget noise
};

/// Process values at the observation locations drawn from their conditional distribution
/// given the (2L)^2 neighboring grid values, plus independent nugget noise.
template <typename Scalar>
ObservationDraw<Scalar> sim_obs_local(const RapidSetup<Scalar>& setup,
                                      const Vector<Scalar>& grid_field, NormalStream& normals) {
  if (grid_field.size() != setup.grid.total_size())
    throw DomainError("sim_obs_local: grid field does not match the padded grid");
  const Scalar tau = std::sqrt(setup.model.tau2);
  const Scalar tol = Scalar(1e-10) * std::max<Scalar>(Scalar(1), setup.model.sigma2);
  ObservationDraw<Scalar> out;
  out.g.resize(setup.n());
  out.z.resize(setup.n());
  for (Eigen::Index i = 0; i < setup.n(); ++i) {
    Scalar mean = 0;
    for (Eigen::Index a = 0; a < setup.block_size(); ++a)
      mean += setup.weights(a, i) * grid_field(setup.neighbors(a, i));
    const Scalar var = setup.cond_var(i);
    if (var < -tol) {
      std::ostringstream msg;
      msg << "sim_obs_local: negative conditional variance " << var << " at observation " << i;
      throw NumericError(msg.str());
    }
    const Scalar eta = Scalar(normals());
    const Scalar eps = Scalar(normals());
    out.g(i) = mean + std::sqrt(std::max<Scalar>(var, 0)) * eta;
    out.z(i) = out.g(i) + tau * eps;
  }
  return out;
}

template <typename Scalar>
ObservationDraw<Scalar> sim_obs_local(const RapidSetup<Scalar>& setup,
                                      const Vector<Scalar>& grid_field, std::uint64_t seed) {
  NormalStream normals(seed, 1);
  return sim_obs_local(setup, grid_field, normals);
}

enum class PredictionMethod { rapid, exact };

/// Conditional simulation engine: one fit, one rapid setup, one embedding, and the
/// prediction from the observed data, shared by every draw.
template <typename Scalar>
class ConditionalSimulator {
 public:
  ConditionalSimulator(const KrigingFit<Scalar>& fit, const RapidSetup<Scalar>& setup,
                       Matrix<Scalar> grid_X, PredictionMethod method = PredictionMethod::rapid)
      : fit_(fit),
        setup_(setup),
        grid_X_(std::move(grid_X)),
        method_(method),
        embedding_(build_embedding(setup.model, setup.grid)) {
    if (fit.n() != setup.n())
      throw DomainError("conditional simulation: fit and setup have different observations");
    if (grid_X_.rows() != setup.grid.interior_size() || grid_X_.cols() != fit.p())
      throw DomainError("conditional simulation: grid covariates must be (m1*m2) x p");
    if (method_ == PredictionMethod::exact) grid_locs_ = setup.grid.interior_locations();
    prediction_ = predict(fit.c, fit.beta_hat);
  }

  const Vector<Scalar>& prediction() const { return prediction_; }

  /// f_hat(z) + [g_grid - g_hat(z_sim)] on the interior grid.
  Vector<Scalar> draw(std::uint64_t seed) const {
    NormalStream grid_normals(seed, 0);
    NormalStream obs_normals(seed, 1);
    const Vector<Scalar> g = sample_embedding(embedding_, grid_normals);
    const auto obs = sim_obs_local(setup_, g, obs_normals);
    const auto coef = refit(fit_, obs.z);
    Vector<Scalar> out = prediction_ - predict(coef.c, coef.beta_hat);
    const auto& grid = setup_.grid;
    for (Eigen::Index iy = 0; iy < grid.m2; ++iy)
      for (Eigen::Index ix = 0; ix < grid.m1; ++ix)
        out(ix + grid.m1 * iy) += g(grid.interior_to_padded(ix, iy));
    return out;
  }

 private:
  Vector<Scalar> predict(const Vector<Scalar>& c, const Vector<Scalar>& beta) const {
    if (method_ == PredictionMethod::rapid) return predict_rapid(setup_, c, beta, grid_X_);
    KrigingFit<Scalar> shadow;
    shadow.model = fit_.model;
    shadow.obs_locs = fit_.obs_locs;
    shadow.X = fit_.X;
    shadow.c = c;
    shadow.beta_hat = beta;
    return predict_exact(shadow, grid_locs_, grid_X_);
  }

  const KrigingFit<Scalar>& fit_;
  const RapidSetup<Scalar>& setup_;
  Matrix<Scalar> grid_X_;
  PredictionMethod method_;
  CirculantEmbedding<Scalar> embedding_;
  Locations<Scalar> grid_locs_;
  Vector<Scalar> prediction_;
};

/// A single conditional draw on the interior grid.
template <typename Scalar>
Vector<Scalar> conditional_draw(const KrigingFit<Scalar>& fit, const RapidSetup<Scalar>& setup,
                                const Matrix<Scalar>& grid_X, std::uint64_t seed) {
  return ConditionalSimulator<Scalar>(fit, setup, grid_X).draw(seed);
}

template <typename Scalar>
struct Ensemble {
  std::vector<Vector<Scalar>> draws;  // empty unless kept
  std::uint64_t seed = 0;
  Eigen::Index n_draws = 0;
  Vector<Scalar> mean_field;
  Vector<Scalar> empirical_se;  // sample standard deviation, n_draws - 1 denominator
  Vector<Scalar> prediction;    // rapid prediction from the observed data
};

/// n_draws conditional draws; draw j uses seed derive_seed(seed, j).
template <typename Scalar>
Ensemble<Scalar> generate_ensemble(const KrigingFit<Scalar>& fit, const RapidSetup<Scalar>& setup,
                                   const Matrix<Scalar>& grid_X, Eigen::Index n_draws,
                                   std::uint64_t seed, bool keep_draws = true,
                                   PredictionMethod method = PredictionMethod::rapid) {
  if (n_draws < 2) throw DomainError("generate_ensemble: need at least two draws");
  const ConditionalSimulator<Scalar> sim(fit, setup, grid_X, method);
  const Eigen::Index size = setup.grid.interior_size();
  Ensemble<Scalar> ens;
  ens.seed = seed;
  ens.n_draws = n_draws;
  ens.prediction = sim.prediction();
  Vector<Scalar> mean = Vector<Scalar>::Zero(size), m2 = Vector<Scalar>::Zero(size);
  for (Eigen::Index j = 0; j < n_draws; ++j) {
    Vector<Scalar> d = sim.draw(derive_seed(seed, static_cast<std::uint64_t>(j)));
    const Vector<Scalar> delta = d - mean;
    mean += delta / Scalar(j + 1);
    m2.array() += delta.array() * (d - mean).array();
    if (keep_draws) ens.draws.push_back(std::move(d));
  }
  ens.mean_field = mean;
  ens.empirical_se = (m2 / Scalar(n_draws - 1)).array().max(Scalar(0)).sqrt().matrix();
  return ens;
}

}  // namespace rapidkrig
