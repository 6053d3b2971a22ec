#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rapidkrig/covariance.hpp"

namespace rapidkrig::bench {

/// Center, two edges and two corners of the unit square.
Locations<double> default_eval_points();

/// Factor levels for the approximation-error factorial on [0, 1]^2. The covariance scale of
/// each cell is set so the correlation equals target_corr at the listed distance.
struct StudyConfig {
  std::vector<int> n_levels{200, 500};
  std::vector<double> corr_distances{0.2, 0.8};
  std::vector<double> nu_levels{0.5, 1.0, 1.5};
  std::vector<double> tau2_levels{0.01, 0.5};
  std::vector<int> L_levels{2, 4};
  std::vector<int> grid_levels{100, 200};
  int n_reps = 10;
  double sigma2 = 1.0;
  double target_corr = 0.7;
  Locations<double> eval_points = default_eval_points();
  std::uint64_t seed = 20240601;

  void validate() const;
};

struct ErrorCell {
  int n = 0;
  double corr_distance = 0;
  double nu = 0;
  double tau2 = 0;
  int L = 0;
  int grid = 0;
  double alpha = 0;
  double mean_abs_error = 0;  // over replicates and eval points
  double log10_error = 0;
  int reps = 0;
  std::string error;  // non-empty when the cell failed
};

/// Matched-pair effect of moving one factor between adjacent levels, others held fixed.
struct FactorEffect {
  std::string factor;
  double from = 0, to = 0;
  double mean_delta = 0;  // mean change in log10 error
  double se = 0;          // standard error of that mean
  int pairs = 0;
};

struct ErrorStudy {
  std::vector<ErrorCell> cells;
  std::vector<FactorEffect> effects;
};

ErrorStudy run_error_study(const StudyConfig& config);

struct ConvergenceConfig {
  std::vector<double> nus{0.5, 1.0, 1.5, 2.5};
  int L = 2;
  std::vector<int> grid_ladder{20, 30, 40, 50, 60, 80, 100, 120, 140, 160, 180, 200};
  double range = 0.25;
  int restricted_max = 140;
  double floor = 1e-14;
  int dense = 4;  // extra evaluation points per cell edge around the center
};

struct ConvergencePoint {
  double nu = 0;
  int grid = 0;
  double delta = 0;   // fill distance
  double lambda = 0;  // sup kernel approximation error
  bool excluded = false;
};

struct ConvergenceSlope {
  double nu = 0;
  double slope = 0;             // all retained points
  double slope_restricted = 0;  // grids up to restricted_max
  double kappa_theory = 0;      // nu - 1/2
  int points = 0;
  int excluded = 0;
};

struct ConvergenceStudy {
  std::vector<ConvergencePoint> points;
  std::vector<ConvergenceSlope> slopes;
};

ConvergenceStudy run_convergence_study(const ConvergenceConfig& config);

/// Least-squares slope of y on x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

struct TimingConfig {
  std::vector<int> ns{200, 1500};
  std::vector<int> grid_ladder{60, 100, 140, 200};
  std::vector<std::string> methods{"exact", "rapid-L2", "rapid-L4", "rapid-L8", "cs-exact", "cs-fast"};
  int reps = 3;
  double timeout_s = 60;
  double nu = 1.0;
  double range = 0.05;
  int cs_draws = 10;
  std::uint64_t seed = 20240601;

  void validate() const;
};

struct TimingCell {
  std::string method;
  int n = 0;
  int grid = 0;
  double fit_s = 0;      // shared GLS fit, same for every method at this n
  double setup_s = 0;    // one-time setup (neighbor weights, filter spectrum)
  double predict_s = 0;  // per prediction, or per ensemble for cs-* methods
  int reps = 0;
  bool censored = false;
};

std::vector<TimingCell> run_timing(const TimingConfig& config);

void write_error_csv(std::ostream& out, const ErrorStudy& study);
void write_effects_csv(std::ostream& out, const ErrorStudy& study);
void write_convergence_csv(std::ostream& out, const ConvergenceStudy& study);
void write_slopes_csv(std::ostream& out, const ConvergenceStudy& study);
void write_timing_csv(std::ostream& out, const std::vector<TimingCell>& cells);

}  // namespace rapidkrig::bench
