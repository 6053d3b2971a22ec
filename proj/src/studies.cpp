#include "rapidkrig/bench/studies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <tuple>

#include <Eigen/Cholesky>

#include "rapidkrig/conditional_sim.hpp"
#include "rapidkrig/errors.hpp"
#include "rapidkrig/exact_kriging.hpp"
#include "rapidkrig/random.hpp"
#include "rapidkrig/rapid_predictor.hpp"

namespace rapidkrig::bench {

namespace {

const Domain<double> kUnit{0, 1, 0, 1};

std::uint64_t mix(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  for (const auto p : parts) seed = splitmix64(seed ^ p);
  return seed;
}

Locations<double> uniform_points(Eigen::Index n, NormalStream& rng) {
  Locations<double> pts(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts(i, 0) = rng.uniform();
    pts(i, 1) = rng.uniform();
  }
  return pts;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

template <typename F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
void require_levels(const std::vector<T>& v, const char* name, std::function<bool(T)> ok) {
  if (v.empty()) throw DomainError(std::string("study config: no levels for ") + name);
  for (const T& x : v)
    if (!ok(x)) throw DomainError(std::string("study config: invalid level for ") + name);
}

}  // namespace

Locations<double> default_eval_points() {
  Locations<double> p(5, 2);
  p << 0.5, 0.5, 0.5, 0.05, 0.05, 0.5, 0.05, 0.05, 0.95, 0.95;
  return p;
}

void StudyConfig::validate() const {
  require_levels<int>(n_levels, "n", [](int v) { return v >= 2; });
  require_levels<double>(corr_distances, "correlation distance", [](double v) { return v > 0; });
  require_levels<double>(nu_levels, "nu", [](double v) { return v > 0; });
  require_levels<double>(tau2_levels, "tau2", [](double v) { return v >= 0; });
  require_levels<int>(L_levels, "L", [](int v) { return v >= 1; });
  require_levels<int>(grid_levels, "grid size", [](int v) { return v >= 2; });
  for (int L : L_levels)
    for (int m : grid_levels)
      if (m < 2 * L) throw DomainError("study config: grid size must be at least 2L");
  if (n_reps < 1) throw DomainError("study config: n_reps must be >= 1");
  if (!(sigma2 > 0)) throw DomainError("study config: sigma2 must be positive");
  if (!(target_corr > 0 && target_corr < 1))
    throw DomainError("study config: target correlation must lie in (0, 1)");
  if (eval_points.rows() == 0) throw DomainError("study config: no evaluation points");
  for (Eigen::Index i = 0; i < eval_points.rows(); ++i)
    if (!kUnit.contains(eval_points(i, 0), eval_points(i, 1)))
      throw DomainError("study config: evaluation points must lie in the unit square");
}

ErrorStudy run_error_study(const StudyConfig& cfg) {
  cfg.validate();
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t, std::size_t>;
  std::map<Key, ErrorCell> cells;
  std::map<Key, double> sums;
  const auto ne = cfg.eval_points.rows();

  auto cell_at = [&](const Key& k) -> ErrorCell& {
    auto [it, fresh] = cells.try_emplace(k);
    if (fresh) {
      const auto [a, b, c, d, e, f] = k;
      it->second.n = cfg.n_levels[a];
      it->second.corr_distance = cfg.corr_distances[b];
      it->second.nu = cfg.nu_levels[c];
      it->second.tau2 = cfg.tau2_levels[d];
      it->second.L = cfg.L_levels[e];
      it->second.grid = cfg.grid_levels[f];
    }
    return it->second;
  };

  for (std::size_t a = 0; a < cfg.n_levels.size(); ++a) {
    const int n = cfg.n_levels[a];
    for (int rep = 0; rep < cfg.n_reps; ++rep) {
      // Locations and white noise are shared by every cell with this n and replicate.
      NormalStream rng(mix(cfg.seed, {std::uint64_t(n), std::uint64_t(rep)}), 2);
      const Locations<double> locs = uniform_points(n, rng);
      Eigen::VectorXd xi(n);
      for (int i = 0; i < n; ++i) xi(i) = rng();
      const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);

      for (std::size_t b = 0; b < cfg.corr_distances.size(); ++b)
        for (std::size_t c = 0; c < cfg.nu_levels.size(); ++c)
          for (std::size_t d = 0; d < cfg.tau2_levels.size(); ++d) {
            const double nu = cfg.nu_levels[c];
            double alpha = 0;
            std::optional<KrigingFit<double>> f;
            std::string fit_error;
            try {
              alpha = range_from_correlation(nu, cfg.target_corr, cfg.corr_distances[b]);
              const CovarianceModel<double> model{cfg.sigma2, alpha, nu, cfg.tau2_levels[d]};
              Eigen::MatrixXd M = cov_matrix(model, locs);
              M.diagonal().array() += model.tau2;
              Eigen::LLT<Eigen::MatrixXd> llt(M);
              if (llt.info() != Eigen::Success)
                throw NumericError("error study: data covariance not positive definite");
              const Eigen::VectorXd z = llt.matrixL() * xi;
              f = fit(model, locs, z, X);
            } catch (const std::exception& ex) {
              fit_error = ex.what();
            }
            for (std::size_t e = 0; e < cfg.L_levels.size(); ++e)
              for (std::size_t g = 0; g < cfg.grid_levels.size(); ++g) {
                const Key key{a, b, c, d, e, g};
                ErrorCell& cell = cell_at(key);
                cell.alpha = alpha;
                if (!cell.error.empty()) continue;
                if (!f) {
                  cell.error = fit_error;
                  continue;
                }
                try {
                  const int m = cfg.grid_levels[g], L = cfg.L_levels[e];
                  const auto grid = build_padded_grid(kUnit, m, m, L, locs);
                  const auto setup = build_setup(f->model, grid, L, locs);
                  const Eigen::VectorXd rapid = predict_rapid(
                      setup, f->c, f->beta_hat, Eigen::MatrixXd::Ones(grid.interior_size(), 1));
                  // Evaluate at the grid node nearest each evaluation point.
                  Locations<double> nodes(ne, 2);
                  std::vector<Eigen::Index> idx(static_cast<std::size_t>(ne));
                  for (Eigen::Index p = 0; p < ne; ++p) {
                    const auto ix = static_cast<Eigen::Index>(std::lround(cfg.eval_points(p, 0) / grid.hx));
                    const auto iy = static_cast<Eigen::Index>(std::lround(cfg.eval_points(p, 1) / grid.hy));
                    nodes.row(p) << double(ix) * grid.hx, double(iy) * grid.hy;
                    idx[static_cast<std::size_t>(p)] = ix + grid.m1 * iy;
                  }
                  const Eigen::VectorXd exact = predict_exact(*f, nodes, Eigen::MatrixXd::Ones(ne, 1));
                  double s = 0;
                  for (Eigen::Index p = 0; p < ne; ++p)
                    s += std::abs(rapid(idx[static_cast<std::size_t>(p)]) - exact(p));
                  sums[key] += s / double(ne);
                  ++cell.reps;
                } catch (const std::exception& ex) {
                  cell.error = ex.what();
                }
              }
          }
    }
  }

  ErrorStudy study;
  for (auto& [key, cell] : cells) {
    if (cell.error.empty() && cell.reps > 0) {
      cell.mean_abs_error = sums[key] / cell.reps;
      cell.log10_error = std::log10(cell.mean_abs_error);
    } else {
      cell.mean_abs_error = cell.log10_error = std::numeric_limits<double>::quiet_NaN();
    }
    study.cells.push_back(cell);
  }

  // Matched-pair factor effects between adjacent levels.
  auto add_effects = [&](const std::string& name, std::size_t slot, auto level_of,
                         std::size_t levels) {
    for (std::size_t l = 0; l + 1 < levels; ++l) {
      std::vector<double> deltas;
      for (const auto& [key, cell] : cells) {
        Key k = key;
        std::size_t* fields[] = {&std::get<0>(k), &std::get<1>(k), &std::get<2>(k),
                                 &std::get<3>(k), &std::get<4>(k), &std::get<5>(k)};
        if (*fields[slot] != l) continue;
        *fields[slot] = l + 1;
        const auto other = cells.find(k);
        if (other == cells.end()) continue;
        const double d = other->second.log10_error - cell.log10_error;
        if (std::isfinite(d)) deltas.push_back(d);
      }
      FactorEffect fe;
      fe.factor = name;
      fe.from = level_of(l);
      fe.to = level_of(l + 1);
      fe.pairs = static_cast<int>(deltas.size());
      if (!deltas.empty()) {
        double mean = 0;
        for (double d : deltas) mean += d;
        mean /= double(deltas.size());
        double ss = 0;
        for (double d : deltas) ss += (d - mean) * (d - mean);
        fe.mean_delta = mean;
        fe.se = deltas.size() > 1 ? std::sqrt(ss / double(deltas.size() - 1) / double(deltas.size())) : 0;
      }
      study.effects.push_back(fe);
    }
  };
  add_effects("n", 0, [&](std::size_t l) { return double(cfg.n_levels[l]); }, cfg.n_levels.size());
  add_effects("corr_distance", 1, [&](std::size_t l) { return cfg.corr_distances[l]; },
              cfg.corr_distances.size());
  add_effects("nu", 2, [&](std::size_t l) { return cfg.nu_levels[l]; }, cfg.nu_levels.size());
  add_effects("tau2", 3, [&](std::size_t l) { return cfg.tau2_levels[l]; }, cfg.tau2_levels.size());
  add_effects("L", 4, [&](std::size_t l) { return double(cfg.L_levels[l]); }, cfg.L_levels.size());
  add_effects("grid", 5, [&](std::size_t l) { return double(cfg.grid_levels[l]); },
              cfg.grid_levels.size());
  return study;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(x.size());
  my /= double(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

ConvergenceStudy run_convergence_study(const ConvergenceConfig& cfg) {
  if (cfg.nus.empty() || cfg.grid_ladder.size() < 2)
    throw DomainError("convergence study: need smoothness values and at least two grids");
  for (std::size_t k = 1; k < cfg.grid_ladder.size(); ++k)
    if (cfg.grid_ladder[k] <= cfg.grid_ladder[k - 1])
      throw DomainError("convergence study: grid ladder must be strictly refining");
  if (!(cfg.range > 0) || cfg.L < 1 || cfg.dense < 1)
    throw DomainError("convergence study: invalid range, L or density");

  ConvergenceStudy study;
  for (const double nu : cfg.nus) {
    const auto model = CovarianceModel<double>::from_range(1.0, cfg.range, nu, 0.0);
    std::vector<double> x, y, xr, yr;
    ConvergenceSlope sl;
    sl.nu = nu;
    sl.kappa_theory = nu - 0.5;
    for (const int m : cfg.grid_ladder) {
      if (m < 2 * cfg.L + 6) throw DomainError("convergence study: grid too coarse for L");
      const double h = 1.0 / (m - 1);
      const int c = (m - 1) / 2;
      Point<double> center;
      center << (c + 0.5) * h, (c + 0.5) * h;
      const auto grid = build_padded_grid(kUnit, m, m, cfg.L, Locations<double>(center));

      const int side = (2 * cfg.L + 5) * cfg.dense + 1;
      const double lo = (c - cfg.L - 2) * h, hi = (c + cfg.L + 3) * h;
      Locations<double> pts(grid.interior_size() + side * side, 2);
      pts.topRows(grid.interior_size()) = grid.interior_locations();
      for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i)
          pts.row(grid.interior_size() + i + side * j) << lo + (hi - lo) * i / (side - 1),
              lo + (hi - lo) * j / (side - 1);

      ConvergencePoint pt;
      pt.nu = nu;
      pt.grid = m;
      pt.delta = fill_distance(h);
      pt.lambda = kernel_approx_error(model, grid, cfg.L, center, pts).sup;
      pt.excluded = !(pt.lambda >= cfg.floor);
      study.points.push_back(pt);
      if (pt.excluded) {
        ++sl.excluded;
        continue;
      }
      x.push_back(std::log10(1 / pt.delta));
      y.push_back(std::log10(pt.lambda));
      if (m <= cfg.restricted_max) {
        xr.push_back(x.back());
        yr.push_back(y.back());
      }
    }
    sl.points = static_cast<int>(x.size());
    sl.slope = -ls_slope(x, y);
    sl.slope_restricted = -ls_slope(xr, yr);
    study.slopes.push_back(sl);
  }
  return study;
}

void TimingConfig::validate() const {
  static const std::vector<std::string> known{"exact",    "rapid-L2", "rapid-L4",
                                              "rapid-L8", "cs-exact", "cs-fast"};
  if (methods.empty()) throw DomainError("timing: no methods");
  for (const auto& m : methods)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw DomainError("timing: unknown method '" + m + "'");
  require_levels<int>(ns, "n", [](int v) { return v >= 2; });
  require_levels<int>(grid_ladder, "grid size", [](int v) { return v >= 16; });
  if (reps < 3) throw DomainError("timing: reps must be >= 3");
  if (!(timeout_s > 0)) throw DomainError("timing: timeout must be positive");
  if (cs_draws < 2) throw DomainError("timing: cs draws must be >= 2");
}

std::vector<TimingCell> run_timing(const TimingConfig& cfg) {
  cfg.validate();
  const auto model = CovarianceModel<double>::from_range(1.0, cfg.range, cfg.nu, 0.1);
  std::vector<TimingCell> out;
  for (const int n : cfg.ns) {
    NormalStream rng(mix(cfg.seed, {std::uint64_t(n)}), 2);
    const Locations<double> locs = uniform_points(n, rng);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    std::optional<KrigingFit<double>> f;
    const double fit_s = seconds([&] { f = fit(model, locs, z, X); });

    for (const auto& method : cfg.methods) {
      bool censored = false;
      for (const int m : cfg.grid_ladder) {
        TimingCell cell;
        cell.method = method;
        cell.n = n;
        cell.grid = m;
        cell.fit_s = fit_s;
        if (censored) {
          // A coarser grid already exceeded the budget.
          cell.censored = true;
          out.push_back(cell);
          continue;
        }
        const int L = method == "rapid-L2" ? 2 : method == "rapid-L8" ? 8 : 4;
        const Eigen::MatrixXd gX = Eigen::MatrixXd::Ones(Eigen::Index(m) * m, 1);
        Locations<double> nodes;
        if (method == "exact") nodes = build_padded_grid(kUnit, m, m, 1, locs).interior_locations();

        auto run_once = [&](double& setup_s, double& predict_s) {
          if (method == "exact") {
            setup_s = 0;
            predict_s = seconds([&] { (void)predict_exact(*f, nodes, gX); });
            return;
          }
          std::optional<RapidSetup<double>> setup;
          setup_s = seconds([&] {
            const auto grid = build_padded_grid(kUnit, m, m, L, locs);
            setup = build_setup(model, grid, L, locs);
          });
          if (method.rfind("rapid", 0) == 0) {
            predict_s = seconds([&] { (void)predict_rapid(*setup, f->c, f->beta_hat, gX); });
          } else {
            const auto pm = method == "cs-exact" ? PredictionMethod::exact : PredictionMethod::rapid;
            predict_s = seconds([&] {
              (void)generate_ensemble(*f, *setup, gX, cfg.cs_draws, cfg.seed, false, pm);
            });
          }
        };

        double warm_setup = 0, warm_predict = 0;
        run_once(warm_setup, warm_predict);
        if (warm_setup + warm_predict > cfg.timeout_s) {
          cell.censored = censored = true;
          cell.setup_s = warm_setup;
          cell.predict_s = warm_predict;
          cell.reps = 1;
          out.push_back(cell);
          continue;
        }
        std::vector<double> setups, predicts;
        for (int r = 0; r < cfg.reps; ++r) {
          double s = 0, p = 0;
          run_once(s, p);
          setups.push_back(s);
          predicts.push_back(p);
        }
        cell.setup_s = median(setups);
        cell.predict_s = median(predicts);
        cell.reps = cfg.reps;
        out.push_back(cell);
      }
    }
  }
  return out;
}

void write_error_csv(std::ostream& out, const ErrorStudy& study) {
  out << "n,corr_distance,nu,tau2,L,grid,alpha,reps,mean_abs_error,log10_error,error\n";
  out.precision(10);
  for (const auto& c : study.cells)
    out << c.n << ',' << c.corr_distance << ',' << c.nu << ',' << c.tau2 << ',' << c.L << ','
        << c.grid << ',' << c.alpha << ',' << c.reps << ',' << c.mean_abs_error << ','
        << c.log10_error << ",\"" << c.error << "\"\n";
}

void write_effects_csv(std::ostream& out, const ErrorStudy& study) {
  out << "factor,from,to,pairs,mean_delta_log10,se\n";
  out.precision(10);
  for (const auto& e : study.effects)
    out << e.factor << ',' << e.from << ',' << e.to << ',' << e.pairs << ',' << e.mean_delta << ','
        << e.se << '\n';
}

void write_convergence_csv(std::ostream& out, const ConvergenceStudy& study) {
  out << "nu,grid,fill_distance,lambda,excluded\n";
  out.precision(10);
  for (const auto& p : study.points)
    out << p.nu << ',' << p.grid << ',' << p.delta << ',' << p.lambda << ','
        << (p.excluded ? 1 : 0) << '\n';
}

void write_slopes_csv(std::ostream& out, const ConvergenceStudy& study) {
  out << "nu,kappa_theory,slope,slope_restricted,points,excluded\n";
  out.precision(10);
  for (const auto& s : study.slopes)
    out << s.nu << ',' << s.kappa_theory << ',' << s.slope << ',' << s.slope_restricted << ','
        << s.points << ',' << s.excluded << '\n';
}

void write_timing_csv(std::ostream& out, const std::vector<TimingCell>& cells) {
  out << "method,n,grid,N,fit_s,setup_s,predict_s,reps,censored\n";
  out.precision(6);
  for (const auto& c : cells)
    out << c.method << ',' << c.n << ',' << c.grid << ',' << std::int64_t(c.grid) * c.grid << ','
        << c.fit_s << ',' << c.setup_s << ',' << c.predict_s << ',' << c.reps << ','
        << (c.censored ? 1 : 0) << '\n';
}

}  // namespace rapidkrig::bench
