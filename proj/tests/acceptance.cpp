// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "rapidkrig/bench/cli.hpp"
#include "rapidkrig/bench/io.hpp"
#include "rapidkrig/bench/studies.hpp"
#include "rapidkrig/rapidkrig.hpp"

using namespace rapidkrig;
using namespace rapidkrig::bench;
using Model = CovarianceModel<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Locations<double> uniform_points(int n, std::mt19937_64& rng, double x0 = 0, double x1 = 1,
                                 double y0 = 0, double y1 = 1) {
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  Locations<double> p(n, 2);
  for (int i = 0; i < n; ++i) p.row(i) << ux(rng), uy(rng);
  return p;
}

Eigen::VectorXd normals(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

// Gaussian data z = X beta + g + noise at locs, from the dense covariance.
Eigen::VectorXd simulate_data(const Model& m, const Locations<double>& locs, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& beta, std::mt19937_64& rng) {
  Eigen::MatrixXd M = cov_matrix(m, locs);
  M.diagonal().array() += m.tau2;
  return X * beta + Eigen::LLT<Eigen::MatrixXd>(M).matrixL() * normals(locs.rows(), rng);
}

const Domain<double> kUnit{0, 1, 0, 1};

Outcome fft_oracle() {
  const Model m{1.0, 5.0, 1.0, 0.0};
  const int L = 2;
  std::mt19937_64 rng(1);
  double worst = 0;
  int grids = 0;
  for (int m1 = 2 * L; m1 <= 16; ++m1)
    for (int m2 = 2 * L; m2 <= 16; ++m2) {
      const auto obs = uniform_points(20, rng);
      const auto g = build_padded_grid(kUnit, m1, m2, L, obs);
      const auto s = build_setup(m, g, L, obs);
      // Direct O(N^2) sum of the lag kernel over the padded grid.
      const auto nodes = g.interior_locations();
      Eigen::MatrixXd K(nodes.rows(), g.total_size());
      for (Eigen::Index q = 0; q < g.total_size(); ++q) {
        const Point<double> sq = g.location(q);
        for (Eigen::Index j = 0; j < nodes.rows(); ++j) K(j, q) = m((nodes.row(j) - sq).norm());
      }
      for (int v = 0; v < 50; ++v) {
        const Eigen::VectorXd c = normals(20, rng);
        const Eigen::VectorXd direct = K * scatter_coefficients(s, c);
        const Eigen::VectorXd fft = rapid_spatial(s, c);
        worst = std::max(worst, (fft - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff());
      }
      ++grids;
    }
  return {worst < 1e-10, fmt("%d grids x 50 vectors, max relative diff %.2e (tol 1e-10)", grids, worst)};
}

Outcome on_grid_degeneracy() {
  const int mm = 50, n = 100;
  std::mt19937_64 rng(2);
  std::vector<std::pair<int, int>> nodes;
  std::uniform_int_distribution<int> pick(0, mm - 1);
  while (int(nodes.size()) < n) {
    const std::pair<int, int> p{pick(rng), pick(rng)};
    if (std::find(nodes.begin(), nodes.end(), p) == nodes.end()) nodes.push_back(p);
  }
  Locations<double> obs(n, 2);
  for (int i = 0; i < n; ++i)
    obs.row(i) << nodes[i].first / double(mm - 1), nodes[i].second / double(mm - 1);
  Eigen::MatrixXd X(n, 3);
  X << Eigen::VectorXd::Ones(n), obs;
  bool pass = true;
  std::string detail;
  for (double nu : {0.5, 1.5}) {
    const auto m = Model::from_range(1.0, 0.2, nu, 0.1);
    const auto z = simulate_data(m, obs, X, Eigen::Vector3d(1, 0.5, -0.5), rng);
    const auto f = fit(m, obs, z, X);
    const auto g = build_padded_grid(kUnit, mm, mm, 4, obs);
    const auto s = build_setup(m, g, 4, obs);
    const auto nodes_xy = g.interior_locations();
    Eigen::MatrixXd gX(nodes_xy.rows(), 3);
    gX << Eigen::VectorXd::Ones(nodes_xy.rows()), nodes_xy;
    const Eigen::VectorXd exact = predict_exact(f, nodes_xy, gX);
    const double diff = (predict_rapid(s, f.c, f.beta_hat, gX) - exact).cwiseAbs().maxCoeff();
    const double scale = exact.maxCoeff() - exact.minCoeff();
    pass = pass && diff < 1e-8 * scale;
    detail += fmt("nu=%.1f max diff %.2e vs 1e-8*scale=%.2e; ", nu, diff, 1e-8 * scale);
  }
  return {pass, detail};
}

Outcome interpolation_condition() {
  const Model m = Model::from_range(1.0, 0.2, 1.0, 0.0);
  std::mt19937_64 rng(3);
  const auto obs = uniform_points(200, rng);
  bool pass = true;
  std::string detail;
  for (int L : {2, 4, 8}) {
    const auto g = build_padded_grid(kUnit, 50, 50, L, obs);
    const auto s = build_setup(m, g, L, obs);
    const auto M = s.block_size();
    double worst = 0;
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      Eigen::MatrixXd K(M, M);
      Eigen::VectorXd k(M);
      for (Eigen::Index a = 0; a < M; ++a) {
        const Point<double> sa = g.location(s.neighbors(a, i));
        k(a) = m((obs.row(i) - sa).norm());
        for (Eigen::Index b = 0; b < M; ++b) K(a, b) = m((sa - g.location(s.neighbors(b, i))).norm());
      }
      worst = std::max(worst, (K * s.weights.col(i) - k).cwiseAbs().maxCoeff());
    }
    pass = pass && worst < 1e-8;
    detail += fmt("L=%d max residual %.2e; ", L, worst);
  }
  return {pass, detail + "(tol 1e-8)"};
}

Outcome accuracy_factorial() {
  StudyConfig c;
  c.n_levels = {200};
  c.grid_levels = {100};
  c.n_reps = 10;
  c.nu_levels = {0.5, 1.5};
  c.L_levels = {2, 4};
  c.tau2_levels = {0.01, 0.5};
  c.corr_distances = {0.2, 0.8};
  const auto study = run_error_study(c);
  double worst = 0;
  bool ok = true;
  for (const auto& cell : study.cells) {
    ok = ok && cell.error.empty();
    if (cell.nu == 0.5 && cell.L == 2 && cell.tau2 == 0.01) worst = std::max(worst, cell.mean_abs_error);
  }
  double l_effect = 0;
  for (const auto& e : study.effects)
    if (e.factor == "L") l_effect = e.mean_delta;
  return {ok && worst < 1e-2 && l_effect <= -0.7,
          fmt("worst cell mean |err| %.2e (< 1e-2); L 2->4 mean log10 change %.3f (<= -0.7)", worst,
              l_effect)};
}

Outcome convergence_order() {
  const auto study = run_convergence_study(ConvergenceConfig{});
  bool pass = true;
  std::string detail;
  for (const auto& s : study.slopes) {
    double got = s.slope, want = 0, tol = 0.3;
    if (s.nu == 0.5) want = 1.00;
    else if (s.nu == 1.0) want = 1.99;
    else if (s.nu == 1.5) want = 2.00;
    else {
      want = 2.99;
      tol = 0.5;
      got = s.slope_restricted;
    }
    pass = pass && std::abs(got - want) < tol;
    detail += fmt("nu=%.1f slope %.3f (target %.2f +- %.1f); ", s.nu, got, want, tol);
  }
  return {pass, detail};
}

Outcome rainfall_analogue() {
  const Model m = Model::from_range(2.43, 1.21, 1.5, 0.47);
  const Domain<double> domain{-105, -92, 27, 55};
  std::mt19937_64 rng(6);
  const auto obs = uniform_points(1300, rng, domain.xmin, domain.xmax, domain.ymin, domain.ymax);
  const std::vector<Term> terms{Term::one, Term::x, Term::y, Term::xy};
  const auto X = design_matrix(terms, obs);
  Eigen::Vector4d beta(-20.0, -0.2, 0.5, 0.004);
  const auto z = simulate_data(m, obs, X, beta, rng);
  const auto f = fit(m, obs, z, X);
  const auto g = build_padded_grid(domain, 128, 256, 4, obs);
  const auto s = build_setup(m, g, 4, obs);
  const auto nodes = g.interior_locations();
  const auto gX = design_matrix(terms, nodes);
  const Eigen::VectorXd exact = predict_exact(f, nodes, gX);
  const double diff = (predict_rapid(s, f.c, f.beta_hat, gX) - exact).cwiseAbs().maxCoeff();
  const double scale = exact.maxCoeff() - exact.minCoeff();
  return {diff < 1e-3 * scale,
          fmt("max |rapid - exact| %.2e, field scale %.3f, ratio %.2e (tol 1e-3)", diff, scale,
              diff / scale)};
}

Outcome speedup() {
  TimingConfig c;
  c.ns = {1500};
  c.grid_ladder = {350};
  c.methods = {"exact", "rapid-L4"};
  c.reps = 3;
  c.timeout_s = 240;
  const auto cells = run_timing(c);
  double exact = NAN, rapid = NAN, setup = NAN;
  for (const auto& cell : cells) {
    if (cell.censored) return {false, "timing cell censored"};
    if (cell.method == "exact") exact = cell.predict_s;
    if (cell.method == "rapid-L4") {
      rapid = cell.predict_s;
      setup = cell.setup_s;
    }
  }
  const double ratio = exact / rapid;
  return {ratio >= 20, fmt("exact %.3f s, rapid-L4 %.4f s per prediction (setup %.3f s), speedup %.0fx (>= 20x)",
                           exact, rapid, setup, ratio)};
}

Outcome cs_standard_errors() {
  // Rainfall-like model and domain; correlation distance is where phi falls to 0.7.
  const Model m = Model::from_range(2.43, 1.21, 1.5, 0.47);
  const Domain<double> domain{-105, -92, 27, 55};
  const double corr_dist = range_from_correlation(m.nu, 0.7, 1.0) / m.alpha;
  std::mt19937_64 rng(8);
  const auto obs = uniform_points(300, rng, domain.xmin, domain.xmax, domain.ymin, domain.ymax);
  const std::vector<Term> terms{Term::one, Term::x, Term::y, Term::xy};
  const auto X = design_matrix(terms, obs);
  const auto z = simulate_data(m, obs, X, Eigen::Vector4d(-20.0, -0.2, 0.5, 0.004), rng);
  const auto f = fit(m, obs, z, X);
  const auto g = build_padded_grid(domain, 64, 64, 4, obs);
  const auto s = build_setup(m, g, 4, obs);
  const auto nodes = g.interior_locations();
  const auto gX = design_matrix(terms, nodes);
  const auto ens = generate_ensemble(f, s, gX, 200, 8, false);
  const Eigen::VectorXd se = kriging_se_exact(f, nodes, gX);
  Eigen::Index eligible = 0, agree = 0;
  for (Eigen::Index j = 0; j < nodes.rows(); ++j) {
    const double nearest = (obs.rowwise() - nodes.row(j)).rowwise().norm().minCoeff();
    if (nearest > corr_dist) continue;
    ++eligible;
    if (std::abs(ens.empirical_se(j) / se(j) - 1) <= 0.15) ++agree;
  }
  const double frac = double(agree) / double(eligible);
  return {eligible > 0 && frac >= 0.9,
          fmt("%.1f%% of %ld points within %.2f of data agree to 15%% (>= 90%%)", 100 * frac,
              long(eligible), corr_dist)};
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("rapidkrig_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  std::mt19937_64 rng(9);
  const auto obs = uniform_points(150, rng);
  const auto z = normals(150, rng);
  {
    std::ofstream out(dir / "obs.csv");
    out.precision(17);
    out << "x,y,z\n";
    for (int i = 0; i < 150; ++i) out << obs(i, 0) << ',' << obs(i, 1) << ',' << z(i) << '\n';
  }
  auto run = [&](const std::string& name) {
    return cli_main({"rapidkrig", "simulate", "--obs", (dir / "obs.csv").string(), "--out",
                     (dir / name).string(), "--grid", "64x64", "--sigma2", "1", "--range", "0.1",
                     "--nu", "1", "--tau2", "0.1", "--draws", "10", "--seed", "7", "--save-draws"});
  };
  const int rc1 = run("a.rkg"), rc2 = run("b.rkg");
  auto slurp = [&](const std::string& name) {
    std::ifstream in(dir / name, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const std::string a = slurp("a.rkg"), b = slurp("b.rkg");
  fs::remove_all(dir);
  const bool same = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
  return {same, fmt("exit codes %d/%d, %zu bytes each, identical=%s", rc1, rc2, a.size(), a == b ? "yes" : "no")};
}

Outcome monte_carlo_kernel() {
  const Model m = Model::from_range(2.0, 0.1, 1.0, 0.0);
  const auto g = build_padded_grid(kUnit, 32, 32, 1, Locations<double>(0, 2));
  const int draws = 10000;
  const std::vector<Eigen::Index> var_probes{g.index(0, 0), g.index(16, 16), g.index(31, 5)};
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs{
      {g.index(16, 16), g.index(17, 16)}, {g.index(16, 16), g.index(19, 20)}, {g.index(3, 3), g.index(13, 3)}};
  std::vector<double> s1(9, 0), s2(9, 0);
  std::vector<double> sx(3, 0), sy(3, 0), sxy(3, 0), sxx(3, 0), syy(3, 0);
  for (int j = 0; j < draws; ++j) {
    const auto f = sim_unconditional_grid(m, g, derive_seed(10, std::uint64_t(j)));
    for (std::size_t p = 0; p < var_probes.size(); ++p) {
      s1[p] += f(var_probes[p]);
      s2[p] += f(var_probes[p]) * f(var_probes[p]);
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double x = f(pairs[p].first), y = f(pairs[p].second);
      sx[p] += x;
      sy[p] += y;
      sxy[p] += x * y;
      sxx[p] += x * x;
      syy[p] += y * y;
    }
  }
  bool pass = true;
  std::string detail;
  for (std::size_t p = 0; p < var_probes.size(); ++p) {
    const double var = (s2[p] - s1[p] * s1[p] / draws) / (draws - 1);
    pass = pass && std::abs(var / m.sigma2 - 1) < 0.05;
    detail += fmt("var %.3f; ", var);
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double cov = (sxy[p] - sx[p] * sy[p] / draws) / (draws - 1);
    const double vx = (sxx[p] - sx[p] * sx[p] / draws) / (draws - 1);
    const double vy = (syy[p] - sy[p] * sy[p] / draws) / (draws - 1);
    const double se = std::sqrt((vx * vy + cov * cov) / draws);
    const double want = m((g.location(pairs[p].first) - g.location(pairs[p].second)).norm());
    pass = pass && std::abs(cov - want) < 3 * se;
    detail += fmt("cov %.3f vs %.3f (%.1f SE); ", cov, want, std::abs(cov - want) / se);
  }
  return {pass, detail + "(sigma2 = 2, var tol 5%, cov tol 3 SE)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "FFT convolution equals direct sum", 10, fft_oracle},
      {2, "on-grid degeneracy", 30, on_grid_degeneracy},
      {3, "interpolation condition", 30, interpolation_condition},
      {4, "factorial accuracy", 300, accuracy_factorial},
      {5, "convergence order", 300, convergence_order},
      {6, "rainfall-analogue field accuracy", 120, rainfall_analogue},
      {7, "speedup at n=1500, 350x350", 300, speedup},
      {8, "conditional simulation standard errors", 300, cs_standard_errors},
      {9, "simulate determinism", 60, cli_determinism},
      {10, "Monte Carlo kernel checks", 120, monte_carlo_kernel},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit_s;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail
              << fmt(" [%.1f s, limit %.0f s]", secs, c.limit_s) << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
