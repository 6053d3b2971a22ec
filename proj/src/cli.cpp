#include "rapidkrig/bench/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rapidkrig/bench/io.hpp"
#include "rapidkrig/bench/studies.hpp"
#include "rapidkrig/conditional_sim.hpp"
#include "rapidkrig/errors.hpp"
#include "rapidkrig/exact_kriging.hpp"
#include "rapidkrig/random.hpp"
#include "rapidkrig/rapid_predictor.hpp"

namespace rapidkrig::bench {

namespace {

struct ModelArgs {
  double sigma2 = 1;
  std::optional<double> alpha, range;
  double nu = 1;
  double tau2 = 0;

  CovarianceModel<double> model() const {
    CovarianceModel<double> m{sigma2, 1, nu, tau2};
    if (alpha)
      m.alpha = *alpha;
    else if (range)
      m = CovarianceModel<double>::from_range(sigma2, *range, nu, tau2);
    else
      throw DomainError("one of --alpha or --range is required");
    m.validate();
    return m;
  }
};

struct GridArgs {
  std::string obs, out, method = "rapid", grid = "100x100", domain, covariates = "1";
  int L = 4;
};

void add_model_options(CLI::App* app, ModelArgs& m) {
  app->add_option("--sigma2", m.sigma2, "process variance")->required();
  auto* a = app->add_option("--alpha", m.alpha, "Matern scale (multiplies distance)");
  auto* r = app->add_option("--range", m.range, "Matern range (alpha = 1/range)");
  a->excludes(r);
  app->add_option("--nu", m.nu, "Matern smoothness")->required();
  app->add_option("--tau2", m.tau2, "nugget variance")->required();
}

void add_grid_options(CLI::App* app, GridArgs& g) {
  app->add_option("--obs", g.obs, "observation file (columns x, y, z, ...)")->required();
  app->add_option("--out", g.out, "output grid file")->required();
  app->add_option("--method", g.method, "exact or rapid")
      ->check(CLI::IsMember({"exact", "rapid"}))
      ->capture_default_str();
  app->add_option("--L", g.L, "neighbor order")->capture_default_str();
  app->add_option("--grid", g.grid, "grid size M1xM2")->capture_default_str();
  app->add_option("--domain", g.domain, "xmin,xmax,ymin,ymax (default: data bounding box)");
  app->add_option("--covariates", g.covariates, "fixed-effect terms from {1, x, y, x*y}")
      ->capture_default_str();
}

std::pair<Eigen::Index, Eigen::Index> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  Eigen::Index a = 0, b = 0;
  auto num = [](std::string_view t, Eigen::Index& v) {
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    return ec == std::errc() && p == t.data() + t.size();
  };
  if (x == std::string::npos || !num(std::string_view(s).substr(0, x), a) ||
      !num(std::string_view(s).substr(x + 1), b) || a < 2 || b < 2)
    throw DomainError("--grid must look like 128x256 with both sizes >= 2");
  return {a, b};
}

Domain<double> parse_domain(const std::string& s, const Observations& obs) {
  if (s.empty()) return obs.bbox;
  std::vector<double> v;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    double d;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw DomainError("--domain: bad number '" + tok + "'");
    v.push_back(d);
  }
  if (v.size() != 4) throw DomainError("--domain needs xmin,xmax,ymin,ymax");
  return {v[0], v[1], v[2], v[3]};
}

std::uint64_t effective_seed(std::uint64_t flag) {
  const char* env = std::getenv("RAPIDKRIG_SEED");
  if (!env || !*env) return flag;
  std::uint64_t v = 0;
  const std::string_view s(env);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DomainError("RAPIDKRIG_SEED is not an unsigned integer: " + std::string(s));
  return v;
}

std::string join(const Eigen::VectorXd& v) {
  std::ostringstream ss;
  ss.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v(i);
  return ss.str();
}

struct Prepared {
  Observations obs;
  std::vector<Term> terms;
  CovarianceModel<double> model;
  KrigingFit<double> fit;
  PaddedGrid<double> grid;
  Eigen::MatrixXd grid_X;
};

Prepared prepare(const GridArgs& g, const ModelArgs& m) {
  Prepared p;
  p.model = m.model();
  if (g.L < 1) throw DomainError("--L must be >= 1");
  p.obs = load_observations(g.obs);
  std::clog << "rapidkrig: loaded " << p.obs.size() << " observations from " << g.obs
            << "; bounding box [" << p.obs.bbox.xmin << ", " << p.obs.bbox.xmax << "] x ["
            << p.obs.bbox.ymin << ", " << p.obs.bbox.ymax << "]\n";
  p.terms = parse_covariates(g.covariates);
  const auto [m1, m2] = parse_grid(g.grid);
  const auto domain = parse_domain(g.domain, p.obs);
  p.grid = build_padded_grid(domain, m1, m2, g.L, p.obs.locs);
  p.fit = fit(p.model, p.obs.locs, p.obs.z, design_matrix(p.terms, p.obs.locs));
  p.grid_X = design_matrix(p.terms, p.grid.interior_locations());
  return p;
}

GridOutput output_header(const Prepared& p, const GridArgs& g) {
  GridOutput out = grid_output_for(p.grid, p.model);
  out.meta.emplace_back("method", g.method);
  out.meta.emplace_back("L", std::to_string(g.L));
  out.meta.emplace_back("covariates", format_covariates(p.terms));
  out.meta.emplace_back("beta", join(p.fit.beta_hat));
  out.meta.emplace_back("n_obs", std::to_string(p.obs.size()));
  return out;
}

int run_predict(const GridArgs& g, const ModelArgs& m, bool with_se) {
  const Prepared p = prepare(g, m);
  GridOutput out = output_header(p, g);
  if (g.method == "rapid") {
    const auto setup = build_setup(p.model, p.grid, g.L, p.obs.locs);
    out.add_field("prediction", predict_rapid(setup, p.fit.c, p.fit.beta_hat, p.grid_X));
  } else {
    out.add_field("prediction", predict_exact(p.fit, p.grid.interior_locations(), p.grid_X));
  }
  if (with_se) out.add_field("se", kriging_se_exact(p.fit, p.grid.interior_locations(), p.grid_X));
  write_grid(g.out, out);
  return 0;
}

int run_simulate(const GridArgs& g, const ModelArgs& m, int draws, std::uint64_t seed_flag,
                 bool save_draws) {
  const std::uint64_t seed = effective_seed(seed_flag);
  const Prepared p = prepare(g, m);
  const auto setup = build_setup(p.model, p.grid, g.L, p.obs.locs);
  const auto method = g.method == "exact" ? PredictionMethod::exact : PredictionMethod::rapid;
  const auto ens = generate_ensemble(p.fit, setup, p.grid_X, draws, seed, save_draws, method);
  GridOutput out = output_header(p, g);
  out.seed = seed;
  out.meta.emplace_back("rng", Philox4x32::name);
  out.meta.emplace_back("draws", std::to_string(draws));
  out.add_field("mean", ens.mean_field);
  out.add_field("se", ens.empirical_se);
  out.add_field("prediction", ens.prediction);
  for (std::size_t j = 0; j < ens.draws.size(); ++j) {
    std::ostringstream name;
    name << "draw_" << j;
    out.add_field(name.str(), ens.draws[j]);
  }
  write_grid(g.out, out);
  return 0;
}

template <typename F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream f(path);
  if (!f) throw DomainError("cannot open output file '" + path + "'");
  write(f);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Rapid grid Kriging and conditional simulation"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GridArgs pg, sg;
  ModelArgs pm, sm;
  bool with_se = false;
  auto* predict = app.add_subcommand("predict", "Kriging prediction on a regular grid");
  add_grid_options(predict, pg);
  add_model_options(predict, pm);
  predict->add_flag("--se", with_se, "also write exact Kriging standard errors");

  int draws = 100;
  std::uint64_t seed = 0;
  bool save_draws = false;
  auto* simulate = app.add_subcommand("simulate", "Conditional simulation ensemble on a grid");
  add_grid_options(simulate, sg);
  add_model_options(simulate, sm);
  simulate->add_option("--draws", draws, "ensemble size (>= 2)")->capture_default_str();
  simulate->add_option("--seed", seed, "seed (RAPIDKRIG_SEED overrides)")->capture_default_str();
  simulate->add_flag("--save-draws", save_draws, "write every draw as a field");

  StudyConfig ec;
  std::string error_out, effects_out;
  auto* berr = app.add_subcommand("bench-error", "Approximation-error factorial study");
  berr->add_option("--n", ec.n_levels)->delimiter(',')->capture_default_str();
  berr->add_option("--corr-dist", ec.corr_distances, "distances where correlation is 0.7")
      ->delimiter(',')
      ->capture_default_str();
  berr->add_option("--nu", ec.nu_levels)->delimiter(',')->capture_default_str();
  berr->add_option("--tau2", ec.tau2_levels)->delimiter(',')->capture_default_str();
  berr->add_option("--L", ec.L_levels)->delimiter(',')->capture_default_str();
  berr->add_option("--grid", ec.grid_levels, "square grid sizes")->delimiter(',')->capture_default_str();
  berr->add_option("--reps", ec.n_reps)->capture_default_str();
  berr->add_option("--seed", ec.seed)->capture_default_str();
  berr->add_option("--out", error_out, "cell table (default stdout)");
  berr->add_option("--effects", effects_out, "factor-effect table");

  ConvergenceConfig cc;
  std::string conv_out, points_out;
  auto* bconv = app.add_subcommand("bench-converge", "Kernel approximation convergence study");
  bconv->add_option("--nu", cc.nus)->delimiter(',')->capture_default_str();
  bconv->add_option("--L", cc.L)->capture_default_str();
  bconv->add_option("--grid-ladder", cc.grid_ladder)->delimiter(',')->capture_default_str();
  bconv->add_option("--range", cc.range)->capture_default_str();
  bconv->add_option("--restricted-max", cc.restricted_max)->capture_default_str();
  bconv->add_option("--out", conv_out, "slope table (default stdout)");
  bconv->add_option("--points", points_out, "per-grid error table");

  TimingConfig tc;
  std::string time_out;
  auto* btime = app.add_subcommand("bench-time", "Median wall-time study");
  btime->add_option("--n", tc.ns)->delimiter(',')->capture_default_str();
  btime->add_option("--grid-ladder", tc.grid_ladder)->delimiter(',')->capture_default_str();
  btime->add_option("--methods", tc.methods)->delimiter(',')->capture_default_str();
  btime->add_option("--reps", tc.reps)->capture_default_str();
  btime->add_option("--timeout", tc.timeout_s, "seconds per cell")->capture_default_str();
  btime->add_option("--draws", tc.cs_draws, "ensemble size for cs-* methods")->capture_default_str();
  btime->add_option("--seed", tc.seed)->capture_default_str();
  btime->add_option("--out", time_out, "timing table (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*predict) return run_predict(pg, pm, with_se);
    if (*simulate) return run_simulate(sg, sm, draws, seed, save_draws);
    if (*berr) {
      const auto study = run_error_study(ec);
      with_output(error_out, [&](std::ostream& o) { write_error_csv(o, study); });
      if (!effects_out.empty())
        with_output(effects_out, [&](std::ostream& o) { write_effects_csv(o, study); });
      return 0;
    }
    if (*bconv) {
      const auto study = run_convergence_study(cc);
      with_output(conv_out, [&](std::ostream& o) { write_slopes_csv(o, study); });
      if (!points_out.empty())
        with_output(points_out, [&](std::ostream& o) { write_convergence_csv(o, study); });
      return 0;
    }
    if (*btime) {
      const auto cells = run_timing(tc);
      with_output(time_out, [&](std::ostream& o) { write_timing_csv(o, cells); });
      return 0;
    }
  } catch (const DomainError& e) {
    std::cerr << "rapidkrig: error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "rapidkrig: numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rapidkrig: numeric error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return cli_main(static_cast<int>(copy.size()), argv.data());
}

}  // namespace rapidkrig::bench
