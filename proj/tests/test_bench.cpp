#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rapidkrig/bench/cli.hpp"
#include "rapidkrig/bench/io.hpp"
#include "rapidkrig/bench/studies.hpp"
#include "rapidkrig/errors.hpp"

using namespace rapidkrig;
using namespace rapidkrig::bench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rapidkrig_test_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_obs(const std::string& path, int n, std::uint64_t seed, double x0 = 0, double x1 = 1,
               double y0 = 0, double y1 = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  std::normal_distribution<double> nd;
  std::ofstream out(path);
  out.precision(17);
  out << "x,y,z\n";
  for (int i = 0; i < n; ++i) out << ux(rng) << ',' << uy(rng) << ',' << nd(rng) << '\n';
}

Observations parse(const std::string& text) {
  std::istringstream in(text);
  return read_observations(in, "test");
}

}  // namespace

TEST_CASE("observation files") {
  SUBCASE("three rows") {
    const auto o = parse("x,y,z\n0,0,1\n1,0.5,2\n0.25,1,3\n");
    CHECK(o.size() == 3);
    CHECK(o.z(2) == 3.0);
    CHECK(o.bbox.xmax == 1.0);
    CHECK(o.bbox.ymin == 0.0);
    CHECK(o.extra.cols() == 0);
  }
  SUBCASE("whitespace delimited with covariate columns in any order") {
    const auto o = parse("z  elev x y\n1.5 100 0.1 0.2\n\n2.5 200 0.3 0.4\n");
    CHECK(o.size() == 2);
    CHECK(o.locs(1, 0) == 0.3);
    CHECK(o.z(0) == 1.5);
    REQUIRE(o.extra_names.size() == 1);
    CHECK(o.extra_names[0] == "elev");
    CHECK(o.extra(1, 0) == 200.0);
  }
  SUBCASE("missing column is named") {
    try {
      parse("x,y,w\n0,0,1\n");
      FAIL("expected an error");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("'z'") != std::string::npos);
    }
  }
  SUBCASE("non-numeric cell") {
    try {
      parse("x,y,z\n0,0,1\n0.5,abc,2\n");
      FAIL("expected an error");
    } catch (const DomainError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("abc") != std::string::npos);
      CHECK(msg.find(":3:") != std::string::npos);
    }
  }
  SUBCASE("ragged row") { CHECK_THROWS_AS(parse("x,y,z\n0,0\n"), DomainError); }
  SUBCASE("no rows") { CHECK_THROWS_AS(parse("x,y,z\n"), DomainError); }
  SUBCASE("duplicate locations are kept") {
    const auto o = parse("x,y,z\n0.5,0.5,1\n0.1,0.1,2\n0.5,0.5,3\n");
    CHECK(o.size() == 3);
    CHECK(o.duplicates == 1);
  }
  SUBCASE("rainfall-sized subset") {
    TempDir dir;
    write_obs(dir.file("rain.csv"), 1368, 3, -105, -92, 27, 55);
    const auto o = load_observations(dir.file("rain.csv"));
    CHECK(o.size() == 1368);
    CHECK(o.bbox.xmin >= -105);
    CHECK(o.bbox.xmax <= -92);
    CHECK(o.bbox.ymin >= 27);
    CHECK(o.bbox.ymax <= 55);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_observations("/nonexistent/obs.csv"), DomainError); }
}

TEST_CASE("covariate formulas") {
  const auto t = parse_covariates("1 + x + y + x*y");
  REQUIRE(t.size() == 4);
  CHECK(format_covariates(t) == "1+x+y+x*y");
  Locations<double> l(2, 2);
  l << 2, 3, -1, 4;
  const auto X = design_matrix(t, l);
  CHECK(X(0, 0) == 1);
  CHECK(X(0, 3) == 6);
  CHECK(X(1, 1) == -1);
  CHECK(X(1, 3) == -4);
  CHECK_THROWS_AS(parse_covariates("1+z"), DomainError);
  CHECK_THROWS_AS(parse_covariates("1+x+x"), DomainError);
  CHECK_THROWS_AS(parse_covariates(""), DomainError);
  CHECK_THROWS_AS(parse_covariates("1+"), DomainError);
}

TEST_CASE("grid output round trip is bitwise") {
  GridOutput g;
  g.m1 = 3;
  g.m2 = 2;
  g.x0 = -105.125;
  g.y0 = 27.1;
  g.hx = 0.1 / 3;
  g.hy = 1e-300;
  g.model = {2.43, 1.0 / 1.21, 1.5, 0.47};
  g.seed = 18446744073709551615ull;
  g.meta.emplace_back("method", "rapid");
  Eigen::VectorXd a(6), b(6);
  a << 0.1, -0.0, std::numeric_limits<double>::denorm_min(), 1e308, -3.5,
      std::numeric_limits<double>::quiet_NaN();
  b << 1, 2, 3, 4, 5, std::numeric_limits<double>::infinity();
  g.add_field("mean", a);
  g.add_field("se", b);

  std::stringstream buf;
  write_grid(buf, g);
  const std::string bytes = buf.str();
  CHECK(bytes.rfind("RKGRID1\n", 0) == 0);
  CHECK(bytes.size() == bytes.find("\n\n") + 2 + 2 * 6 * 8);
  // Least-significant byte first: 1.0 is 0x3FF0000000000000.
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 6 * 8 + 7]) == 0x3F);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 6 * 8 + 6]) == 0xF0);

  const auto r = read_grid(buf);
  CHECK(r.m1 == 3);
  CHECK(r.m2 == 2);
  CHECK(r.x0 == g.x0);
  CHECK(r.hx == g.hx);
  CHECK(r.hy == g.hy);
  CHECK(r.model.alpha == g.model.alpha);
  CHECK(r.seed == g.seed);
  CHECK(r.meta_value("method") == "rapid");
  REQUIRE(r.field_names == g.field_names);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(std::memcmp(r.fields[k].data(), g.fields[k].data(), 6 * sizeof(double)) == 0);
}

TEST_CASE("grid output errors") {
  GridOutput g;
  g.m1 = g.m2 = 2;
  CHECK_THROWS_AS(g.add_field("x", Eigen::VectorXd::Zero(3)), DomainError);
  g.add_field("x", Eigen::VectorXd::Zero(4));
  std::stringstream buf;
  write_grid(buf, g);
  const std::string ok = buf.str();
  std::stringstream truncated(ok.substr(0, ok.size() - 1));
  CHECK_THROWS_AS(read_grid(truncated), DomainError);
  std::stringstream trailing(ok + "x");
  CHECK_THROWS_AS(read_grid(trailing), DomainError);
  std::stringstream wrong("RKGRID2\n\n");
  CHECK_THROWS_AS(read_grid(wrong), DomainError);
}

TEST_CASE("cli predict and simulate") {
  TempDir dir;
  const auto obs = dir.file("obs.csv");
  write_obs(obs, 80, 5);
  const std::vector<std::string> model{"--sigma2", "1", "--range", "0.2", "--nu", "1.5", "--tau2", "0.1"};
  auto args = [&](std::vector<std::string> head) {
    head.insert(head.end(), model.begin(), model.end());
    return head;
  };

  SUBCASE("rapid and exact predictions agree closely") {
    const auto base = args({"rapidkrig", "predict", "--obs", obs, "--grid", "40x30", "--domain",
                            "0,1,0,1", "--covariates", "1+x"});
    auto rapid = base, exact = base;
    rapid.insert(rapid.end(), {"--out", dir.file("r.rkg"), "--method", "rapid", "--L", "4"});
    exact.insert(exact.end(), {"--out", dir.file("e.rkg"), "--method", "exact", "--se"});
    REQUIRE(cli_main(rapid) == 0);
    REQUIRE(cli_main(exact) == 0);
    const auto r = read_grid(dir.file("r.rkg"));
    const auto e = read_grid(dir.file("e.rkg"));
    CHECK(r.m1 == 40);
    CHECK(r.m2 == 30);
    CHECK(r.meta_value("covariates") == "1+x");
    CHECK(e.field("se").minCoeff() >= 0);
    CHECK((r.field("prediction") - e.field("prediction")).cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("simulate is deterministic and honors RAPIDKRIG_SEED") {
    auto sim = [&](const std::string& out, const std::string& seed) {
      return args({"rapidkrig", "simulate", "--obs", obs, "--out", out, "--grid", "24x24",
                   "--draws", "5", "--seed", seed, "--save-draws"});
    };
    ::unsetenv("RAPIDKRIG_SEED");
    REQUIRE(cli_main(sim(dir.file("a.rkg"), "7")) == 0);
    REQUIRE(cli_main(sim(dir.file("b.rkg"), "7")) == 0);
    REQUIRE(cli_main(sim(dir.file("c.rkg"), "8")) == 0);
    CHECK(slurp(dir.file("a.rkg")) == slurp(dir.file("b.rkg")));
    CHECK(slurp(dir.file("a.rkg")) != slurp(dir.file("c.rkg")));
    const auto a = read_grid(dir.file("a.rkg"));
    CHECK(a.seed == 7u);
    CHECK(a.meta_value("rng") == "philox4x32-10");
    CHECK(a.fields.size() == 3 + 5);

    ::setenv("RAPIDKRIG_SEED", "8", 1);
    REQUIRE(cli_main(sim(dir.file("d.rkg"), "7")) == 0);
    ::setenv("RAPIDKRIG_SEED", "not-a-number", 1);
    CHECK(cli_main(sim(dir.file("e.rkg"), "7")) == 1);
    ::unsetenv("RAPIDKRIG_SEED");
    CHECK(slurp(dir.file("d.rkg")) == slurp(dir.file("c.rkg")));
  }
  SUBCASE("exit codes") {
    CHECK(cli_main(args({"rapidkrig", "predict", "--obs", obs, "--out", dir.file("x.rkg"), "--bogus"})) == 1);
    CHECK(cli_main(std::vector<std::string>{"rapidkrig"}) == 1);
    CHECK(cli_main(std::vector<std::string>{"rapidkrig", "--help"}) == 0);
    CHECK(cli_main(args({"rapidkrig", "predict", "--obs", dir.file("missing.csv"), "--out",
                         dir.file("x.rkg")})) == 1);
    CHECK(cli_main(args({"rapidkrig", "predict", "--obs", obs, "--out", dir.file("x.rkg"), "--grid",
                         "40by40"})) == 1);
    CHECK(cli_main(args({"rapidkrig", "predict", "--obs", obs, "--out", dir.file("x.rkg"),
                         "--domain", "0.5,1,0,1"})) == 1);
    // A correlation range far beyond the grid defeats the circulant embedding.
    CHECK(cli_main({"rapidkrig", "simulate", "--obs", obs, "--out", dir.file("x.rkg"), "--grid",
                    "8x8", "--domain", "0,1,0,1", "--L", "1", "--sigma2", "1", "--alpha", "0.05",
                    "--nu", "2.5", "--tau2", "0.1", "--draws", "2"}) == 2);
  }
}

TEST_CASE("cli bench tables") {
  TempDir dir;
  REQUIRE(cli_main({"rapidkrig", "bench-converge", "--nu", "0.5", "--grid-ladder", "20,30,40",
                    "--out", dir.file("slopes.csv"), "--points", dir.file("points.csv")}) == 0);
  const auto slopes = slurp(dir.file("slopes.csv"));
  CHECK(slopes.rfind("nu,kappa_theory,slope", 0) == 0);
  CHECK(std::count(slopes.begin(), slopes.end(), '\n') == 2);
  const auto points = slurp(dir.file("points.csv"));
  CHECK(std::count(points.begin(), points.end(), '\n') == 4);

  REQUIRE(cli_main({"rapidkrig", "bench-error", "--n", "30", "--corr-dist", "0.2", "--nu", "0.5",
                    "--tau2", "0.1", "--L", "2", "--grid", "20", "--reps", "2", "--out",
                    dir.file("err.csv"), "--effects", dir.file("eff.csv")}) == 0);
  CHECK(slurp(dir.file("err.csv")).find("30,0.2,0.5,0.1,2,20,") != std::string::npos);

  REQUIRE(cli_main({"rapidkrig", "bench-time", "--n", "50", "--grid-ladder", "20,24", "--methods",
                    "exact,rapid-L2,cs-fast", "--reps", "3", "--draws", "2", "--out",
                    dir.file("time.csv")}) == 0);
  const auto timing = slurp(dir.file("time.csv"));
  CHECK(std::count(timing.begin(), timing.end(), '\n') == 1 + 3 * 2);
  CHECK(cli_main({"rapidkrig", "bench-time", "--methods", "vecchia"}) == 1);
  CHECK(cli_main({"rapidkrig", "bench-time", "--reps", "2"}) == 1);
}

TEST_CASE("least-squares slope") {
  CHECK(ls_slope({0, 1, 2, 3}, {1, 3, 5, 7}) == doctest::Approx(2.0));
  CHECK(std::isnan(ls_slope({1}, {1})));
}

TEST_CASE("convergence study excludes values under the floor") {
  ConvergenceConfig c;
  c.nus = {1.5};
  c.grid_ladder = {20, 40, 80};
  c.floor = 1e-4;
  const auto s = run_convergence_study(c);
  REQUIRE(s.slopes.size() == 1);
  CHECK(s.slopes[0].excluded > 0);
  CHECK(s.slopes[0].points + s.slopes[0].excluded == 3);
  for (const auto& p : s.points) CHECK(p.excluded == (p.lambda < 1e-4));
  c.grid_ladder = {40, 20};
  CHECK_THROWS_AS(run_convergence_study(c), DomainError);
}

TEST_CASE("timing censors cells over the budget") {
  TimingConfig c;
  c.ns = {40};
  c.grid_ladder = {20, 30, 40};
  c.methods = {"exact"};
  c.timeout_s = 1e-12;
  const auto cells = run_timing(c);
  REQUIRE(cells.size() == 3);
  for (const auto& cell : cells) CHECK(cell.censored);
  CHECK(cells[0].reps == 1);
  CHECK(cells[2].reps == 0);
}

TEST_CASE("study config validation") {
  StudyConfig c;
  c.n_reps = 0;
  CHECK_THROWS_AS(run_error_study(c), DomainError);
  c = StudyConfig{};
  c.grid_levels = {6};
  c.L_levels = {4};
  CHECK_THROWS_AS(run_error_study(c), DomainError);
  c = StudyConfig{};
  c.eval_points.row(0) << 1.5, 0.5;
  CHECK_THROWS_AS(run_error_study(c), DomainError);
}

TEST_CASE("error-study factor directions on the default factorial") {
  const auto study = run_error_study(StudyConfig{});
  for (const auto& c : study.cells) CHECK(c.error.empty());
  int checked = 0;
  for (const auto& e : study.effects) {
    if (e.factor == "nu" || e.factor == "L" || e.factor == "grid" || e.factor == "tau2") {
      CAPTURE(e.factor);
      CAPTURE(e.from);
      CHECK(e.mean_delta <= e.se);
      ++checked;
    }
  }
  CHECK(checked == 5);
}
