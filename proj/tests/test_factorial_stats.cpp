#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "routebench/rng.hpp"
#include "routebench/stats.hpp"

using namespace routebench;

namespace {

// default 48-row balanced design: 3 backends x 4 modes x 2 x 2
stats::Design default_design() {
  stats::Design design;
  design.levels.backend = {"gemini", "llama", "openai"};
  design.levels.mode = {"MJ", "SJ", "MJS", "MCLR"};
  design.levels.constraint = {"limited", "unlimited"};
  design.levels.transport = {"non_stream", "stream"};
  for (int m = 0; m < 4; ++m) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 2; ++c) {
        for (int t = 0; t < 2; ++t) {
          design.rows.push_back({b, m, c, t});
        }
      }
    }
  }
  return design;
}

// adaptive Simpson quadrature, the independent oracle for the analytic
// beta tail
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double tolerance, int depth) {
  double m = (a + b) / 2.0;
  double lm = (a + m) / 2.0;
  double rm = (m + b) / 2.0;
  double flm = f(lm);
  double frm = f(rm);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tolerance) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson(f, a, m, fa, flm, fm, tolerance / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, tolerance / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tolerance) {
  double m = (a + b) / 2.0;
  return simpson(f, a, b, f(a), f(m), f(b), tolerance, 48);
}

// I_x(a,b) by numerical integration of the beta density; endpoint
// singularities handled by a binomial-series evaluation on [0, eps]
double reference_incomplete_beta(double x, double a, double b) {
  if (x > (a + 1.0) / (a + b + 2.0)) {
    return 1.0 - reference_incomplete_beta(1.0 - x, b, a);
  }
  double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double eps = std::min(1e-3, x / 2.0);

  // series: integral_0^eps t^(a-1)(1-t)^(b-1) dt
  //       = sum_k C(b-1,k)(-1)^k eps^(a+k)/(a+k)
  double series = 0.0;
  double coefficient = 1.0;  // C(b-1, k) * (-1)^k
  for (int k = 0; k < 60; ++k) {
    series += coefficient * std::pow(eps, a + k) / (a + k);
    coefficient *= -(b - 1.0 - k) / (k + 1.0);
    if (std::abs(coefficient) < 1e-300) break;
  }

  auto density = [&](double t) {
    return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t));
  };
  double tail = x > eps ? integrate(density, eps, x, 1e-13) : 0.0;
  return (series + tail) / std::exp(log_beta);
}

double reference_f_upper_tail(double F, double df1, double df2) {
  return reference_incomplete_beta(df2 / (df2 + df1 * F), df2 / 2.0, df1 / 2.0);
}

Eigen::VectorXd random_response(std::uint64_t seed, int n) {
  rng::Stream stream(seed, "response");
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = 10.0 * stream.normal(static_cast<std::uint64_t>(i));
  return y;
}

// Type-I (sequential) sums of squares in model order; the oracle for
// the balanced-design equivalence
std::vector<double> sequential_type1(const stats::Design& design, const Eigen::VectorXd& y) {
  using stats::Term;
  std::vector<Term> order = {Term::backend, Term::mode, Term::constraint, Term::transport,
                             Term::backend_mode};
  std::vector<double> ss;
  std::vector<Term> current;
  double previous = stats::fit_ols(stats::build_model_matrix(design, current), y).rss;
  for (Term term : order) {
    current.push_back(term);
    double next = stats::fit_ols(stats::build_model_matrix(design, current), y).rss;
    ss.push_back(previous - next);
    previous = next;
  }
  return ss;
}

}  // namespace

TEST_CASE("f_upper_tail endpoints and symmetry") {
  CHECK(stats::f_upper_tail(0.0, 3, 34) == doctest::Approx(1.0));
  // F(1,1) puts half its mass on either side of 1
  CHECK(stats::f_upper_tail(1.0, 1, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_THROWS_AS(stats::f_upper_tail(-1.0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(stats::f_upper_tail(1.0, 0, 1), std::invalid_argument);
}

TEST_CASE("f_upper_tail matches frozen reference evaluations") {
  // values computed with an independent statistics library (scipy
  // 1.x, f.sf) and frozen here
  CHECK(stats::f_upper_tail(4.0, 2, 34) == doctest::Approx(0.02753617752985741).epsilon(1e-10));
  CHECK(stats::f_upper_tail(2.5, 3, 34) == doctest::Approx(0.07601982196832074).epsilon(1e-10));
  CHECK(stats::f_upper_tail(0.01, 1, 34) == doctest::Approx(0.9209316559506086).epsilon(1e-10));
  CHECK(stats::f_upper_tail(7.11, 1, 34) == doctest::Approx(0.011648802042499929).epsilon(1e-10));
  CHECK(stats::f_upper_tail(136.52, 6, 34) == doctest::Approx(2.5564843042812418e-22).epsilon(1e-8));
}

TEST_CASE("f_upper_tail agrees with direct numerical integration") {
  for (double df1 : {1.0, 2.0, 3.0, 6.0}) {
    for (double df2 : {1.0, 4.0, 34.0}) {
      for (double F : {0.1, 0.5, 1.0, 2.0, 4.0, 10.0}) {
        double mine = stats::f_upper_tail(F, df1, df2);
        double reference = reference_f_upper_tail(F, df1, df2);
        CHECK(std::abs(mine - reference) < 1e-8);
      }
    }
  }
}

TEST_CASE("fit_ols basics") {
  SUBCASE("intercept-only model is the mean") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    auto fit = stats::fit_ols(X, y);
    CHECK(fit.coefficients[0] == doctest::Approx(2.0));
    CHECK(fit.rss == doctest::Approx(2.0));
  }
  SUBCASE("exact-fit data has zero residual") {
    stats::Design design = default_design();
    Eigen::MatrixXd X =
        stats::build_model_matrix(design, std::vector<stats::Term>{stats::Term::backend});
    Eigen::VectorXd beta(3);
    beta << 5.0, -2.0, 3.0;
    Eigen::VectorXd y = X * beta;
    auto fit = stats::fit_ols(X, y);
    CHECK(fit.rss == doctest::Approx(0.0).epsilon(1e-10));
    CHECK((fit.coefficients - beta).norm() < 1e-10);
  }
  SUBCASE("rank deficiency reports the offending columns") {
    Eigen::MatrixXd X(4, 3);
    X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;  // third column = 2x second
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    CHECK_THROWS_WITH_AS(stats::fit_ols(X, y), doctest::Contains("rank-deficient"),
                         std::runtime_error);
  }
}

TEST_CASE("OLS matches the brute-force normal-equations oracle") {
  stats::Design design = default_design();
  Eigen::MatrixXd X = stats::build_model_matrix(
      design, std::vector<stats::Term>(stats::kModelTerms.begin(), stats::kModelTerms.end()));
  REQUIRE(X.cols() == 14);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd y = random_response(trial, 48);
    auto fit = stats::fit_ols(X, y);
    Eigen::VectorXd oracle = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((fit.coefficients - oracle).lpNorm<Eigen::Infinity>() < 1e-8);
    double oracle_rss = (y - X * oracle).squaredNorm();
    CHECK(fit.rss == doctest::Approx(oracle_rss).epsilon(1e-10));
  }
}

TEST_CASE("balanced design: Type-II equals sequential Type-I per term") {
  stats::Design design = default_design();
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd y = random_response(1000 + trial, 48);
    auto table = stats::anova_type2(design, y);
    auto type1 = sequential_type1(design, y);
    REQUIRE(table.size() == 5);
    for (std::size_t i = 0; i < table.size(); ++i) {
      CHECK(std::abs(table[i].sum_sq - type1[i]) < 1e-8);
    }
  }
}

TEST_CASE("constant response collapses every effect") {
  stats::Design design = default_design();
  Eigen::VectorXd y = Eigen::VectorXd::Constant(48, 7.5);
  auto table = stats::anova_type2(design, y);
  for (const auto& row : table) {
    CHECK(row.F == 0.0);
    CHECK(row.p == 1.0);
    CHECK(row.partial_eta_sq == 0.0);
  }
}

TEST_CASE("synthetic pure-backend effect is attributed to backend") {
  stats::Design design = default_design();
  rng::Stream noise(5, "tiny-noise");
  Eigen::VectorXd y(48);
  for (int i = 0; i < 48; ++i) {
    double backend_effect = design.rows[i].backend * 25.0;
    y[i] = 10.0 + backend_effect + 1e-4 * noise.normal(static_cast<std::uint64_t>(i));
  }
  auto table = stats::anova_type2(design, y);
  for (const auto& row : table) {
    if (row.term == "backend") {
      CHECK(row.partial_eta_sq > 0.99);
      CHECK(row.p < 1e-10);
    } else {
      CHECK(row.partial_eta_sq < 0.2);
    }
  }
}

TEST_CASE("scale equivariance: c*y scales SS by c^2 and leaves F, p, eta unchanged") {
  stats::Design design = default_design();
  Eigen::VectorXd y = random_response(2024, 48);
  auto base = stats::anova_type2(design, y);
  auto scaled = stats::anova_type2(design, (y.array() * 3.0).matrix());
  REQUIRE(base.size() == scaled.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(scaled[i].sum_sq == doctest::Approx(9.0 * base[i].sum_sq).epsilon(1e-9));
    CHECK(scaled[i].F == doctest::Approx(base[i].F).epsilon(1e-9));
    CHECK(scaled[i].p == doctest::Approx(base[i].p).epsilon(1e-7));
    CHECK(scaled[i].partial_eta_sq == doctest::Approx(base[i].partial_eta_sq).epsilon(1e-9));
  }
}

TEST_CASE("partial eta squared stays in [0,1], 1 only on exact fit") {
  stats::Design design = default_design();
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd y = random_response(300 + trial, 48);
    for (const auto& row : stats::anova_type2(design, y)) {
      CHECK(row.partial_eta_sq >= 0.0);
      CHECK(row.partial_eta_sq <= 1.0);
      CHECK(row.p >= 0.0);
      CHECK(row.p <= 1.0);
    }
  }
}

TEST_CASE("bootstrap contrasts: degenerate cells collapse to the point estimate") {
  std::vector<double> mclr(4, 62.96);
  std::vector<double> mj(4, 86.11);
  auto row = stats::bootstrap_contrast(mclr, mj, 10000, 42, "gemini", "MCLR vs MJ", "ra_pct");
  CHECK(row.delta == doctest::Approx(-23.15));
  CHECK(row.ci_low == doctest::Approx(-23.15));
  CHECK(row.ci_high == doctest::Approx(-23.15));
}

TEST_CASE("bootstrap contrast of identical cells contains zero") {
  std::vector<double> a{10, 12, 14, 16};
  auto row = stats::bootstrap_contrast(a, a, 5000, 7, "b", "A vs A", "x");
  CHECK(row.delta == doctest::Approx(0.0));
  CHECK(row.ci_low <= 0.0);
  CHECK(row.ci_high >= 0.0);
  CHECK(row.ci_low <= row.delta);
  CHECK(row.delta <= row.ci_high);
}

TEST_CASE("bootstrap determinism: fixed seed, identical interval") {
  std::vector<double> a{1, 2, 3, 4};
  std::vector<double> b{2, 4, 6, 8};
  auto first = stats::bootstrap_contrast(a, b, 2000, 99, "b", "A vs B", "x");
  auto second = stats::bootstrap_contrast(a, b, 2000, 99, "b", "A vs B", "x");
  CHECK(first.ci_low == second.ci_low);
  CHECK(first.ci_high == second.ci_high);
  auto other_seed = stats::bootstrap_contrast(a, b, 2000, 100, "b", "A vs B", "x");
  CHECK((other_seed.ci_low != first.ci_low || other_seed.ci_high != first.ci_high));
}
