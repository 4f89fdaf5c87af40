#include "routebench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "routebench/rng.hpp"

namespace routebench::stats {

namespace {

// Lentz's algorithm for the incomplete beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIterations = 500;
  constexpr double kEpsilon = 1e-15;
  constexpr double kTiny = 1e-300;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double result = d;

  for (int m = 1; m <= kMaxIterations; ++m) {
    double m2 = 2.0 * m;
    double numerator = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + numerator * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + numerator / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    result *= d * c;

    numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + numerator * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + numerator / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double delta = d * c;
    result *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) return result;
  }
  throw std::runtime_error("incomplete beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("incomplete beta: a and b must be positive");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument("incomplete beta: x out of [0,1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_upper_tail(double F, double df1, double df2) {
  if (!(F >= 0.0)) throw std::invalid_argument("f_upper_tail: F must be >= 0");
  if (!(df1 > 0.0) || !(df2 > 0.0)) {
    throw std::invalid_argument("f_upper_tail: degrees of freedom must be positive");
  }
  if (F == 0.0) return 1.0;
  double x = df2 / (df2 + df1 * F);
  return regularized_incomplete_beta(x, df2 / 2.0, df1 / 2.0);
}

std::string_view to_string(Term term) {
  switch (term) {
    case Term::backend: return "backend";
    case Term::mode: return "mode";
    case Term::constraint: return "constraint";
    case Term::transport: return "transport";
    case Term::backend_mode: return "backend:mode";
  }
  return "backend";
}

int term_df(Term term, const FactorLevels& levels) {
  int nb = static_cast<int>(levels.backend.size()) - 1;
  int nm = static_cast<int>(levels.mode.size()) - 1;
  switch (term) {
    case Term::backend: return nb;
    case Term::mode: return nm;
    case Term::constraint: return static_cast<int>(levels.constraint.size()) - 1;
    case Term::transport: return static_cast<int>(levels.transport.size()) - 1;
    case Term::backend_mode: return nb * nm;
  }
  return 0;
}

Eigen::MatrixXd build_model_matrix(const Design& design, std::span<const Term> terms) {
  const std::size_t n = design.rows.size();
  int columns = 1;
  for (Term term : terms) columns += term_df(term, design.levels);

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), columns);
  X.col(0).setOnes();

  int offset = 1;
  for (Term term : terms) {
    int df = term_df(term, design.levels);
    for (std::size_t i = 0; i < n; ++i) {
      const DesignRow& row = design.rows[i];
      switch (term) {
        case Term::backend:
          if (row.backend > 0) X(static_cast<Eigen::Index>(i), offset + row.backend - 1) = 1.0;
          break;
        case Term::mode:
          if (row.mode > 0) X(static_cast<Eigen::Index>(i), offset + row.mode - 1) = 1.0;
          break;
        case Term::constraint:
          if (row.constraint > 0) {
            X(static_cast<Eigen::Index>(i), offset + row.constraint - 1) = 1.0;
          }
          break;
        case Term::transport:
          if (row.transport > 0) X(static_cast<Eigen::Index>(i), offset + row.transport - 1) = 1.0;
          break;
        case Term::backend_mode:
          if (row.backend > 0 && row.mode > 0) {
            int nm = static_cast<int>(design.levels.mode.size()) - 1;
            int column = (row.backend - 1) * nm + (row.mode - 1);
            X(static_cast<Eigen::Index>(i), offset + column) = 1.0;
          }
          break;
      }
    }
    offset += df;
  }
  return X;
}

OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& X,
               const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_ols: dimension mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    std::string offenders;
    // pivots beyond the rank name the dependent columns
    const auto& permutation = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < X.cols(); ++i) {
      if (!offenders.empty()) offenders += ", ";
      offenders += std::to_string(permutation[i]);
    }
    throw std::runtime_error("fit_ols: rank-deficient design, dependent columns: " + offenders);
  }

  OlsFit fit;
  fit.coefficients = qr.solve(y);
  fit.rank = static_cast<int>(qr.rank());
  fit.rss = (y - X * fit.coefficients).squaredNorm();
  return fit;
}

namespace {

double rss_for_terms(const Design& design, const Eigen::Ref<const Eigen::VectorXd>& response,
                     std::span<const Term> terms) {
  Eigen::MatrixXd X = build_model_matrix(design, terms);
  return fit_ols(X, response).rss;
}

}  // namespace

std::vector<AnovaRow> anova_type2(const Design& design,
                                  const Eigen::Ref<const Eigen::VectorXd>& response) {
  if (design.rows.size() != static_cast<std::size_t>(response.size())) {
    throw std::invalid_argument("anova_type2: dimension mismatch");
  }

  const std::vector<Term> full(kModelTerms.begin(), kModelTerms.end());
  Eigen::MatrixXd X_full = build_model_matrix(design, full);
  OlsFit full_fit = fit_ols(X_full, response);
  const double rss_full = full_fit.rss;
  const int df_resid = static_cast<int>(design.rows.size()) - static_cast<int>(X_full.cols());
  if (df_resid <= 0) throw std::runtime_error("anova_type2: no residual degrees of freedom");

  // total SS for the degenerate constant-response guard
  double mean = response.mean();
  double ss_total = (response.array() - mean).square().sum();
  const double zero_guard = std::max(1e-12, 1e-12 * ss_total);

  // marginality: main effects of backend/mode are tested without the
  // interaction; constraint and transport keep it
  const std::vector<Term> additive = {Term::backend, Term::mode, Term::constraint,
                                      Term::transport};
  auto without = [](std::span<const Term> terms, Term drop) {
    std::vector<Term> kept;
    for (Term t : terms) {
      if (t != drop) kept.push_back(t);
    }
    return kept;
  };

  std::vector<AnovaRow> table;
  for (Term term : kModelTerms) {
    std::vector<Term> with_term;
    std::vector<Term> without_term;
    switch (term) {
      case Term::backend:
      case Term::mode:
        with_term = additive;
        without_term = without(additive, term);
        break;
      case Term::constraint:
      case Term::transport:
      case Term::backend_mode:
        with_term = full;
        without_term = without(full, term);
        break;
    }

    double ss = rss_for_terms(design, response, without_term) -
                rss_for_terms(design, response, with_term);
    if (ss < 0.0 && ss > -zero_guard) ss = 0.0;  // numerical noise

    AnovaRow row;
    row.term = std::string(to_string(term));
    row.df = term_df(term, design.levels);
    row.sum_sq = ss;

    if (ss_total < 1e-12 || (ss <= zero_guard && rss_full <= zero_guard)) {
      row.F = 0.0;
      row.p = 1.0;
      row.partial_eta_sq = 0.0;
    } else {
      double ms_term = ss / row.df;
      double ms_resid = rss_full / df_resid;
      row.F = ms_resid > 0.0 ? ms_term / ms_resid
                             : (ms_term > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      row.p = std::isfinite(row.F) ? f_upper_tail(std::max(0.0, row.F), row.df, df_resid) : 0.0;
      row.partial_eta_sq = (ss + rss_full) > 0.0 ? ss / (ss + rss_full) : 0.0;
    }
    table.push_back(std::move(row));
  }
  return table;
}

BootstrapInterval bootstrap_mean_interval(std::span<const double> values, int resamples,
                                          std::uint64_t seed, std::string_view label) {
  if (values.empty()) throw std::invalid_argument("bootstrap: empty sample");
  rng::Stream stream(seed, label);
  const std::uint64_t n = values.size();

  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double sum = 0.0;
    for (std::uint64_t j = 0; j < n; ++j) {
      sum += values[stream.below(static_cast<std::uint64_t>(r) * n + j, n)];
    }
    means.push_back(sum / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());

  auto quantile = [&](double q) {
    double h = (static_cast<double>(means.size()) - 1.0) * q;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    if (lo == hi) return means[lo];
    return means[lo] + (h - lo) * (means[hi] - means[lo]);
  };
  return BootstrapInterval{quantile(0.025), quantile(0.975)};
}

ContrastRow bootstrap_contrast(std::span<const double> cell_a, std::span<const double> cell_b,
                               int resamples, std::uint64_t seed, std::string backend,
                               std::string pair, std::string metric) {
  if (cell_a.empty() || cell_b.empty()) {
    throw std::invalid_argument("bootstrap_contrast: empty cell");
  }
  if (cell_a.size() != cell_b.size()) {
    throw std::invalid_argument("bootstrap_contrast: cells must be equal length");
  }

  auto mean_of = [](std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };

  ContrastRow row;
  row.backend = std::move(backend);
  row.pair = std::move(pair);
  row.metric = std::move(metric);
  row.delta = mean_of(cell_a) - mean_of(cell_b);

  std::string label = row.backend + "|" + row.pair + "|" + row.metric;
  rng::Stream stream_a(seed, label + "|a");
  rng::Stream stream_b(seed, label + "|b");
  const std::uint64_t n = cell_a.size();

  std::vector<double> deltas;
  deltas.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::uint64_t j = 0; j < n; ++j) {
      std::uint64_t counter = static_cast<std::uint64_t>(r) * n + j;
      sum_a += cell_a[stream_a.below(counter, n)];
      sum_b += cell_b[stream_b.below(counter, n)];
    }
    deltas.push_back((sum_a - sum_b) / static_cast<double>(n));
  }
  std::sort(deltas.begin(), deltas.end());

  auto quantile = [&](double q) {
    double h = (static_cast<double>(deltas.size()) - 1.0) * q;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    if (lo == hi) return deltas[lo];
    return deltas[lo] + (h - lo) * (deltas[hi] - deltas[lo]);
  };
  row.ci_low = quantile(0.025);
  row.ci_high = quantile(0.975);
  return row;
}

}  // namespace routebench::stats
