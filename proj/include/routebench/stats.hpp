#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace routebench::stats {

// ---- special functions ----

// Regularized incomplete beta I_x(a,b) via the Lentz continued
// fraction, absolute error well under 1e-10 for moderate a, b.
double regularized_incomplete_beta(double x, double a, double b);

// Upper tail of the F(df1, df2) distribution:
// p = I_{df2/(df2+df1 F)}(df2/2, df1/2). F must be >= 0 and the
// degrees of freedom positive.
double f_upper_tail(double F, double df1, double df2);

// ---- factorial design ----

// Level indices into the declared factor orders (treatment coding,
// first level is the reference).
struct DesignRow {
  int backend = 0;
  int mode = 0;
  int constraint = 0;
  int transport = 0;
};

struct FactorLevels {
  std::vector<std::string> backend;
  std::vector<std::string> mode;
  std::vector<std::string> constraint;
  std::vector<std::string> transport;
};

enum class Term { backend, mode, constraint, transport, backend_mode };

std::string_view to_string(Term term);
int term_df(Term term, const FactorLevels& levels);

struct Design {
  FactorLevels levels;
  std::vector<DesignRow> rows;
};

// Model matrix with an intercept plus treatment-coded columns for the
// given terms, in term order.
Eigen::MatrixXd build_model_matrix(const Design& design, std::span<const Term> terms);

struct OlsFit {
  Eigen::VectorXd coefficients;
  double rss = 0.0;
  int rank = 0;
};

// Least squares through a column-pivoted Householder QR. Throws
// std::runtime_error naming the offending columns when the matrix is
// rank deficient. Ref parameters bind matrix expressions and blocks
// without copies.
OlsFit fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& X,
               const Eigen::Ref<const Eigen::VectorXd>& y);

struct AnovaRow {
  std::string term;
  double sum_sq = 0.0;
  int df = 0;
  double F = 0.0;
  double p = 1.0;
  double partial_eta_sq = 0.0;
};

// Type-II sums of squares by model comparison for
// y ~ backend * mode + constraint + transport. Marginality is
// respected: the backend and mode main-effect reductions exclude the
// interaction, while constraint/transport are tested against the model
// retaining it. F uses the full-model residual mean square; p comes
// from f_upper_tail; partial eta squared is ss/(ss+rss_full).
std::vector<AnovaRow> anova_type2(const Design& design,
                                  const Eigen::Ref<const Eigen::VectorXd>& response);

inline constexpr std::array<Term, 5> kModelTerms = {Term::backend, Term::mode, Term::constraint,
                                                    Term::transport, Term::backend_mode};

// ---- bootstrap ----

struct BootstrapInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// 95% percentile bootstrap for the mean of `values`; draws are keyed
// by (seed, label, resample index, draw index) so the interval is
// deterministic and order-independent.
BootstrapInterval bootstrap_mean_interval(std::span<const double> values, int resamples,
                                          std::uint64_t seed, std::string_view label);

struct ContrastRow {
  std::string backend;
  std::string pair;    // e.g. "MCLR vs MJ"
  std::string metric;
  double delta = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// delta = mean(a) - mean(b) with a 95% percentile bootstrap interval
// over independently resampled cells. Invariant cells collapse the
// interval onto the point estimate.
ContrastRow bootstrap_contrast(std::span<const double> cell_a, std::span<const double> cell_b,
                               int resamples, std::uint64_t seed, std::string backend,
                               std::string pair, std::string metric);

}  // namespace routebench::stats
