#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace chiext {

/// r(t) = exp(-C t^alpha).
struct PowerExponential {
  double C;
  double alpha;
};

/// r(t) = (1 + C t^alpha)^(-gamma).
struct GeneralizedCauchy {
  double C;
  double alpha;
  double gamma;
};

/// Piecewise-linear correlation through (lags[i], values[i]). Carries no
/// positive-definiteness guarantee; used for adversarial inputs.
struct Tabulated {
  std::vector<double> lags;
  std::vector<double> values;
};

/// Stationary unit-variance correlation function of one Gaussian component.
class CovarianceModel {
 public:
  using Family = std::variant<PowerExponential, GeneralizedCauchy, Tabulated>;

  static CovarianceModel power_exponential(double C, double alpha);
  static CovarianceModel generalized_cauchy(double C, double alpha,
                                            double gamma);
  /// lags must start at 0, be strictly increasing, and values[0] must be 1.
  static CovarianceModel tabulated(std::vector<double> lags,
                                   std::vector<double> values);

  /// r(t) for t >= 0. Throws OutOfRangeError past a tabulated range.
  double operator()(double t) const;

  /// 1 - r(t), evaluated without cancellation for the closed-form families.
  double one_minus(double t) const;

  const Family& family() const noexcept { return family_; }
  std::string family_name() const;
  bool is_closed_form() const noexcept;

  /// Coefficient C_i and exponent alpha of r(t) = 1 - C_i t^alpha + o(t^alpha).
  /// Empty for tabulated models.
  std::optional<double> local_coefficient() const;
  std::optional<double> local_exponent() const;

  /// Largest admissible lag (infinite for closed-form families).
  double max_lag() const noexcept;

 private:
  explicit CovarianceModel(Family family) : family_(std::move(family)) {}
  Family family_;
};

double eval_correlation(const CovarianceModel& model, double t);

struct LocalExpansion {
  double C_local;
  double alpha_local;
  /// max over the fitting lags of |(1 - r(t)) / (C_local t^alpha_local) - 1|
  double fit_residual;
};

/// Least-squares fit of log(1 - r(t)) on log t over lags in (0, 1), strictly
/// decreasing, at least four of them.
LocalExpansion fit_local_expansion(const CovarianceModel& model,
                                   std::span<const double> lags);

struct BermanReport {
  double c;
  bool satisfied;
  /// (t, max_l |r_l(t)| * (ln t)^c) on a log-spaced grid over [e, horizon].
  std::vector<std::pair<double, double>> evidence;
};

/// Exponent c of the Berman-type condition: 2/kappa - 1 for kappa < 1,
/// 1 for 1 <= kappa <= 2, k + 1 - 2k/kappa for kappa > 2.
double berman_exponent(double kappa, int k);

inline constexpr double kDefaultBermanTolerance = 1e-3;

/// Empirical check of max_l |r_l(t)| (ln t)^c -> 0: satisfied when the
/// evidence is nonincreasing over the last decade of the grid and its final
/// value is below `tolerance`.
BermanReport berman_check(std::span<const CovarianceModel> models,
                          double kappa, int k, double horizon,
                          double tolerance = kDefaultBermanTolerance,
                          int points_per_decade = 20);

}  // namespace chiext
