#include "chiext/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "chiext/error.hpp"

namespace chiext {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw ConfigError("alpha must lie in (0, 2], got " +
                      std::to_string(alpha));
  }
}

void check_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string(name) + " must be positive and finite, got " +
                      std::to_string(value));
  }
}

double interpolate(const Tabulated& tab, double t) {
  const auto& lags = tab.lags;
  const double last = lags.back();
  if (t > last) {
    // Grid arithmetic (j * h) may overshoot the last lag by an ulp or two.
    if (t > last * (1.0 + 1e-12)) {
      throw OutOfRangeError("tabulated correlation queried at t=" +
                            std::to_string(t) + " beyond last lag " +
                            std::to_string(last));
    }
    return tab.values.back();
  }
  const auto it = std::upper_bound(lags.begin(), lags.end(), t);
  const auto hi = static_cast<std::size_t>(it - lags.begin());
  if (hi >= lags.size()) return tab.values.back();
  const std::size_t lo = hi - 1;
  const double w = (t - lags[lo]) / (lags[hi] - lags[lo]);
  return (1.0 - w) * tab.values[lo] + w * tab.values[hi];
}

}  // namespace

CovarianceModel CovarianceModel::power_exponential(double C, double alpha) {
  check_positive(C, "C");
  check_alpha(alpha);
  return CovarianceModel(PowerExponential{C, alpha});
}

CovarianceModel CovarianceModel::generalized_cauchy(double C, double alpha,
                                                    double gamma) {
  check_positive(C, "C");
  check_alpha(alpha);
  check_positive(gamma, "gamma");
  return CovarianceModel(GeneralizedCauchy{C, alpha, gamma});
}

CovarianceModel CovarianceModel::tabulated(std::vector<double> lags,
                                           std::vector<double> values) {
  if (lags.size() != values.size() || lags.size() < 2) {
    throw ConfigError("tabulated model needs at least two (lag, value) pairs");
  }
  if (lags.front() != 0.0 || values.front() != 1.0) {
    throw ConfigError("tabulated model must start with r(0) = 1");
  }
  for (std::size_t i = 1; i < lags.size(); ++i) {
    if (!(lags[i] > lags[i - 1])) {
      throw ConfigError("tabulated lags must be strictly increasing");
    }
  }
  for (double v : values) {
    if (!(std::abs(v) <= 1.0)) {
      throw ConfigError("tabulated correlation values must satisfy |r| <= 1");
    }
  }
  return CovarianceModel(Tabulated{std::move(lags), std::move(values)});
}

double CovarianceModel::operator()(double t) const {
  if (!(t >= 0.0)) {
    throw ConfigError("correlation lag must be nonnegative, got " +
                      std::to_string(t));
  }
  if (t == 0.0) return 1.0;
  return std::visit(
      Overloaded{
          [t](const PowerExponential& m) {
            return std::exp(-m.C * std::pow(t, m.alpha));
          },
          [t](const GeneralizedCauchy& m) {
            return std::exp(-m.gamma * std::log1p(m.C * std::pow(t, m.alpha)));
          },
          [t](const Tabulated& m) { return interpolate(m, t); },
      },
      family_);
}

double CovarianceModel::one_minus(double t) const {
  if (!(t >= 0.0)) {
    throw ConfigError("correlation lag must be nonnegative, got " +
                      std::to_string(t));
  }
  if (t == 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [t](const PowerExponential& m) {
            return -std::expm1(-m.C * std::pow(t, m.alpha));
          },
          [t](const GeneralizedCauchy& m) {
            return -std::expm1(-m.gamma *
                               std::log1p(m.C * std::pow(t, m.alpha)));
          },
          [t](const Tabulated& m) { return 1.0 - interpolate(m, t); },
      },
      family_);
}

std::string CovarianceModel::family_name() const {
  return std::visit(Overloaded{
                        [](const PowerExponential&) {
                          return std::string("power_exponential");
                        },
                        [](const GeneralizedCauchy&) {
                          return std::string("generalized_cauchy");
                        },
                        [](const Tabulated&) {
                          return std::string("tabulated");
                        },
                    },
                    family_);
}

bool CovarianceModel::is_closed_form() const noexcept {
  return !std::holds_alternative<Tabulated>(family_);
}

std::optional<double> CovarianceModel::local_coefficient() const {
  return std::visit(
      Overloaded{
          [](const PowerExponential& m) -> std::optional<double> {
            return m.C;
          },
          [](const GeneralizedCauchy& m) -> std::optional<double> {
            return m.gamma * m.C;
          },
          [](const Tabulated&) -> std::optional<double> {
            return std::nullopt;
          },
      },
      family_);
}

std::optional<double> CovarianceModel::local_exponent() const {
  return std::visit(
      Overloaded{
          [](const PowerExponential& m) -> std::optional<double> {
            return m.alpha;
          },
          [](const GeneralizedCauchy& m) -> std::optional<double> {
            return m.alpha;
          },
          [](const Tabulated&) -> std::optional<double> {
            return std::nullopt;
          },
      },
      family_);
}

double CovarianceModel::max_lag() const noexcept {
  if (const auto* tab = std::get_if<Tabulated>(&family_)) {
    return tab->lags.back();
  }
  return std::numeric_limits<double>::infinity();
}

double eval_correlation(const CovarianceModel& model, double t) {
  return model(t);
}

LocalExpansion fit_local_expansion(const CovarianceModel& model,
                                   std::span<const double> lags) {
  if (lags.size() < 4) {
    throw ConfigError("local expansion fit needs at least 4 lags");
  }
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (!(lags[i] > 0.0 && lags[i] < 1.0)) {
      throw ConfigError("fitting lags must lie in (0, 1)");
    }
    if (i > 0 && !(lags[i] < lags[i - 1])) {
      throw ConfigError("fitting lags must be strictly decreasing");
    }
  }

  std::vector<double> x(lags.size());
  std::vector<double> y(lags.size());
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double gap = model.one_minus(lags[i]);
    if (!(gap > 0.0)) {
      throw DegenerateError("1 - r(t) <= 0 at lag " + std::to_string(lags[i]) +
                            "; the model is degenerate near the origin");
    }
    x[i] = std::log(lags[i]);
    y[i] = std::log(gap);
  }

  // Plain log-log regression first, then refit with a t^alpha column that
  // absorbs the second-order term of 1 - r(t); the generic expansion
  // log(1 - r) = log C + alpha log t + c t^alpha + O(t^(2 alpha)) makes the
  // corrected intercept and slope accurate well before the lags are tiny.
  const auto rows = static_cast<Eigen::Index>(lags.size());
  Eigen::MatrixXd design(rows, 2);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = x[static_cast<std::size_t>(i)];
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d plain = design.colPivHouseholderQr().solve(rhs);
  double intercept = plain(0);
  double slope = plain(1);

  Eigen::MatrixXd augmented(rows, 3);
  augmented.leftCols(2) = design;
  double alpha = slope;
  bool converged = false;
  for (int iter = 0; iter < 50 && alpha > 0.0 && alpha <= 2.5; ++iter) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      augmented(i, 2) = std::pow(lags[static_cast<std::size_t>(i)], alpha);
    }
    const Eigen::Vector3d beta = augmented.colPivHouseholderQr().solve(rhs);
    const double step = beta(1) - alpha;
    alpha = beta(1);
    if (std::abs(step) < 1e-13) {
      intercept = beta(0);
      slope = beta(1);
      converged = true;
      break;
    }
  }
  if (converged && !(slope > 0.0 && std::isfinite(intercept))) {
    intercept = plain(0);
    slope = plain(1);
  }

  LocalExpansion fit{std::exp(intercept), slope, 0.0};
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double predicted = fit.C_local * std::pow(lags[i], fit.alpha_local);
    fit.fit_residual = std::max(
        fit.fit_residual, std::abs(model.one_minus(lags[i]) / predicted - 1.0));
  }
  return fit;
}

double berman_exponent(double kappa, int k) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (k < 0) throw ConfigError("k must be nonnegative");
  if (kappa < 1.0) return 2.0 / kappa - 1.0;
  if (kappa <= 2.0) return 1.0;
  return static_cast<double>(k) + 1.0 - 2.0 * static_cast<double>(k) / kappa;
}

BermanReport berman_check(std::span<const CovarianceModel> models,
                          double kappa, int k, double horizon,
                          double tolerance, int points_per_decade) {
  if (models.empty()) throw ConfigError("berman_check needs at least one model");
  if (!(horizon >= std::numbers::e)) {
    throw ConfigError("berman_check horizon must be at least e");
  }
  if (points_per_decade < 2) {
    throw ConfigError("berman_check needs at least 2 points per decade");
  }
  BermanReport report{berman_exponent(kappa, k), false, {}};

  const double log_lo = std::log10(std::numbers::e);
  const double log_hi = std::log10(horizon);
  const int steps = std::max(
      2, static_cast<int>(std::ceil((log_hi - log_lo) * points_per_decade)));
  report.evidence.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t =
        i == steps ? horizon
                   : std::pow(10.0, log_lo + (log_hi - log_lo) * i / steps);
    double envelope = 0.0;
    for (const auto& model : models) envelope = std::max(envelope, std::abs(model(t)));
    report.evidence.emplace_back(t, envelope * std::pow(std::log(t), report.c));
  }

  const double decade_start = horizon / 10.0;
  bool nonincreasing = true;
  for (std::size_t i = 1; i < report.evidence.size(); ++i) {
    if (report.evidence[i].first < decade_start) continue;
    if (report.evidence[i].second > report.evidence[i - 1].second) {
      nonincreasing = false;
      break;
    }
  }
  report.satisfied = nonincreasing && report.evidence.back().second < tolerance;
  return report;
}

}  // namespace chiext
