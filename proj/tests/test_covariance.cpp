#include <doctest.h>

#include <cmath>
#include <vector>

#include "chiext/covariance.hpp"
#include "chiext/error.hpp"

using namespace chiext;

TEST_CASE("closed-form correlations") {
  const auto pe = CovarianceModel::power_exponential(1.0, 1.0);
  CHECK(eval_correlation(pe, 0.0) == 1.0);
  CHECK(eval_correlation(pe, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  const auto gc = CovarianceModel::generalized_cauchy(1.0, 2.0, 1.0);
  CHECK(eval_correlation(gc, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval_correlation(gc, 0.0) == 1.0);
  CHECK(pe.one_minus(1e-12) == doctest::Approx(1e-12).epsilon(1e-9));
}

TEST_CASE("correlations decay strictly") {
  const std::vector<CovarianceModel> models{
      CovarianceModel::power_exponential(2.0, 1.5),
      CovarianceModel::generalized_cauchy(1.0, 0.7, 3.0)};
  for (const auto& model : models) {
    double prev = model(0.0);
    for (double t = 0.01; t < 50.0; t *= 1.3) {
      const double r = model(t);
      CHECK(r < prev);
      CHECK(std::abs(r) <= 1.0);
      prev = r;
    }
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(CovarianceModel::power_exponential(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(CovarianceModel::power_exponential(1.0, 2.5), ConfigError);
  CHECK_THROWS_AS(CovarianceModel::generalized_cauchy(1.0, 1.0, -1.0), ConfigError);
  CHECK_THROWS_AS(CovarianceModel::tabulated({0.0, 1.0}, {0.9, 0.5}), ConfigError);
  CHECK_THROWS_AS(CovarianceModel::tabulated({0.0, 1.0, 0.5}, {1.0, 0.5, 0.2}),
                  ConfigError);
}

TEST_CASE("tabulated model interpolates and refuses extrapolation") {
  const auto tab = CovarianceModel::tabulated({0.0, 1.0, 2.0}, {1.0, 0.5, 0.1});
  CHECK(tab(0.5) == doctest::Approx(0.75));
  CHECK(tab(2.0) == doctest::Approx(0.1));
  CHECK_THROWS_AS(tab(2.5), OutOfRangeError);
  CHECK_FALSE(tab.is_closed_form());
  CHECK_FALSE(tab.local_coefficient().has_value());
}

TEST_CASE("local expansion recovers C and alpha") {
  std::vector<double> lags;
  for (int j = 0; j < 12; ++j) lags.push_back(0.1 * std::pow(2.0, -j));
  const auto pe = fit_local_expansion(CovarianceModel::power_exponential(2.0, 1.5), lags);
  CHECK(pe.C_local == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(pe.alpha_local == doctest::Approx(1.5).epsilon(1e-3));
  const auto gc =
      fit_local_expansion(CovarianceModel::generalized_cauchy(1.0, 2.0, 3.0), lags);
  CHECK(gc.C_local == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(gc.fit_residual >= 0.0);
}

TEST_CASE("local expansion errors") {
  const std::vector<double> few{0.1, 0.05, 0.02};
  CHECK_THROWS_AS(fit_local_expansion(CovarianceModel::power_exponential(1, 1), few),
                  ConfigError);
  const std::vector<double> increasing{0.01, 0.02, 0.04, 0.08};
  CHECK_THROWS_AS(
      fit_local_expansion(CovarianceModel::power_exponential(1, 1), increasing),
      ConfigError);
  const auto flat = CovarianceModel::tabulated({0.0, 0.5, 1.0}, {1.0, 1.0, 0.5});
  const std::vector<double> lags{0.4, 0.3, 0.2, 0.1};
  CHECK_THROWS_AS(fit_local_expansion(flat, lags), DegenerateError);
}

TEST_CASE("Berman exponent case table") {
  CHECK(berman_exponent(0.5, 1) == doctest::Approx(3.0));
  CHECK(berman_exponent(1.0, 4) == doctest::Approx(1.0));
  CHECK(berman_exponent(2.0, 4) == doctest::Approx(1.0));
  CHECK(berman_exponent(3.0, 2) == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("Berman check") {
  const std::vector<CovarianceModel> pe{CovarianceModel::power_exponential(1.0, 1.0)};
  const auto ok = berman_check(pe, 2.0, 1, 1e4);
  CHECK(ok.satisfied);
  CHECK(ok.c == doctest::Approx(1.0));
  for (const auto& [t, v] : ok.evidence) CHECK(v >= 0.0);
  // Polynomial decay t^(-0.1) times ln t stays far above the tolerance.
  const std::vector<CovarianceModel> slow{
      CovarianceModel::generalized_cauchy(1.0, 1.0, 0.1)};
  CHECK_FALSE(berman_check(slow, 2.0, 1, 1e4).satisfied);
  CHECK_THROWS_AS(berman_check(pe, 2.0, 1, 2.0), ConfigError);
}
