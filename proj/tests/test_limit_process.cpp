#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "chiext/error.hpp"
#include "chiext/limit_process.hpp"
#include "chiext/stats.hpp"

using namespace chiext;

namespace {

LimitConfig config(int m, int k, double kappa, double alpha, double a = 0.1, std::size_t J = 100) {
  LimitConfig c;
  c.spec = ModelSpec::broadcast(m, k, kappa, CovarianceModel::power_exponential(1.0, alpha));
  c.a = a;
  c.J = J;
  return c;
}

}  // namespace

TEST_CASE("configuration checks") {
  CHECK_THROWS_AS(config(1, 0, 0.5, 1.0).validate(), DegenerateError);
  CHECK_NOTHROW(config(1, 0, 1.0, 1.0).validate());
  CHECK_NOTHROW(config(1, 1, 0.5, 1.0).validate());
  CHECK_THROWS_AS(config(1, 1, 1.0, 1.0, 1.5).validate(), ConfigError);
  CHECK_THROWS_AS(config(1, 1, 1.0, 1.0, 0.1, 1).validate(), ConfigError);
  CHECK(config(1, 1, 2.0, 1.0, 0.1, 300).horizon() == doctest::Approx(30.0));
}

TEST_CASE("eta has mean 1 - t^alpha sum C / m for kappa > 1") {
  for (double alpha : {1.0, 1.5}) {
    const auto c = config(2, 1, 2.0, alpha, 0.25, 8);
    const EtaSampler sampler(c);
    RngStream s(1, static_cast<std::uint64_t>(alpha * 10));
    std::vector<MomentAccumulator> acc(c.J);
    LimitPathSample out;
    for (int i = 0; i < 100000; ++i) {
      sampler.sample_into(s, out);
      for (std::size_t j = 0; j < c.J; ++j) acc[j].add(out.eta[j] - out.E);
    }
    for (std::size_t j : {0, 3, 7}) {
      const double t = c.a * static_cast<double>(j + 1);
      // E + L1 with L1 centred at -t^alpha sum C_i O_i^2; E[O_i^2] = 1/m.
      const double expected = -std::pow(t, alpha);
      CHECK(std::abs(acc[j].mean() - expected) < 4 * acc[j].stderr());
    }
  }
}

TEST_CASE("eta draws are internally consistent") {
  const auto c = config(2, 2, 1.0, 1.0, 0.1, 20);
  RngStream s(2, 2);
  const auto p = sample_eta(c, s);
  CHECK(p.O1.size() == 2);
  CHECK(p.O2.size() == 2);
  CHECK(p.O1[0] * p.O1[0] + p.O1[1] * p.O1[1] == doctest::Approx(1.0));
  CHECK(p.W >= 0.0);
  CHECK(p.E >= 0.0);
  CHECK(p.Z.size() == 4);
  CHECK(p.eta.size() == 20);
  RngStream again(2, 2);
  CHECK(sample_eta(c, again).eta == p.eta);
}

TEST_CASE("marginal sampler matches the grid sampler") {
  const auto c = config(1, 1, 2.0, 1.0, 0.5, 4);
  const EtaSampler grid(c);
  const std::vector<double> times{0.5, 2.0};
  const EtaMarginalSampler marg(c.spec, times);
  RngStream s1(3, 3), s2(4, 4);
  std::vector<double> g0, g1, m0, m1;
  std::vector<double> vals(2);
  for (int i = 0; i < 4000; ++i) {
    const auto p = grid.sample(s1);
    g0.push_back(p.eta[0]);
    g1.push_back(p.eta[3]);
    marg.sample(s2, vals);
    m0.push_back(vals[0]);
    m1.push_back(vals[1]);
  }
  // 1% critical value of the two-sample KS statistic at n = m = 4000.
  const double crit = 1.63 * std::sqrt(2.0 / 4000);
  CHECK(ks_two_sample(g0, m0) < crit);
  CHECK(ks_two_sample(g1, m1) < crit);
}

TEST_CASE("Pickands estimate decreases in the horizon") {
  RngPolicy policy{42, "pickands-test"};
  double previous = INFINITY;
  for (std::size_t J : {10, 40, 160}) {
    const auto e = estimate_pickands(config(1, 1, 2.0, 1.0, 0.1, J), 2000, policy);
    CHECK(e.h_hat <= previous);
    CHECK(e.ci_low <= e.h_hat);
    CHECK(e.h_hat <= e.ci_high);
    CHECK(e.p_hat == doctest::Approx(e.h_hat * 0.1));
    previous = e.h_hat;
  }
}

TEST_CASE("Pickands for Brownian drift is near one") {
  RngPolicy policy{7, "pickands-bm"};
  const std::vector<double> steps{0.2, 0.1, 0.05};
  const auto x = extrapolate_pickands(config(1, 1, 2.0, 1.0).spec, steps, 30.0, 5000, policy);
  REQUIRE(x.estimates.size() == 3);
  CHECK(x.estimates[0].J == 150);
  CHECK(x.linear_in_rate == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("Upsilon curve") {
  RngPolicy policy{5, "upsilon-test"};
  const std::vector<double> xs{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  const auto u = estimate_upsilon(config(1, 1, 2.0, 1.0, 0.05, 400), xs, 3000, policy);
  CHECK(u.upsilon[0] == 1.0);
  CHECK(std::is_sorted(u.upsilon.rbegin(), u.upsilon.rend()));
  CHECK(u.upsilon.back() < 0.1);
  CHECK(u.mean_sojourn > 0.0);
  CHECK_THROWS_AS(estimate_upsilon(config(1, 1, 2.0, 1.0, 0.05, 100),
                                   std::vector<double>{3.0}, 10, policy),
                  ConfigError);
}
