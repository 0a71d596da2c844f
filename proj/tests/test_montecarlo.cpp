#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "chiext/error.hpp"
#include "chiext/montecarlo.hpp"
#include "chiext/parallel.hpp"

using namespace chiext;

TEST_CASE("replications do not depend on the schedule") {
  const RngPolicy policy{123, "schedule"};
  const ReplicationTask task = [](std::uint64_t, RngStream& s) {
    double acc = 0;
    for (int i = 0; i < 100; ++i) acc += s.normal() * 1e-3 + s.exponential();
    return acc;
  };
  const auto serial = run_replications(task, 5000, policy, 1);
  const auto wide = run_replications(task, 5000, policy, 8);
  CHECK(serial.mean == wide.mean);
  CHECK(serial.stderr == wide.stderr);

  const auto a = accumulate_replications(task, 0, 2000, policy, 3);
  auto b = accumulate_replications(task, 2000, 3000, policy, 2);
  b.merge(a);
  CHECK(b.mean() == serial.mean);
  CHECK(b.count() == 5000);
}

TEST_CASE("proportions use the Wilson interval") {
  const RngPolicy policy{9, "bernoulli"};
  const ReplicationTask task = [](std::uint64_t, RngStream& s) {
    return s.uniform() < 0.3 ? 1.0 : 0.0;
  };
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto st = run_replications(task, 500, policy.derive(std::to_string(rep)), 1,
                                     Statistic::Proportion);
    covered += st.ci_low <= 0.3 && 0.3 <= st.ci_high;
  }
  CHECK(covered >= 88);
}

TEST_CASE("a failing replication is reported with its index") {
  const RngPolicy policy{1, "failure"};
  const ReplicationTask task = [](std::uint64_t i, RngStream&) -> double {
    if (i == 37 || i == 80) throw NumericError("boom");
    return 1.0;
  };
  for (unsigned par : {1u, 4u}) {
    try {
      run_replications(task, 100, policy, par);
      FAIL("expected ReplicationError");
    } catch (const ReplicationError& e) {
      CHECK(e.index() == 37);
      CHECK_THROWS_AS(std::rethrow_exception(e.cause()), NumericError);
    }
  }
}

TEST_CASE("thread cap from the environment") {
  CHECK(resolve_parallelism(3) >= 1);
  CHECK(resolve_parallelism(1) == 1);
}

TEST_CASE("suprema probabilities") {
  const auto spec = ModelSpec::broadcast(1, 1, 2.0, CovarianceModel::power_exponential(1.0, 1.0));
  SupProbOptions opt;
  opt.H = 1.0;
  opt.delta = 0.2;
  const std::vector<double> us{0.5, 4.0, 30.0};
  const auto r = experiment_sup_prob(spec, 2.0, us, 4000, RngPolicy{3, "sup"}, opt);
  REQUIRE(r.rows.size() == 3);
  CHECK_FALSE(r.rows[0].feasible);
  CHECK(r.rows[1].feasible);
  CHECK_FALSE(r.rows[2].feasible);
  CHECK(r.rows[1].empirical.mean >= r.rows[1].tail);
  CHECK(r.rows[1].empirical.mean <= r.rows[1].piterbarg);
  CHECK(r.H_used == 1.0);
  CHECK_FALSE(r.H_estimated);
}

TEST_CASE("excursion experiment shape") {
  const auto spec = ModelSpec::broadcast(2, 2, 2.0, CovarianceModel::power_exponential(1.0, 1.0));
  ExcursionOptions opt;
  opt.eta_reps = 2000;
  opt.permutations = 20;
  const std::vector<double> us{4.0};
  const std::vector<double> ts{0.5, 1.0};
  const auto r = experiment_excursion(spec, us, ts, 500, RngPolicy{4, "exc"}, opt);
  REQUIRE(r.rows.size() == 2);
  REQUIRE(r.origin.size() == 1);
  CHECK(r.rows[0].eta_mean_analytic == doctest::Approx(0.5));
  CHECK(r.rows[1].eta_mean_analytic == doctest::Approx(0.0));
  CHECK(r.rows[0].p_value > 0.0);
  CHECK(r.rows[0].excursion.n == 500);
}
