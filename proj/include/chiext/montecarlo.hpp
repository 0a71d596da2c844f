#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chiext/limit_process.hpp"
#include "chiext/model_spec.hpp"
#include "chiext/rng.hpp"
#include "chiext/stats.hpp"

namespace chiext {

using ReplicationTask = std::function<double(std::uint64_t, RngStream&)>;

/// Runs task(i, policy.stream(i)) for i in [first, first + count) and
/// accumulates the returned values in index order.
MomentAccumulator accumulate_replications(const ReplicationTask& task,
                                          std::uint64_t first,
                                          std::uint64_t count,
                                          const RngPolicy& policy,
                                          unsigned parallelism = 1);

enum class Statistic { Mean, Proportion };

/// Summary over replications 0..reps-1. For Proportion the task must return
/// 0 or 1 and the interval is Wilson's. Failures surface as
/// ReplicationError carrying the replication index.
SummaryStats run_replications(const ReplicationTask& task, std::uint64_t reps,
                              const RngPolicy& policy, unsigned parallelism = 1,
                              Statistic statistic = Statistic::Mean);

/// Where a freshly estimated Pickands constant comes from when none is
/// supplied.
struct PickandsOptions {
  std::vector<double> steps{0.2, 0.1, 0.05};
  double horizon = 50.0;
  std::uint64_t reps = 100000;
};

/// H from the extrapolation in a^(alpha/2), floored at the smallest raw
/// estimate's lower interval end if the line dips below zero.
double estimate_pickands_constant(const ModelSpec& spec,
                                  const PickandsOptions& options,
                                  const RngPolicy& policy,
                                  unsigned parallelism);

// ---------------------------------------------------------------------------

struct SupProbOptions {
  /// Mesh h <= delta * q(max feasible u).
  double delta = 0.1;
  std::optional<double> H;
  PickandsOptions pickands;
  double K = 10.0;
  /// Defaults to 2/kappa + 1.
  std::optional<double> beta;
  unsigned parallelism = 1;
};

struct SupProbRow {
  double u = 0.0;
  bool feasible = false;
  std::string reason;
  double tail = 0.0;  // P(zeta(0) > u)
  SummaryStats empirical;
  double asymptotic = 0.0;
  bool out_of_regime = false;
  double ratio = 0.0;  // empirical / asymptotic
  double piterbarg = 0.0;
};

struct SupProbReport {
  double T = 0.0;
  double H_used = 0.0;
  bool H_estimated = false;
  double mesh = 0.0;
  int grid_points = 0;
  std::uint64_t reps = 0;
  std::vector<SupProbRow> rows;
};

SupProbReport experiment_sup_prob(const ModelSpec& spec, double T,
                                  std::span<const double> u_list,
                                  std::uint64_t reps, const RngPolicy& policy,
                                  const SupProbOptions& options = {});

// ---------------------------------------------------------------------------

struct SojournOptions {
  double delta = 0.1;
  /// Limit-process grid for the Upsilon estimate.
  double limit_a = 0.05;
  double limit_horizon = 50.0;
  std::uint64_t limit_reps = 100000;
  unsigned parallelism = 1;
};

struct SojournRow {
  double x = 0.0;
  /// E[(vL - x)+] / (v E[L]).
  double lhs = 0.0;
  double lhs_stderr = 0.0;
  double lhs_ci_low = 0.0;
  double lhs_ci_high = 0.0;
  double upsilon = 0.0;  // isotonic
  double upsilon_raw = 0.0;
  double upsilon_ci_low = 0.0;
  double upsilon_ci_high = 0.0;
  double ratio = 0.0;  // lhs / upsilon
  bool overlap = false;
};

struct SojournReport {
  double u = 0.0;
  double t_window = 0.0;
  double v = 0.0;
  double tail = 0.0;
  double mesh = 0.0;
  std::uint64_t reps = 0;
  std::uint64_t positive = 0;  // replications with L > 0
  double mean_L = 0.0;
  double mean_L_stderr = 0.0;
  std::vector<SojournRow> rows;
};

SojournReport experiment_sojourn(const ModelSpec& spec, double u,
                                 double t_window,
                                 std::span<const double> x_grid,
                                 std::uint64_t reps, const RngPolicy& policy,
                                 const SojournOptions& options = {});

// ---------------------------------------------------------------------------

struct GumbelOptions {
  double delta = 0.1;
  /// Pickands constant for b_T; estimated when empty.
  std::optional<double> H;
  PickandsOptions pickands;
  /// KS distances are averaged over this many disjoint batches.
  unsigned batches = 4;
  double berman_horizon = 1e4;
  unsigned parallelism = 1;
};

struct GumbelRow {
  double T = 0.0;
  double a_T = 0.0;
  double b_T = 0.0;
  double K0 = 0.0;
  double D0 = 0.0;
  double mesh = 0.0;
  int grid_points = 0;
  std::uint64_t reps = 0;
  double ks = 0.0;        // all maxima
  double ks_batch = 0.0;  // mean over batches
  SummaryStats normalized;  // a_T (M_T - b_T)
  double normalized_variance = 0.0;
  double seleznjev = 0.0;  // p = 1
  double seleznjev_stderr = 0.0;
};

struct GumbelReport {
  double H_used = 0.0;
  bool H_estimated = false;
  double berman_c = 0.0;
  std::vector<GumbelRow> rows;
  /// Raw maxima per T, in replication order.
  std::vector<std::vector<double>> maxima;
};

/// Throws InfeasibleError when the Berman check fails.
GumbelReport experiment_gumbel(const ModelSpec& spec,
                               std::span<const double> T_list,
                               std::uint64_t reps, const RngPolicy& policy,
                               const GumbelOptions& options = {});

// ---------------------------------------------------------------------------

struct ExcursionOptions {
  /// Limit-process draws per t.
  std::uint64_t eta_reps = 20000;
  int permutations = 200;
  /// Accepted excursions per replication chunk.
  std::uint64_t chunk = 250;
  unsigned parallelism = 1;
};

struct ExcursionRow {
  double u = 0.0;
  double t = 0.0;
  double tail = 0.0;
  double acceptance_rate = 0.0;
  double ks = 0.0;
  double p_value = 0.0;
  SummaryStats excursion;
  SummaryStats eta;
  /// 1 - t^alpha sum C_i / m for kappa > 1, NaN otherwise.
  double eta_mean_analytic = 0.0;
};

struct ExcursionOrigin {
  double u = 0.0;
  SummaryStats value;  // w (zeta(0) - u) | zeta(0) > u
};

struct ExcursionReport {
  std::uint64_t reps = 0;
  std::vector<ExcursionRow> rows;
  std::vector<ExcursionOrigin> origin;
};

ExcursionReport experiment_excursion(const ModelSpec& spec,
                                     std::span<const double> u_list,
                                     std::span<const double> t_values,
                                     std::uint64_t reps,
                                     const RngPolicy& policy,
                                     const ExcursionOptions& options = {});

}  // namespace chiext
