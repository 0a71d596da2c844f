#include "chiext/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "chiext/analytics.hpp"
#include "chiext/chi_process.hpp"
#include "chiext/covariance.hpp"
#include "chiext/error.hpp"
#include "chiext/gaussian_sim.hpp"
#include "chiext/parallel.hpp"

namespace chiext {

namespace {

std::string label(const char* name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.17g", name, value);
  return buf;
}

void require_reps(std::uint64_t reps) {
  if (reps == 0) throw ConfigError("reps must be positive");
}

// zeta on the bundle's grid.
void zeta_values(const PathBundle& bundle, const ModelSpec& spec,
                 std::vector<double>& out) {
  const auto n = static_cast<std::size_t>(bundle.grid.n);
  const auto m = static_cast<std::size_t>(spec.m);
  out.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < bundle.components.size(); ++i) {
      const double x = bundle.components[i][j];
      (i < m ? s1 : s2) += x * x;
    }
    out[j] = zeta_from_squares(s1, s2, spec.kappa);
  }
}

// Grid suprema of zeta over [0, T] for replications 0..reps-1.
std::vector<double> simulate_suprema(const ModelSpec& spec, const Grid& grid,
                                     std::uint64_t reps,
                                     const RngPolicy& policy,
                                     unsigned parallelism) {
  const BundleSampler sampler(spec, grid);
  std::vector<double> sup(reps);
  parallel_for(reps, parallelism, [&](std::size_t r) {
    RngStream stream = policy.stream(r);
    PathBundle bundle;
    sampler.sample_into(stream, bundle);
    sup[r] = zeta_supremum(bundle, spec);
  });
  return sup;
}

}  // namespace

MomentAccumulator accumulate_replications(const ReplicationTask& task,
                                          std::uint64_t first,
                                          std::uint64_t count,
                                          const RngPolicy& policy,
                                          unsigned parallelism) {
  std::vector<double> values(count);
  parallel_for(count, parallelism, [&](std::size_t i) {
    RngStream stream = policy.stream(first + i);
    values[i] = task(first + i, stream);
  });
  MomentAccumulator acc;
  for (double v : values) acc.add(v);
  return acc;
}

SummaryStats run_replications(const ReplicationTask& task, std::uint64_t reps,
                              const RngPolicy& policy, unsigned parallelism,
                              Statistic statistic) {
  require_reps(reps);
  const MomentAccumulator acc =
      accumulate_replications(task, 0, reps, policy, parallelism);
  if (statistic == Statistic::Mean) return SummaryStats::from_moments(acc);
  const double successes = acc.sum();
  if (successes != std::floor(successes) || successes < 0.0 ||
      successes > static_cast<double>(reps)) {
    throw ConfigError("proportion task must return 0 or 1");
  }
  return SummaryStats::from_proportion(static_cast<std::uint64_t>(successes),
                                       reps);
}

double estimate_pickands_constant(const ModelSpec& spec,
                                  const PickandsOptions& options,
                                  const RngPolicy& policy,
                                  unsigned parallelism) {
  const auto ex = extrapolate_pickands(spec, options.steps, options.horizon,
                                       options.reps, policy, parallelism);
  if (ex.linear_in_rate > 0.0) return ex.linear_in_rate;
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& e : ex.estimates) floor = std::min(floor, e.ci_low);
  if (!(floor > 0.0)) {
    throw InfeasibleError("Pickands estimate is not positive; enlarge reps");
  }
  return floor;
}

// ---------------------------------------------------------------------------

SupProbReport experiment_sup_prob(const ModelSpec& spec, double T,
                                  std::span<const double> u_list,
                                  std::uint64_t reps, const RngPolicy& policy,
                                  const SupProbOptions& options) {
  spec.validate();
  require_reps(reps);
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (u_list.empty()) throw ConfigError("u list must not be empty");
  if (!(options.delta > 0.0)) throw ConfigError("delta must be positive");

  SupProbReport report;
  report.T = T;
  report.reps = reps;
  double u_max = -std::numeric_limits<double>::infinity();
  for (double u : u_list) {
    SupProbRow row;
    row.u = u;
    if (!(u > 1.0)) {
      row.reason = "u must exceed 1";
    } else {
      row.tail = tail_oracle(spec.m, spec.k, spec.kappa, u);
      if (row.tail < kExcursionFeasibility) {
        row.reason = "P(zeta(0) > u) below the feasibility guard";
      } else {
        row.feasible = true;
        u_max = std::max(u_max, u);
      }
    }
    report.rows.push_back(row);
  }
  if (!std::isfinite(u_max)) {
    return report;  // nothing feasible; every row records why
  }

  if (options.H) {
    report.H_used = *options.H;
  } else {
    report.H_used = estimate_pickands_constant(
        spec, options.pickands, policy.derive(policy.experiment + "/pickands"),
        options.parallelism);
    report.H_estimated = true;
  }

  const Grid grid =
      Grid::with_mesh(T, options.delta * scaling(spec, u_max).q);
  report.mesh = grid.h();
  report.grid_points = grid.n;
  const auto sup = simulate_suprema(spec, grid, reps, policy, options.parallelism);

  const double beta = options.beta.value_or(2.0 / spec.kappa + 1.0);
  for (auto& row : report.rows) {
    if (!row.feasible) continue;
    std::uint64_t hits = 0;
    for (double s : sup) hits += s > row.u ? 1 : 0;
    row.empirical = SummaryStats::from_proportion(hits, reps);
    const auto asym = sup_prob_asymptotic(T, row.u, report.H_used, spec);
    row.asymptotic = asym.value;
    row.out_of_regime = asym.out_of_regime;
    row.ratio = row.empirical.mean / asym.value;
    row.piterbarg = piterbarg_bound(T, row.u, spec, options.K, beta);
  }
  return report;
}

// ---------------------------------------------------------------------------

SojournReport experiment_sojourn(const ModelSpec& spec, double u,
                                 double t_window,
                                 std::span<const double> x_grid,
                                 std::uint64_t reps, const RngPolicy& policy,
                                 const SojournOptions& options) {
  spec.validate();
  require_reps(reps);
  if (!(t_window > 0.0)) throw ConfigError("window must be positive");
  if (x_grid.empty()) throw ConfigError("x grid must not be empty");
  if (!(u > 1.0)) throw ConfigError("u must exceed 1");

  SojournReport report;
  report.u = u;
  report.t_window = t_window;
  report.reps = reps;
  report.tail = tail_oracle(spec.m, spec.k, spec.kappa, u);
  if (report.tail < kExcursionFeasibility) {
    throw InfeasibleError("P(zeta(0) > u) below the feasibility guard");
  }
  const ScalingBundle sc = scaling(spec, u);
  report.v = 1.0 / sc.q;  // u^(2 tau / (alpha kappa))

  // Limit side first: it validates the x grid against its horizon.
  const LimitConfig limit{
      spec, options.limit_a,
      static_cast<std::size_t>(
          std::ceil(options.limit_horizon / options.limit_a - 1e-9))};
  const UpsilonCurve curve = estimate_upsilon(
      limit, x_grid, options.limit_reps,
      policy.derive(policy.experiment + "/upsilon"), options.parallelism);

  const Grid grid = Grid::with_mesh(t_window, options.delta * sc.q);
  report.mesh = grid.h();
  const BundleSampler sampler(spec, grid);
  std::vector<double> L(reps);
  parallel_for(reps, options.parallelism, [&](std::size_t r) {
    RngStream stream = policy.stream(r);
    PathBundle bundle;
    sampler.sample_into(stream, bundle);
    std::vector<double> zeta;
    zeta_values(bundle, spec, zeta);
    L[r] = std::clamp(sojourn_above(zeta, grid.h(), u), 0.0, t_window);
  });

  MomentAccumulator scaled;
  for (double l : L) {
    scaled.add(report.v * l);
    report.positive += l > 0.0 ? 1 : 0;
  }
  report.mean_L = scaled.mean() / report.v;
  report.mean_L_stderr = scaled.stderr() / report.v;
  if (report.positive == 0 || !(scaled.mean() > 0.0)) {
    throw InfeasibleError("no sojourn above u was observed; E[L] is 0");
  }

  const double n = static_cast<double>(reps);
  const double mean_b = scaled.mean();
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    const double x = curve.x[i];
    SojournRow row;
    row.x = x;
    ExactSum sum_a;
    for (double l : L) sum_a.add(std::max(report.v * l - x, 0.0));
    const double mean_a = sum_a.value() / n;
    row.lhs = x == 0.0 ? 1.0 : mean_a / mean_b;
    // Delta method for a ratio of means: Var(A - R B) / (n mean(B)^2).
    MomentAccumulator resid;
    for (double l : L) {
      const double b = report.v * l;
      resid.add(std::max(b - x, 0.0) - row.lhs * b);
    }
    row.lhs_stderr = std::sqrt(resid.variance() / n) / mean_b;
    row.lhs_ci_low = row.lhs - 1.959963984540054 * row.lhs_stderr;
    row.lhs_ci_high = row.lhs + 1.959963984540054 * row.lhs_stderr;
    row.upsilon = curve.upsilon[i];
    row.upsilon_raw = curve.raw[i];
    row.upsilon_ci_low = curve.ci_low[i];
    row.upsilon_ci_high = curve.ci_high[i];
    row.ratio = row.upsilon > 0.0 ? row.lhs / row.upsilon
                                  : std::numeric_limits<double>::quiet_NaN();
    row.overlap = row.lhs_ci_low <= row.upsilon_ci_high &&
                  row.upsilon_ci_low <= row.lhs_ci_high;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------

GumbelReport experiment_gumbel(const ModelSpec& spec,
                               std::span<const double> T_list,
                               std::uint64_t reps, const RngPolicy& policy,
                               const GumbelOptions& options) {
  spec.validate();
  require_reps(reps);
  if (T_list.empty()) throw ConfigError("T list must not be empty");
  for (std::size_t i = 1; i < T_list.size(); ++i) {
    if (!(T_list[i] > T_list[i - 1])) throw ConfigError("T list must increase");
  }
  if (options.batches == 0 || options.batches > reps) {
    throw ConfigError("batches must lie in [1, reps]");
  }

  GumbelReport report;
  const auto berman = berman_check(spec.models, spec.kappa, spec.k,
                                   options.berman_horizon);
  report.berman_c = berman.c;
  if (!berman.satisfied) {
    throw InfeasibleError("Berman condition check failed (c = " +
                          std::to_string(berman.c) + ")");
  }
  if (options.H) {
    report.H_used = *options.H;
  } else {
    report.H_used = estimate_pickands_constant(
        spec, options.pickands, policy.derive(policy.experiment + "/pickands"),
        options.parallelism);
    report.H_estimated = true;
  }

  for (double T : T_list) {
    const GumbelNorming norm = gumbel_norming(T, spec, report.H_used);
    GumbelRow row;
    row.T = T;
    row.a_T = norm.a_T;
    row.b_T = norm.b_T;
    row.K0 = norm.K0;
    row.D0 = norm.D0;
    row.reps = reps;
    const double level = std::max(norm.b_T, 1.0 + 1e-9);
    const Grid grid = Grid::with_mesh(T, options.delta * scaling(spec, level).q);
    row.mesh = grid.h();
    row.grid_points = grid.n;
    auto maxima = simulate_suprema(spec, grid, reps,
                                   policy.derive(policy.experiment + "/" + label("T", T)),
                                   options.parallelism);

    std::vector<double> normalized(reps);
    MomentAccumulator acc;
    for (std::size_t r = 0; r < reps; ++r) {
      normalized[r] = norm.a_T * (maxima[r] - norm.b_T);
      acc.add(normalized[r]);
    }
    row.normalized = SummaryStats::from_moments(acc);
    row.normalized_variance = acc.variance();
    row.ks = ks_distance(normalized, gumbel_cdf);
    double batch_sum = 0.0;
    for (unsigned b = 0; b < options.batches; ++b) {
      const std::size_t lo = reps * b / options.batches;
      const std::size_t hi = reps * (b + 1) / options.batches;
      batch_sum += ks_distance(
          std::span<const double>(normalized).subspan(lo, hi - lo), gumbel_cdf);
    }
    row.ks_batch = batch_sum / options.batches;
    const auto moment = seleznjev_moment(maxima, T, spec.kappa, 1.0);
    row.seleznjev = moment.value;
    row.seleznjev_stderr = moment.stderr;
    report.rows.push_back(row);
    report.maxima.push_back(std::move(maxima));
  }
  return report;
}

// ---------------------------------------------------------------------------

ExcursionReport experiment_excursion(const ModelSpec& spec,
                                     std::span<const double> u_list,
                                     std::span<const double> t_values,
                                     std::uint64_t reps,
                                     const RngPolicy& policy,
                                     const ExcursionOptions& options) {
  spec.validate();
  require_reps(reps);
  if (u_list.empty()) throw ConfigError("u list must not be empty");
  if (t_values.empty()) throw ConfigError("t list must not be empty");
  if (options.chunk == 0) throw ConfigError("chunk must be positive");
  if (options.eta_reps == 0) throw ConfigError("eta_reps must be positive");
  for (double u : u_list) {
    if (!(u > 1.0)) throw ConfigError("excursion thresholds must exceed 1");
  }

  ExcursionReport report;
  report.reps = reps;

  // Limit-process marginals, shared by every threshold.
  const EtaMarginalSampler eta_sampler(spec, t_values);
  const std::size_t nt = t_values.size();
  std::vector<double> eta_flat(options.eta_reps * nt);
  const RngPolicy eta_policy = policy.derive(policy.experiment + "/eta");
  parallel_for(options.eta_reps, options.parallelism, [&](std::size_t r) {
    RngStream stream = eta_policy.stream(r);
    eta_sampler.sample(stream,
                       std::span<double>(eta_flat).subspan(r * nt, nt));
  });
  std::vector<std::vector<double>> eta(nt, std::vector<double>(options.eta_reps));
  for (std::size_t r = 0; r < options.eta_reps; ++r) {
    for (std::size_t i = 0; i < nt; ++i) eta[i][r] = eta_flat[r * nt + i];
  }

  double drift = 0.0;
  for (int i = 0; i < spec.m; ++i) {
    drift += spec.models[static_cast<std::size_t>(i)].local_coefficient().value();
  }
  drift /= spec.m;

  for (double u : u_list) {
    const RngPolicy u_policy = policy.derive(policy.experiment + "/" + label("u", u));
    const std::uint64_t chunks = (reps + options.chunk - 1) / options.chunk;
    std::vector<ExcursionSample> parts(chunks);
    parallel_for(chunks, options.parallelism, [&](std::size_t c) {
      RngStream stream = u_policy.stream(c);
      const std::uint64_t count =
          std::min<std::uint64_t>(options.chunk, reps - c * options.chunk);
      parts[c] = conditional_excursion(spec, u, t_values, count, stream);
    });

    std::uint64_t draws = 0;
    std::uint64_t accepted = 0;
    std::vector<std::vector<double>> values(nt);
    MomentAccumulator origin;
    for (const auto& part : parts) {
      draws += part.draws;
      accepted += part.accepted;
      for (double v : part.origin) origin.add(v);
      for (std::size_t i = 0; i < nt; ++i) {
        values[i].insert(values[i].end(), part.values[i].begin(),
                         part.values[i].end());
      }
    }
    report.origin.push_back({u, SummaryStats::from_moments(origin)});
    const double tail = tail_oracle(spec.m, spec.k, spec.kappa, u);

    for (std::size_t i = 0; i < nt; ++i) {
      ExcursionRow row;
      row.u = u;
      row.t = t_values[i];
      row.tail = tail;
      row.acceptance_rate =
          static_cast<double>(accepted) / static_cast<double>(draws);
      row.ks = ks_two_sample(values[i], eta[i]);
      RngStream perm = u_policy.derive(label("perm-t", t_values[i])).stream(0);
      row.p_value =
          ks_permutation_pvalue(values[i], eta[i], options.permutations, perm);
      MomentAccumulator ex, et;
      for (double v : values[i]) ex.add(v);
      for (double v : eta[i]) et.add(v);
      row.excursion = SummaryStats::from_moments(ex);
      row.eta = SummaryStats::from_moments(et);
      row.eta_mean_analytic =
          spec.kappa > 1.0
              ? 1.0 - std::pow(t_values[i], spec.alpha) * drift
              : std::numeric_limits<double>::quiet_NaN();
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace chiext
