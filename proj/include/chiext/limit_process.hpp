#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chiext/gaussian_sim.hpp"
#include "chiext/model_spec.hpp"
#include "chiext/rng.hpp"

namespace chiext {

/// The limit process eta on the grid {a, 2a, ..., Ja}.
struct LimitConfig {
  ModelSpec spec;
  double a = 0.1;
  std::size_t J = 300;

  /// Throws ConfigError (DegenerateError for k = 0 with kappa < 1).
  void validate() const;
  double horizon() const noexcept { return a * static_cast<double>(J); }
  /// horizon() * c^(1/alpha) with c the mean drift coefficient of the
  /// active block; should be >= 10 for the truncated supremum to be safe.
  double horizon_ratio() const;
};

struct LimitPathSample {
  std::vector<double> O1;
  std::vector<double> O2;
  double W = 0.0;
  double E = 0.0;
  /// Z[i][j] = Z_i(a (j + 1)).
  std::vector<std::vector<double>> Z;
  /// eta[j] = eta(a (j + 1)).
  std::vector<double> eta;
};

/// Reusable sampler for one configuration. Thread-safe for concurrent calls
/// with distinct streams.
class EtaSampler {
 public:
  explicit EtaSampler(const LimitConfig& config);

  const LimitConfig& config() const noexcept { return config_; }

  LimitPathSample sample(RngStream& stream) const;
  void sample_into(RngStream& stream, LimitPathSample& out) const;

 private:
  LimitConfig config_;
  FbmGenerator fbm_;
};

LimitPathSample sample_eta(const LimitConfig& config, RngStream& stream);

/// eta at arbitrary positive times, each draw an exact joint sample (the
/// fBm vector is drawn by Cholesky rather than on a grid).
class EtaMarginalSampler {
 public:
  EtaMarginalSampler(const ModelSpec& spec, std::span<const double> times);

  /// values[i] = eta(times[i]).
  void sample(RngStream& stream, std::span<double> values) const;

 private:
  ModelSpec spec_;
  std::vector<double> times_;
  std::vector<double> factor_;  // row-major lower Cholesky factor
  bool line_ = false;           // alpha = 2: Z(t) = t xi
};

struct PickandsEstimate {
  double h_hat = 0.0;
  double stderr = 0.0;
  double a = 0.0;
  std::size_t J = 0;
  std::uint64_t reps = 0;
  std::uint64_t successes = 0;
  double p_hat = 0.0;
  /// Wilson interval for p_hat, divided by a.
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// Fraction of replications whose maximum over the second half of the
  /// grid exceeds -1 (truncation-bias diagnostic).
  double second_half_fraction = 0.0;
  bool truncation_warning = false;  // second_half_fraction > 1%
  bool zero_successes = false;
  double horizon_ratio = 0.0;
};

/// (1/a) P(max_{1<=j<=J} eta(aj) <= 0), replication i using policy.stream(i).
PickandsEstimate estimate_pickands(const LimitConfig& config,
                                   std::uint64_t reps, const RngPolicy& policy,
                                   unsigned parallelism = 1);

struct PickandsExtrapolation {
  std::vector<PickandsEstimate> estimates;
  /// Intercept of a least-squares line in a.
  double linear_in_a = 0.0;
  double linear_in_a_stderr = 0.0;
  /// Intercept of a least-squares line in a^(alpha/2), the discretization
  /// rate of the grid supremum of fBm-driven processes.
  double linear_in_rate = 0.0;
  double linear_in_rate_stderr = 0.0;
};

/// Estimates at each step in `steps` on the common horizon a J = horizon,
/// then extrapolates to a -> 0. Each step uses a derived stream family.
PickandsExtrapolation extrapolate_pickands(const ModelSpec& spec,
                                           std::span<const double> steps,
                                           double horizon, std::uint64_t reps,
                                           const RngPolicy& policy,
                                           unsigned parallelism = 1);

struct UpsilonCurve {
  std::vector<double> x;
  std::vector<double> raw;
  /// Nonincreasing (isotonic) version of raw.
  std::vector<double> upsilon;
  std::vector<double> stderr;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  std::uint64_t reps = 0;
  /// Mean total sojourn of eta above 0 on the grid.
  double mean_sojourn = 0.0;
};

/// P(int_0^inf 1{eta(s) > 0} ds > x) from the grid {0, a, ..., Ja}, with
/// eta(0) = E. Requires max(x_grid) < aJ/2.
UpsilonCurve estimate_upsilon(const LimitConfig& config,
                              std::span<const double> x_grid,
                              std::uint64_t reps, const RngPolicy& policy,
                              unsigned parallelism = 1);

}  // namespace chiext
