#include "chiext/limit_process.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "chiext/chi_process.hpp"
#include "chiext/error.hpp"
#include "chiext/parallel.hpp"
#include "chiext/stats.hpp"

namespace chiext {

namespace {

void check_limit_spec(const ModelSpec& spec) {
  spec.validate();
  if (spec.k == 0 && spec.kappa < 1.0) {
    throw DegenerateError(
        "limit process is degenerate for k = 0 with kappa < 1");
  }
}

// Assembles eta(t) from the sphere points, W, E and the fBm values Z_i(t).
// L2 is W - theta^(kappa/2) with theta = sum_i (W^(1/kappa) O_i +
// kappa^(-1/kappa) sqrt(2 C_i) Z_i)^2, which expands to the usual display
// because |O2| = 1.
class EtaAssembler {
 public:
  explicit EtaAssembler(const ModelSpec& spec) : spec_(spec) {
    const auto d = static_cast<std::size_t>(spec.dimension());
    root2c_.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      root2c_[i] = std::sqrt(2.0 * spec.models[i].local_coefficient().value());
    }
    use_l1_ = spec.kappa >= 1.0;
    use_l2_ = spec.kappa <= 1.0 && spec.k > 0;
    kappa_scale_ = std::pow(spec.kappa, -1.0 / spec.kappa);
  }

  struct Draw {
    double drift1;  // sum_{i<=m} C_i O_i^2
    double w_root;  // W^(1/kappa)
  };

  Draw prepare(std::span<const double> O1, double W) const {
    double drift = 0.0;
    for (std::size_t i = 0; i < O1.size(); ++i) {
      drift += 0.5 * root2c_[i] * root2c_[i] * O1[i] * O1[i];
    }
    return {drift, W > 0.0 ? std::pow(W, 1.0 / spec_.kappa) : 0.0};
  }

  // z(i) returns Z_i(t).
  template <class ZAt>
  double eta(double t_alpha, const Draw& d, std::span<const double> O1,
             std::span<const double> O2, double W, double E, ZAt z) const {
    double value = E;
    if (use_l1_) {
      double s = 0.0;
      for (std::size_t i = 0; i < O1.size(); ++i) s += root2c_[i] * O1[i] * z(i);
      value += s - d.drift1 * t_alpha;
    }
    if (use_l2_) {
      const std::size_t m = O1.size();
      double theta = 0.0;
      for (std::size_t i = 0; i < O2.size(); ++i) {
        const double c =
            d.w_root * O2[i] + kappa_scale_ * root2c_[m + i] * z(m + i);
        theta += c * c;
      }
      value += W - zeta_from_squares(theta, 0.0, spec_.kappa);
    }
    return value;
  }

 private:
  const ModelSpec& spec_;
  std::vector<double> root2c_;
  bool use_l1_;
  bool use_l2_;
  double kappa_scale_;
};

void draw_random_elements(const ModelSpec& spec, RngStream& stream,
                          std::vector<double>& O1, std::vector<double>& O2,
                          double& W, double& E) {
  O1.resize(static_cast<std::size_t>(spec.m));
  O2.resize(static_cast<std::size_t>(spec.k));
  stream.unit_sphere(O1);
  if (spec.k > 0) stream.unit_sphere(O2);
  W = stream.gamma(static_cast<double>(spec.k) / spec.kappa);
  E = stream.exponential();
}

std::string format_step(double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", a);
  return buf;
}

struct Intercept {
  double value;
  double stderr;
};

Intercept ols_intercept(std::span<const double> x, std::span<const double> y,
                        std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (n == 1) return {y[0], sigma[0]};
  double sx = 0.0, sxx = 0.0;
  for (double v : x) {
    sx += v;
    sxx += v * v;
  }
  const double den = static_cast<double>(n) * sxx - sx * sx;
  double value = 0.0, var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = (sxx - x[i] * sx) / den;
    value += c * y[i];
    var += c * c * sigma[i] * sigma[i];
  }
  return {value, std::sqrt(var)};
}

}  // namespace

void LimitConfig::validate() const {
  check_limit_spec(spec);
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("grid step a must lie in (0, 1)");
  if (J < 2) throw ConfigError("J must be at least 2");
}

double LimitConfig::horizon_ratio() const {
  const auto coef = spec.coefficients();
  double c = 0.0;
  if (spec.kappa >= 1.0) {
    for (int i = 0; i < spec.m; ++i) c += coef[static_cast<std::size_t>(i)];
    c /= spec.m;
  } else {
    for (int i = spec.m; i < spec.dimension(); ++i) {
      c += coef[static_cast<std::size_t>(i)];
    }
    c /= spec.k;
  }
  return horizon() * std::pow(c, 1.0 / spec.alpha);
}

EtaSampler::EtaSampler(const LimitConfig& config)
    : config_((config.validate(), config)), fbm_(config.spec.alpha / 2.0, config.J) {}

LimitPathSample EtaSampler::sample(RngStream& stream) const {
  LimitPathSample out;
  sample_into(stream, out);
  return out;
}

void EtaSampler::sample_into(RngStream& stream, LimitPathSample& out) const {
  const ModelSpec& spec = config_.spec;
  const auto d = static_cast<std::size_t>(spec.dimension());
  const std::size_t J = config_.J;
  draw_random_elements(spec, stream, out.O1, out.O2, out.W, out.E);
  out.Z.resize(d);
  for (auto& z : out.Z) z.resize(J);
  std::vector<double> spare;
  for (std::size_t i = 0; i < d; i += 2) {
    if (i + 1 < d) {
      fbm_.sample_pair(config_.a, stream, out.Z[i], out.Z[i + 1]);
    } else {
      spare.resize(J);
      fbm_.sample_pair(config_.a, stream, out.Z[i], spare);
    }
  }
  const EtaAssembler assembler(spec);
  const auto draw = assembler.prepare(out.O1, out.W);
  out.eta.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double t = config_.a * static_cast<double>(j + 1);
    out.eta[j] = assembler.eta(std::pow(t, spec.alpha), draw, out.O1, out.O2,
                               out.W, out.E,
                               [&](std::size_t i) { return out.Z[i][j]; });
  }
}

LimitPathSample sample_eta(const LimitConfig& config, RngStream& stream) {
  return EtaSampler(config).sample(stream);
}

EtaMarginalSampler::EtaMarginalSampler(const ModelSpec& spec,
                                       std::span<const double> times)
    : spec_(spec), times_(times.begin(), times.end()) {
  check_limit_spec(spec_);
  if (times_.empty()) throw ConfigError("times must not be empty");
  for (double t : times_) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("times must be positive");
  }
  const std::size_t n = times_.size();
  const double alpha = spec_.alpha;
  line_ = alpha == 2.0;
  if (line_) return;
  Eigen::MatrixXd S(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      S(i, j) = 0.5 * (std::pow(times_[i], alpha) + std::pow(times_[j], alpha) -
                       std::pow(std::abs(times_[i] - times_[j]), alpha));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("times give a singular fBm covariance (repeated times?)");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  factor_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) factor_[i * n + j] = L(i, j);
  }
}

void EtaMarginalSampler::sample(RngStream& stream,
                                std::span<double> values) const {
  const std::size_t n = times_.size();
  if (values.size() < n) throw ConfigError("output too short");
  const auto d = static_cast<std::size_t>(spec_.dimension());
  std::vector<double> O1, O2;
  double W = 0.0, E = 0.0;
  draw_random_elements(spec_, stream, O1, O2, W, E);
  // Z[i * n + j] = Z_i(times[j]).
  std::vector<double> Z(d * n);
  std::vector<double> xi(n);
  for (std::size_t i = 0; i < d; ++i) {
    if (line_) {
      const double x = stream.normal();
      for (std::size_t j = 0; j < n; ++j) Z[i * n + j] = times_[j] * x;
      continue;
    }
    for (auto& x : xi) x = stream.normal();
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c <= r; ++c) s += factor_[r * n + c] * xi[c];
      Z[i * n + r] = s;
    }
  }
  const EtaAssembler assembler(spec_);
  const auto draw = assembler.prepare(O1, W);
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = assembler.eta(std::pow(times_[j], spec_.alpha), draw, O1, O2,
                              W, E, [&](std::size_t i) { return Z[i * n + j]; });
  }
}

PickandsEstimate estimate_pickands(const LimitConfig& config,
                                   std::uint64_t reps, const RngPolicy& policy,
                                   unsigned parallelism) {
  if (reps == 0) throw ConfigError("reps must be positive");
  const EtaSampler sampler(config);
  const std::size_t J = config.J;
  // Bit 0: max eta <= 0 on j >= 1; bit 1: second-half max exceeds -1.
  std::vector<unsigned char> flags(reps, 0);
  parallel_for(reps, parallelism, [&](std::size_t r) {
    RngStream stream = policy.stream(r);
    LimitPathSample path;
    sampler.sample_into(stream, path);
    const auto half = path.eta.begin() + static_cast<std::ptrdiff_t>(J / 2);
    const double first_max = *std::max_element(path.eta.begin(), half);
    const double second_max = *std::max_element(half, path.eta.end());
    unsigned char f = 0;
    if (std::max(first_max, second_max) <= 0.0) f |= 1;
    if (second_max > -1.0) f |= 2;
    flags[r] = f;
  });

  PickandsEstimate est;
  est.a = config.a;
  est.J = J;
  est.reps = reps;
  std::uint64_t tail_hits = 0;
  for (unsigned char f : flags) {
    est.successes += f & 1;
    tail_hits += (f >> 1) & 1;
  }
  const double n = static_cast<double>(reps);
  est.p_hat = static_cast<double>(est.successes) / n;
  est.h_hat = est.p_hat / config.a;
  est.stderr = std::sqrt(est.p_hat * (1.0 - est.p_hat) / n) / config.a;
  const Interval ci = wilson_interval(est.successes, reps);
  est.ci_low = ci.low / config.a;
  est.ci_high = ci.high / config.a;
  est.second_half_fraction = static_cast<double>(tail_hits) / n;
  est.truncation_warning = est.second_half_fraction > 0.01;
  est.zero_successes = est.successes == 0;
  est.horizon_ratio = config.horizon_ratio();
  return est;
}

PickandsExtrapolation extrapolate_pickands(const ModelSpec& spec,
                                           std::span<const double> steps,
                                           double horizon, std::uint64_t reps,
                                           const RngPolicy& policy,
                                           unsigned parallelism) {
  if (steps.empty()) throw ConfigError("need at least one grid step");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  PickandsExtrapolation out;
  std::vector<double> xa, xr, y, sigma;
  for (double a : steps) {
    LimitConfig config{spec, a,
                       static_cast<std::size_t>(std::ceil(horizon / a - 1e-9))};
    const auto est = estimate_pickands(
        config, reps, policy.derive(policy.experiment + "/a=" + format_step(a)),
        parallelism);
    out.estimates.push_back(est);
    xa.push_back(a);
    xr.push_back(std::pow(a, spec.alpha / 2.0));
    y.push_back(est.h_hat);
    sigma.push_back(est.stderr);
  }
  const auto lin = ols_intercept(xa, y, sigma);
  const auto rate = ols_intercept(xr, y, sigma);
  out.linear_in_a = lin.value;
  out.linear_in_a_stderr = lin.stderr;
  out.linear_in_rate = rate.value;
  out.linear_in_rate_stderr = rate.stderr;
  return out;
}

UpsilonCurve estimate_upsilon(const LimitConfig& config,
                              std::span<const double> x_grid,
                              std::uint64_t reps, const RngPolicy& policy,
                              unsigned parallelism) {
  if (reps == 0) throw ConfigError("reps must be positive");
  if (x_grid.empty()) throw ConfigError("x grid must not be empty");
  for (double x : x_grid) {
    if (!(x >= 0.0)) throw ConfigError("x values must be nonnegative");
    if (!(x < config.horizon() / 2.0)) {
      throw ConfigError("x = " + std::to_string(x) +
                        " violates the truncation guard x < aJ/2");
    }
  }
  const EtaSampler sampler(config);
  std::vector<double> sojourn(reps);
  parallel_for(reps, parallelism, [&](std::size_t r) {
    RngStream stream = policy.stream(r);
    LimitPathSample path;
    sampler.sample_into(stream, path);
    std::vector<double> values;
    values.reserve(path.eta.size() + 1);
    values.push_back(path.E);
    values.insert(values.end(), path.eta.begin(), path.eta.end());
    sojourn[r] = sojourn_above(values, config.a, 0.0);
  });

  UpsilonCurve curve;
  curve.reps = reps;
  curve.x.assign(x_grid.begin(), x_grid.end());
  ExactSum total;
  for (double s : sojourn) total.add(s);
  curve.mean_sojourn = total.value() / static_cast<double>(reps);
  const double n = static_cast<double>(reps);
  for (double x : curve.x) {
    std::uint64_t above = 0;
    for (double s : sojourn) above += s > x ? 1 : 0;
    const auto stats = SummaryStats::from_proportion(above, reps);
    curve.raw.push_back(stats.mean);
    curve.stderr.push_back(std::sqrt(stats.mean * (1.0 - stats.mean) / n));
    curve.ci_low.push_back(stats.ci_low);
    curve.ci_high.push_back(stats.ci_high);
  }
  // Isotonic correction along increasing x.
  std::vector<std::size_t> order(curve.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return curve.x[l] < curve.x[r];
  });
  std::vector<double> sorted;
  for (std::size_t i : order) sorted.push_back(curve.raw[i]);
  const auto iso = isotonic_nonincreasing(sorted);
  curve.upsilon.resize(curve.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) curve.upsilon[order[i]] = iso[i];
  return curve;
}

}  // namespace chiext
