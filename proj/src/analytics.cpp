#include "chiext/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "chiext/error.hpp"

namespace chiext {

namespace {

constexpr double kLn2 = std::numbers::ln2;

std::string format_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void check_tail_args(int m, int k, double kappa) {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (k < 0) throw ConfigError("k must be nonnegative");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw ConfigError("kappa must be positive and finite");
  }
}

void check_tail_u(double u) {
  if (!(u >= 0.0) || !std::isfinite(u)) {
    throw ConfigError("asymptotic formulas need a finite u >= 0, got " +
                      std::to_string(u));
  }
}

// log of the common factor 2^(2-(m+k)/2) / (kappa^2 Gamma(k/2) Gamma(m/2))
// * u^(m/kappa - 1) / w * exp(-u^(2/kappa)/2), without the Gamma(k/2) term.
// c log u with 0 * log 0 read as 0, so that u = 0 works whenever the power
// vanishes.
double xlog(double c, double u) { return c == 0.0 ? 0.0 : c * std::log(u); }

// Small u is only admitted while the display stays positive and finite;
// underflow deep in the tail is a legitimate zero.
double checked_tail(double value, double u) {
  if (!std::isfinite(value) || (value == 0.0 && u <= 1.0)) {
    throw ConfigError("tail display is not positive and finite at u = " +
                      std::to_string(u));
  }
  return value;
}

double log_display_core(int m, int k, double kappa, double u) {
  const double w = std::pow(u, 2.0 / kappa - 1.0) / kappa;
  return (2.0 - 0.5 * (m + k)) * kLn2 - 2.0 * std::log(kappa) -
         std::lgamma(0.5 * m) + xlog(m / kappa - 1.0, u) -
         std::log(w) - 0.5 * std::pow(u, 2.0 / kappa);
}

// The bracketed branch factor divided by Gamma(k/2), in logs; k = 0 makes
// every Gamma(k/kappa)/Gamma(k/2) ratio equal to 1.
double log_branch_over_gamma_k2(int k, double kappa, double u) {
  const double w = std::pow(u, 2.0 / kappa - 1.0) / kappa;
  if (kappa < 2.0) {
    if (k == 0) return 0.0;
    return std::lgamma(k / kappa) - (k / kappa) * std::log(w) -
           std::lgamma(0.5 * k);
  }
  if (kappa == 2.0) return 0.0;
  return std::log(kappa) + (0.5 * k - 1.0) * kLn2;
}

}  // namespace

double tau_exponent(double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  return kappa < 1.0 ? 2.0 / kappa - 1.0 : 1.0;
}

double tau_exponent(double kappa, int k) {
  if (k < 0) throw ConfigError("k must be nonnegative");
  return k == 0 ? 1.0 : tau_exponent(kappa);
}

namespace {

ScalingBundle make_scaling(double tau, double kappa, double alpha, double u) {
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw ConfigError("alpha must lie in (0, 2]");
  }
  if (!(u > 1.0) || !std::isfinite(u)) {
    throw ConfigError("scalings need u > 1, got " + std::to_string(u));
  }
  return ScalingBundle{tau, std::pow(u, -2.0 * tau / (alpha * kappa)),
                       std::pow(u, 2.0 / kappa - 1.0) / kappa};
}

}  // namespace

ScalingBundle scaling(double kappa, double alpha, double u) {
  return make_scaling(tau_exponent(kappa), kappa, alpha, u);
}

ScalingBundle scaling(const ModelSpec& spec, double u) {
  return make_scaling(tau_exponent(spec.kappa, spec.k), spec.kappa, spec.alpha,
                      u);
}

double tail_asymptotic(int m, int k, double kappa, double u) {
  check_tail_args(m, k, kappa);
  check_tail_u(u);
  if (k == 0) {
    return checked_tail(
        std::exp((1.0 - 0.5 * m) * kLn2 - std::lgamma(0.5 * m) +
                 xlog((m - 2.0) / kappa, u) - 0.5 * std::pow(u, 2.0 / kappa)),
        u);
  }
  return checked_tail(std::exp(log_display_core(m, k, kappa, u) +
                               log_branch_over_gamma_k2(k, kappa, u)),
                      u);
}

double tail_display_literal(int m, int k, double kappa, double u) {
  check_tail_args(m, k, kappa);
  check_tail_u(u);
  return checked_tail(std::exp(log_display_core(m, k, kappa, u) +
                               log_branch_over_gamma_k2(k, kappa, u)),
                      u);
}

double chi_survival(int m, double x) {
  if (m < 1) throw ConfigError("chi degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * m, 0.5 * x * x);
}

double tail_oracle(int m, int k, double kappa, double u,
                   double relative_tolerance) {
  check_tail_args(m, k, kappa);
  if (!(relative_tolerance > 0.0)) {
    throw ConfigError("quadrature tolerance must be positive");
  }
  if (!std::isfinite(u)) throw ConfigError("u must be finite");
  if (k == 0) return u <= 0.0 ? 1.0 : chi_survival(m, std::pow(u, 1.0 / kappa));

  // P(zeta > u) = E[S_m((u + R^kappa)^(1/kappa))] with R ~ chi_k. For u < 0
  // the integrand equals the chi_k density on [0, (-u)^(1/kappa)], so that
  // piece is the chi_k CDF.
  const double half_k = 0.5 * k;
  const double log_norm = (1.0 - half_k) * kLn2 - std::lgamma(half_k);
  const auto density = [&](double r) {
    if (r <= 0.0) return k == 1 ? std::exp(log_norm) : 0.0;
    return std::exp(log_norm + (k - 1.0) * std::log(r) - 0.5 * r * r);
  };

  double head = 0.0;
  double r0 = 0.0;
  if (u < 0.0) {
    r0 = std::pow(-u, 1.0 / kappa);
    head = boost::math::gamma_p(half_k, 0.5 * r0 * r0);
  }

  // The integrand is written in the offset d = r - r0. Past r0 the level
  // u + r^kappa is formed without cancellation, which would otherwise leave
  // noise of order eps * r0^kappa right where the integrand has its cusp.
  const auto integrand = [&](double d) {
    d = std::max(d, 0.0);
    const double r = r0 + d;
    const double level =
        r0 > 0.0 ? -u * std::expm1(kappa * std::log1p(d / r0))
                 : u + std::pow(r, kappa);
    const double f = density(r);
    return level <= 0.0 ? f : chi_survival(m, std::pow(level, 1.0 / kappa)) * f;
  };

  // Beyond r_end the chi_k density is below 1e-300. Geometric cuts away
  // from r0 let the rule resolve the narrow peak that forms there for
  // large u.
  const double d_end = std::sqrt(static_cast<double>(k)) + 40.0;
  std::vector<double> cuts{0.0};
  for (double step = 1e-6; step < d_end; step *= 4.0) cuts.push_back(step);
  cuts.push_back(d_end);

  // Tanh-sinh keeps an honest error estimate at the cusp r = r0 (r^kappa
  // for kappa < 1, level^(1/kappa) for kappa > 1), where deep Gauss-Kronrod
  // recursion inflates it. It converges erratically at loose tolerances, so
  // every segment is taken to near machine precision and the summed estimate
  // is checked against the request.
  boost::math::quadrature::tanh_sinh<double> precise;
  double body = 0.0;
  double total_error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double error = 0.0;
    body += precise.integrate(integrand, cuts[i], cuts[i + 1], 1e-14, &error);
    total_error += error;
  }
  const double result = head + body;
  if (!std::isfinite(result) ||
      total_error > relative_tolerance * std::max(result, 1e-300)) {
    throw NumericError("tail_oracle quadrature did not converge: m=" +
                       std::to_string(m) + " k=" + std::to_string(k) +
                       " kappa=" + std::to_string(kappa) +
                       " u=" + std::to_string(u) +
                       " estimate=" + format_g(result) +
                       " error=" + format_g(total_error));
  }
  return std::min(result, 1.0);
}

TailEvaluation evaluate_tail(int m, int k, double kappa, double u,
                             double relative_tolerance) {
  TailEvaluation e{};
  e.u = u;
  e.asymptotic = tail_asymptotic(m, k, kappa, u);
  e.literal_display = tail_display_literal(m, k, kappa, u);
  e.oracle = tail_oracle(m, k, kappa, u, relative_tolerance);
  e.ratio = e.oracle > 0.0 ? e.asymptotic / e.oracle
                           : std::numeric_limits<double>::quiet_NaN();
  return e;
}

double threshold_for_tail(int m, int k, double kappa, double p,
                          double relative_tolerance) {
  if (!(p > 0.0 && p <= 0.5)) {
    throw ConfigError("target tail probability must lie in (0, 1/2]");
  }
  double lo = 0.0;
  if (tail_oracle(m, k, kappa, lo, relative_tolerance) < p) {
    // The second block dominates (k > m) and the median of zeta(0) is
    // negative; walk left until the tail exceeds p.
    double step = 1.0;
    while (tail_oracle(m, k, kappa, lo, relative_tolerance) < p) {
      lo -= step;
      step *= 2.0;
    }
  }
  double hi = std::max(lo, 0.0) + 1.0;
  while (tail_oracle(m, k, kappa, hi, relative_tolerance) > p) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail_oracle(m, k, kappa, mid, relative_tolerance) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SupProbAsymptotic sup_prob_asymptotic(double T, double u, double H,
                                      const ModelSpec& spec) {
  spec.validate();
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (!(H > 0.0)) throw ConfigError("H must be positive");
  const double tau = tau_exponent(spec.kappa, spec.k);
  const double raw = T * H * std::pow(u, 2.0 * tau / (spec.alpha * spec.kappa)) *
                     tail_asymptotic(spec.m, spec.k, spec.kappa, u);
  return SupProbAsymptotic{std::min(raw, 1.0), raw, raw > 1.0};
}

double piterbarg_bound(double T, double u, const ModelSpec& spec, double K,
                       double beta) {
  if (!(u > 1.0)) throw ConfigError("piterbarg_bound needs u > 1");
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (!(K > 0.0)) throw ConfigError("K must be positive");
  return K * T * std::pow(u, beta) *
         std::exp(-0.5 * std::pow(u, 2.0 / spec.kappa));
}

double norming_K0(int m, int k, double kappa, double alpha) {
  check_tail_args(m, k, kappa);
  if (kappa >= 2.0) return m - 2.0 + 2.0 / alpha;
  // kappa <= 1 and 1 < kappa < 2 rows share this form; tau is 1 on the
  // second row and for k = 0.
  const double tau = tau_exponent(kappa, k);
  return m - 2.0 + 2.0 * tau / alpha + k * (1.0 - 2.0 / kappa);
}

double tail_prefactor(int m, int k, double kappa) {
  check_tail_args(m, k, kappa);
  const double lg_m = std::lgamma(0.5 * m);
  if (k == 0 || kappa > 2.0) {
    return std::exp((1.0 - 0.5 * m) * kLn2 - lg_m);
  }
  if (kappa == 2.0) {
    return std::exp((1.0 - 0.5 * (m + k)) * kLn2 - lg_m);
  }
  return std::exp((2.0 - 0.5 * (m + k)) * kLn2 + std::lgamma(k / kappa) +
                  (k / kappa - 1.0) * std::log(kappa) - std::lgamma(0.5 * k) -
                  lg_m);
}

double norming_D0_table(int m, int k, double kappa, double alpha, double H) {
  check_tail_args(m, k, kappa);
  // (H / (Gamma(m/2) Gamma(k/2)))^2 times the branch factor; with k = 0 the
  // Gamma(k/.) ratios are 1 and kappa^(k/kappa - 1) becomes 1/kappa.
  const double base = H / std::tgamma(0.5 * m);
  const double kk = static_cast<double>(k);
  const auto ratio_sq = [&]() {
    if (k == 0) return std::pow(1.0 / kappa, 2.0);
    const double r = std::exp(std::lgamma(kk / kappa) - std::lgamma(0.5 * kk)) *
                     std::pow(kappa, kk / kappa - 1.0);
    return r * r;
  };
  if (kappa <= 1.0) {
    return base * base *
           std::pow(2.0, (2.0 / alpha) * (2.0 / kappa - 1.0) +
                             2.0 * (1.0 - kk / kappa)) *
           ratio_sq();
  }
  if (kappa < 2.0) {
    return base * base * std::pow(2.0, 2.0 / alpha + 2.0 * (1.0 - kk / kappa)) *
           ratio_sq();
  }
  if (kappa == 2.0) return base * base * std::pow(2.0, 2.0 / alpha - 2.0);
  return base * base * std::pow(2.0, 2.0 / alpha);
}

GumbelNorming gumbel_norming(double T, const ModelSpec& spec, double H) {
  spec.validate();
  if (!(T > std::exp(std::numbers::e))) {
    throw ConfigError("gumbel_norming needs T > e^e, got " + std::to_string(T));
  }
  if (!(H > 0.0)) throw ConfigError("H must be positive");
  const double kappa = spec.kappa;
  const double two_log_t = 2.0 * std::log(T);
  GumbelNorming g{};
  g.H_used = H;
  g.a_T = std::pow(two_log_t, 1.0 - 0.5 * kappa) / kappa;
  g.K0 = norming_K0(spec.m, spec.k, kappa, spec.alpha);
  const double prefactor = tail_prefactor(spec.m, spec.k, kappa);
  g.D0 = std::pow(H * prefactor, 2.0) * std::pow(2.0, g.K0);
  g.D0_table = norming_D0_table(spec.m, spec.k, kappa, spec.alpha, H);
  g.b_T = std::pow(two_log_t, 0.5 * kappa) +
          kappa / (2.0 * std::pow(two_log_t, 1.0 - 0.5 * kappa)) *
              (g.K0 * std::log(std::log(T)) + std::log(g.D0));
  return g;
}

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

double ks_distance(std::span<const double> samples,
                   const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("ks_distance needs samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

MomentEstimate seleznjev_moment(std::span<const double> maxima, double T,
                                double kappa, double p) {
  if (!(T > 1.0)) throw ConfigError("seleznjev_moment needs T > 1");
  if (!(p > 0.0)) throw ConfigError("moment order p must be positive");
  if (maxima.empty()) throw ConfigError("seleznjev_moment needs samples");
  const double scale = std::pow(2.0 * std::log(T), 0.5 * kappa);
  const bool integer_p = p == std::floor(p);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double m : maxima) {
    const double ratio = m / scale;
    if (ratio < 0.0 && !integer_p) {
      throw NumericError("negative normalized maximum with non-integer p");
    }
    const double v = std::pow(ratio, p);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(maxima.size());
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return MomentEstimate{mean, std::sqrt(var / n)};
}

}  // namespace chiext
