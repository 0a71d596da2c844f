#include "chiext/chi_process.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chiext/analytics.hpp"
#include "chiext/error.hpp"

namespace chiext {

namespace {

void check_bundle(const PathBundle& bundle, const ModelSpec& spec) {
  if (bundle.components.size() != static_cast<std::size_t>(spec.dimension())) {
    throw ConfigError("bundle has " + std::to_string(bundle.components.size()) +
                      " components, spec needs " +
                      std::to_string(spec.dimension()));
  }
  for (const auto& c : bundle.components) {
    if (c.size() != static_cast<std::size_t>(bundle.grid.n)) {
      throw ConfigError("bundle component length does not match its grid");
    }
  }
}

}  // namespace

double zeta_from_squares(double s1, double s2, double kappa) noexcept {
  if (kappa == 2.0) return s1 - s2;
  if (kappa == 1.0) return std::sqrt(s1) - std::sqrt(s2);
  const double half = 0.5 * kappa;
  return std::pow(s1, half) - (s2 > 0.0 ? std::pow(s2, half) : 0.0);
}

ChiPath build_zeta(const PathBundle& bundle, const ModelSpec& spec) {
  check_bundle(bundle, spec);
  const auto n = static_cast<std::size_t>(bundle.grid.n);
  const auto m = static_cast<std::size_t>(spec.m);
  ChiPath path;
  path.grid = bundle.grid;
  path.zeta.resize(n);
  path.norms1.assign(n, 0.0);
  path.norms2.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < bundle.components.size(); ++i) {
      const double x = bundle.components[i][j];
      (i < m ? s1 : s2) += x * x;
    }
    path.norms1[j] = std::sqrt(s1);
    path.norms2[j] = std::sqrt(s2);
    path.zeta[j] = std::pow(path.norms1[j], spec.kappa) -
                   std::pow(path.norms2[j], spec.kappa);
  }
  return path;
}

double path_supremum(const ChiPath& path) {
  if (path.zeta.empty()) throw ConfigError("empty path");
  return *std::max_element(path.zeta.begin(), path.zeta.end());
}

double zeta_supremum(const PathBundle& bundle, const ModelSpec& spec) {
  check_bundle(bundle, spec);
  const auto n = static_cast<std::size_t>(bundle.grid.n);
  const auto m = static_cast<std::size_t>(spec.m);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) s1 += bundle.components[i][j] * bundle.components[i][j];
    for (std::size_t i = m; i < bundle.components.size(); ++i) {
      s2 += bundle.components[i][j] * bundle.components[i][j];
    }
    best = std::max(best, zeta_from_squares(s1, s2, spec.kappa));
  }
  return best;
}

double sojourn_above(std::span<const double> values, double h, double u) {
  if (values.empty()) throw ConfigError("empty path");
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    const double a = values[j];
    const double b = values[j + 1];
    const bool above_a = a > u;
    const bool above_b = b > u;
    if (above_a && above_b) {
      total += h;
    } else if (above_a) {
      total += h * (a - u) / (a - b);
    } else if (above_b) {
      total += h * (b - u) / (b - a);
    }
  }
  return total;
}

SojournSample sojourn_time(const ChiPath& path, double u) {
  const double t = path.grid.t_max;
  const double s = sojourn_above(path.zeta, path.grid.h(), u);
  return {u, t, std::clamp(s, 0.0, t)};
}

TwoPointSample sample_two_point(const ModelSpec& spec, double lag,
                                std::size_t count, RngStream& stream) {
  spec.validate();
  if (!(lag > 0.0)) throw ConfigError("lag must be positive");
  const auto d = static_cast<std::size_t>(spec.dimension());
  std::vector<double> r(d);
  std::vector<double> s(d);
  for (std::size_t i = 0; i < d; ++i) {
    r[i] = spec.models[i](lag);
    if (!(std::abs(r[i]) < 1.0)) {
      throw DegenerateError("component " + std::to_string(i) +
                            " has |r(lag)| = 1");
    }
    s[i] = std::sqrt((1.0 - r[i]) * (1.0 + r[i]));
  }
  TwoPointSample out;
  out.lag = lag;
  out.zeta0.resize(count);
  out.zeta_lag.resize(count);
  const auto m = static_cast<std::size_t>(spec.m);
  for (std::size_t c = 0; c < count; ++c) {
    double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double x0 = stream.normal();
      const double xl = r[i] * x0 + s[i] * stream.normal();
      (i < m ? a1 : a2) += x0 * x0;
      (i < m ? b1 : b2) += xl * xl;
    }
    out.zeta0[c] = zeta_from_squares(a1, a2, spec.kappa);
    out.zeta_lag[c] = zeta_from_squares(b1, b2, spec.kappa);
  }
  return out;
}

ExcursionSample conditional_excursion(const ModelSpec& spec, double u,
                                      std::span<const double> t_values,
                                      std::size_t count, RngStream& stream,
                                      std::uint64_t max_draws) {
  spec.validate();
  if (t_values.empty()) throw ConfigError("t_values must not be empty");
  for (std::size_t i = 0; i < t_values.size(); ++i) {
    if (!(t_values[i] > 0.0) || !std::isfinite(t_values[i])) {
      throw ConfigError("t_values must be positive");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (t_values[i] == t_values[j]) throw ConfigError("t_values repeat");
    }
  }
  const double p = tail_oracle(spec.m, spec.k, spec.kappa, u);
  if (p < kExcursionFeasibility) {
    throw InfeasibleError("P(zeta(0) > u) = " + std::to_string(p) +
                          " is below the rejection feasibility guard");
  }
  const ScalingBundle sc = scaling(spec, u);
  const std::size_t nt = t_values.size();
  const auto d = static_cast<std::size_t>(spec.dimension());
  const auto m = static_cast<std::size_t>(spec.m);

  // Per component: Cholesky factor over the times {0, q t_1, ..., q t_n}.
  std::vector<double> times(nt + 1, 0.0);
  for (std::size_t i = 0; i < nt; ++i) times[i + 1] = sc.q * t_values[i];
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(d);
  for (std::size_t c = 0; c < d; ++c) {
    Eigen::MatrixXd R(nt + 1, nt + 1);
    for (std::size_t i = 0; i <= nt; ++i) {
      for (std::size_t j = 0; j <= nt; ++j) {
        R(i, j) = spec.models[c](std::abs(times[i] - times[j]));
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) {
      throw ConfigError("excursion times give a singular covariance");
    }
    factors.push_back(llt.matrixL());
  }

  if (max_draws == 0) {
    max_draws = 100000 + static_cast<std::uint64_t>(
                             std::ceil(20.0 * static_cast<double>(count) / p));
  }

  ExcursionSample out;
  out.u = u;
  out.t_values.assign(t_values.begin(), t_values.end());
  out.values.assign(nt, {});
  for (auto& v : out.values) v.reserve(count);
  out.origin.reserve(count);

  std::vector<double> x0(d);
  std::vector<double> xi(nt + 1);
  std::vector<double> sq1(nt);
  std::vector<double> sq2(nt);
  while (out.accepted < count) {
    if (out.draws >= max_draws) {
      throw InfeasibleError(
          "conditional excursion starved: " + std::to_string(out.accepted) +
          " of " + std::to_string(count) + " accepted after " +
          std::to_string(out.draws) + " draws");
    }
    ++out.draws;
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      x0[c] = stream.normal();
      (c < m ? s1 : s2) += x0[c] * x0[c];
    }
    const double z0 = zeta_from_squares(s1, s2, spec.kappa);
    if (!(z0 > u)) continue;
    ++out.accepted;
    out.origin.push_back(sc.w * (z0 - u));
    std::fill(sq1.begin(), sq1.end(), 0.0);
    std::fill(sq2.begin(), sq2.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      const Eigen::MatrixXd& L = factors[c];
      xi[0] = x0[c];  // L(0, 0) = 1
      for (std::size_t i = 1; i <= nt; ++i) xi[i] = stream.normal();
      for (std::size_t i = 1; i <= nt; ++i) {
        double x = 0.0;
        for (std::size_t j = 0; j <= i; ++j) x += L(i, j) * xi[j];
        (c < m ? sq1 : sq2)[i - 1] += x * x;
      }
    }
    for (std::size_t i = 0; i < nt; ++i) {
      out.values[i].push_back(
          sc.w * (zeta_from_squares(sq1[i], sq2[i], spec.kappa) - u));
    }
  }
  return out;
}

}  // namespace chiext
