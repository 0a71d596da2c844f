#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chiext/gaussian_sim.hpp"
#include "chiext/model_spec.hpp"
#include "chiext/rng.hpp"

namespace chiext {

/// zeta(t) = |X1(t)|^kappa - |X2(t)|^kappa on a grid, with both norms.
struct ChiPath {
  Grid grid;
  std::vector<double> zeta;
  std::vector<double> norms1;
  std::vector<double> norms2;  // all zero when k = 0
};

ChiPath build_zeta(const PathBundle& bundle, const ModelSpec& spec);

/// Grid maximum of zeta.
double path_supremum(const ChiPath& path);

/// max_j zeta(jh) straight from a bundle, without materializing the path.
double zeta_supremum(const PathBundle& bundle, const ModelSpec& spec);

/// zeta at one grid point from the squared block norms.
double zeta_from_squares(double s1, double s2, double kappa) noexcept;

struct SojournSample {
  double u;
  double t;
  double sojourn;
};

SojournSample sojourn_time(const ChiPath& path, double u);

/// Time spent above u by the piecewise-linear interpolant of `values` on a
/// grid of spacing h: cells with one endpoint above u contribute the part
/// to the crossing point.
double sojourn_above(std::span<const double> values, double h, double u);

struct TwoPointSample {
  double lag;
  std::vector<double> zeta0;
  std::vector<double> zeta_lag;
};

/// Exact draws of (zeta(0), zeta(lag)); each component pair is bivariate
/// normal with correlation r_i(lag).
TwoPointSample sample_two_point(const ModelSpec& spec, double lag,
                                std::size_t count, RngStream& stream);

struct ExcursionSample {
  double u;
  /// Times t (in units of q(u)).
  std::vector<double> t_values;
  /// w(u) (zeta(0) - u) for each accepted draw.
  std::vector<double> origin;
  /// values[i][j] = w(u) (zeta(q t_i) - u) for accepted draw j.
  std::vector<std::vector<double>> values;
  std::uint64_t draws = 0;
  std::uint64_t accepted = 0;
  double acceptance_rate() const noexcept {
    return draws == 0 ? 0.0 : static_cast<double>(accepted) / draws;
  }
};

/// Thresholds whose exceedance probability is below this are refused.
inline constexpr double kExcursionFeasibility = 1e-6;

/// Draws of the rescaled excursion at times q(u) t given zeta(0) > u, by
/// rejection on zeta(0). The component vectors at the remaining times are
/// drawn conditionally (Cholesky), so each accepted draw is an exact joint
/// sample. `max_draws` = 0 picks a budget from the tail probability; if it
/// runs out, InfeasibleError.
ExcursionSample conditional_excursion(const ModelSpec& spec, double u,
                                      std::span<const double> t_values,
                                      std::size_t count, RngStream& stream,
                                      std::uint64_t max_draws = 0);

}  // namespace chiext
