#pragma once

#include <functional>
#include <optional>
#include <span>

#include "chiext/model_spec.hpp"

namespace chiext {

// ---------------------------------------------------------------------------
// Excursion scalings
// ---------------------------------------------------------------------------

/// tau = 2/kappa - 1 for kappa < 1 and 1 otherwise.
double tau_exponent(double kappa);
/// Same, except that a second block of size k = 0 always gives tau = 1
/// (|X|^kappa has the chi-type time scale for every kappa).
double tau_exponent(double kappa, int k);

struct ScalingBundle {
  double tau;
  /// Excursion time scale q(u) = u^(-2 tau / (alpha kappa)).
  double q;
  /// Excursion value scale w(u) = u^(2/kappa - 1) / kappa.
  double w;
};

ScalingBundle scaling(double kappa, double alpha, double u);
ScalingBundle scaling(const ModelSpec& spec, double u);

// ---------------------------------------------------------------------------
// Tail of zeta(0)
// ---------------------------------------------------------------------------

/// Asymptotic P(zeta(0) > u) from the three-branch tail display. For k = 0
/// the exact chi-power asymptotic 2^(1-m/2)/Gamma(m/2) u^((m-2)/kappa)
/// exp(-u^(2/kappa)/2) is returned for every kappa.
double tail_asymptotic(int m, int k, double kappa, double u);

/// The three-branch display taken literally, with Gamma(k/kappa)/Gamma(k/2)
/// read as 1 when k = 0. Differs from tail_asymptotic only for k = 0 and
/// kappa < 2 (by the factor 2/kappa).
double tail_display_literal(int m, int k, double kappa, double u);

inline constexpr double kDefaultQuadratureTolerance = 1e-9;

/// P(zeta(0) > u) by adaptive quadrature over the radius of the second
/// block. Throws NumericError when the error estimate exceeds
/// `relative_tolerance`.
double tail_oracle(int m, int k, double kappa, double u,
                   double relative_tolerance = kDefaultQuadratureTolerance);

/// P(chi_m > x).
double chi_survival(int m, double x);

struct TailEvaluation {
  double u;
  double asymptotic;
  double oracle;
  /// asymptotic / oracle (NaN when the oracle is 0).
  double ratio;
  /// tail_display_literal at the same point; equals asymptotic unless k = 0.
  double literal_display;
};

TailEvaluation evaluate_tail(int m, int k, double kappa, double u,
                             double relative_tolerance =
                                 kDefaultQuadratureTolerance);

/// Threshold u with tail_oracle(u) = p, for p in (0, 1/2].
double threshold_for_tail(int m, int k, double kappa, double p,
                          double relative_tolerance =
                              kDefaultQuadratureTolerance);

// ---------------------------------------------------------------------------
// Supremum asymptotics and bounds
// ---------------------------------------------------------------------------

struct SupProbAsymptotic {
  double value;
  /// Raw (uncapped) T H u^(2 tau/(alpha kappa)) P(zeta(0) > u).
  double raw;
  /// Set when raw > 1 and value was capped at 1.
  bool out_of_regime;
};

SupProbAsymptotic sup_prob_asymptotic(double T, double u, double H,
                                      const ModelSpec& spec);

/// K T u^beta exp(-u^(2/kappa) / 2).
double piterbarg_bound(double T, double u, const ModelSpec& spec, double K,
                       double beta);

// ---------------------------------------------------------------------------
// Gumbel limit
// ---------------------------------------------------------------------------

struct GumbelNorming {
  double a_T;
  double b_T;
  double K0;
  /// D0 used in b_T: (H A)^2 2^K0 with A the tail prefactor.
  double D0;
  /// The four-branch D0 table evaluated literally (k = 0: Gamma ratios -> 1,
  /// kappa^(k/kappa - 1) -> 1/kappa).
  double D0_table;
  double H_used;
};

double norming_K0(int m, int k, double kappa, double alpha);
double norming_D0_table(int m, int k, double kappa, double alpha, double H);
/// Constant A of P(zeta(0) > u) ~ A u^beta exp(-u^(2/kappa)/2).
double tail_prefactor(int m, int k, double kappa);

/// Requires T > e^e.
GumbelNorming gumbel_norming(double T, const ModelSpec& spec, double H);

double gumbel_cdf(double x);

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// `samples` and `cdf`.
double ks_distance(std::span<const double> samples,
                   const std::function<double(double)>& cdf);

struct MomentEstimate {
  double value;
  double stderr;
};

/// Sample mean of (M / (2 ln T)^(kappa/2))^p over the maxima.
MomentEstimate seleznjev_moment(std::span<const double> maxima, double T,
                                double kappa, double p);

}  // namespace chiext
