#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace chiext {

class RngStream;

/// Exactly rounded floating-point sum (Shewchuk partials). The value does
/// not depend on the order of add() and merge() calls, which keeps
/// parallel reductions bit-identical.
class ExactSum {
 public:
  void add(double x);
  void merge(const ExactSum& other);
  double value() const;

 private:
  std::vector<double> partials_;
};

/// Count, sum and sum of squares; merges associatively and commutatively.
class MomentAccumulator {
 public:
  void add(double x);
  void merge(const MomentAccumulator& other);

  std::uint64_t count() const noexcept { return count_; }
  double sum() const { return sum_.value(); }
  double mean() const;
  /// Unbiased sample variance (0 for fewer than two values).
  double variance() const;
  double stderr() const;

 private:
  std::uint64_t count_ = 0;
  ExactSum sum_;
  ExactSum sum_sq_;
};

struct Interval {
  double low;
  double high;
};

/// 95% Wilson score interval for `successes` out of `trials`.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                         double z = 1.959963984540054);

struct SummaryStats {
  std::uint64_t n = 0;
  double mean = 0.0;
  double stderr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::map<std::string, double> extras;

  /// Normal-theory 95% interval.
  static SummaryStats from_moments(const MomentAccumulator& moments);
  /// Wilson 95% interval for a proportion.
  static SummaryStats from_proportion(std::uint64_t successes,
                                      std::uint64_t trials);
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Permutation p-value of the two-sample KS statistic: (1 + #{D* >= D}) /
/// (1 + permutations).
double ks_permutation_pvalue(std::span<const double> a,
                             std::span<const double> b, int permutations,
                             RngStream& stream);

/// Pool-adjacent-violators fit of a nonincreasing sequence.
std::vector<double> isotonic_nonincreasing(std::span<const double> values);

}  // namespace chiext
