#include "chiext/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chiext/error.hpp"
#include "chiext/rng.hpp"

namespace chiext {

void ExactSum::add(double x) {
  if (!std::isfinite(x)) {
    throw NumericError("ExactSum::add received a non-finite value");
  }
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::abs(x) < std::abs(y)) std::swap(x, y);
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) partials_[i++] = lo;
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

void ExactSum::merge(const ExactSum& other) {
  for (double p : other.partials_) add(p);
}

double ExactSum::value() const {
  // Round the exact sum of the nonoverlapping partials to nearest, as in
  // CPython's math.fsum.
  if (partials_.empty()) return 0.0;
  std::size_t n = partials_.size();
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    const double yr = x - hi;
    if (y == yr) hi = x;
  }
  return hi;
}

void MomentAccumulator::add(double x) {
  ++count_;
  sum_.add(x);
  sum_sq_.add(x * x);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  count_ += other.count_;
  sum_.merge(other.sum_);
  sum_sq_.merge(other.sum_sq_);
}

double MomentAccumulator::mean() const {
  return count_ == 0 ? 0.0 : sum_.value() / static_cast<double>(count_);
}

double MomentAccumulator::variance() const {
  if (count_ < 2) return 0.0;
  // Centered form via the exact sums: sum x^2 - (sum x)^2 / n.
  ExactSum centered = sum_sq_;
  const double s = sum_.value();
  centered.add(-s * (s / static_cast<double>(count_)));
  return std::max(0.0, centered.value() / static_cast<double>(count_ - 1));
}

double MomentAccumulator::stderr() const {
  return count_ == 0 ? 0.0
                     : std::sqrt(variance() / static_cast<double>(count_));
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                         double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {successes == 0 ? 0.0 : std::max(0.0, center - half),
          successes == trials ? 1.0 : std::min(1.0, center + half)};
}

SummaryStats SummaryStats::from_moments(const MomentAccumulator& moments) {
  SummaryStats s;
  s.n = moments.count();
  s.mean = moments.mean();
  s.stderr = moments.stderr();
  s.ci_low = s.mean - 1.959963984540054 * s.stderr;
  s.ci_high = s.mean + 1.959963984540054 * s.stderr;
  return s;
}

SummaryStats SummaryStats::from_proportion(std::uint64_t successes,
                                           std::uint64_t trials) {
  SummaryStats s;
  s.n = trials;
  const double n = static_cast<double>(trials);
  s.mean = trials == 0 ? 0.0 : static_cast<double>(successes) / n;
  s.stderr = trials == 0 ? 0.0 : std::sqrt(s.mean * (1.0 - s.mean) / n);
  const Interval ci = wilson_interval(successes, trials);
  // Wilson intervals always contain the point estimate.
  s.ci_low = std::min(ci.low, s.mean);
  s.ci_high = std::max(ci.high, s.mean);
  return s;
}

namespace {

double ks_sorted(std::span<const double> a, std::span<const double> b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_two_sample needs samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return ks_sorted(sa, sb);
}

double ks_permutation_pvalue(std::span<const double> a,
                             std::span<const double> b, int permutations,
                             RngStream& stream) {
  if (permutations < 1) throw ConfigError("need at least one permutation");
  const double observed = ks_two_sample(a, b);
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    // Fisher-Yates with the library stream (std::shuffle's use of the
    // engine is implementation-defined).
    for (std::size_t i = pooled.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(stream.uniform() *
                                              static_cast<double>(i + 1));
      std::swap(pooled[i], pooled[std::min(j, i)]);
    }
    std::vector<double> pa(pooled.begin(),
                           pooled.begin() + static_cast<std::ptrdiff_t>(a.size()));
    std::vector<double> pb(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()),
                           pooled.end());
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    if (ks_sorted(pa, pb) >= observed) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + permutations);
}

std::vector<double> isotonic_nonincreasing(std::span<const double> values) {
  // Pool adjacent violators on blocks of (mean, weight).
  std::vector<double> means;
  std::vector<std::size_t> weights;
  for (double v : values) {
    means.push_back(v);
    weights.push_back(1);
    while (means.size() > 1 && means[means.size() - 2] < means.back()) {
      const std::size_t w1 = weights[weights.size() - 2];
      const std::size_t w2 = weights.back();
      const double merged = (means[means.size() - 2] * static_cast<double>(w1) +
                             means.back() * static_cast<double>(w2)) /
                            static_cast<double>(w1 + w2);
      means.pop_back();
      weights.pop_back();
      means.back() = merged;
      weights.back() = w1 + w2;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t b = 0; b < means.size(); ++b) {
    out.insert(out.end(), weights[b], means[b]);
  }
  return out;
}

}  // namespace chiext
