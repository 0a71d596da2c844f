#include "chiext/rng.hpp"

#include <cmath>

#include "chiext/error.hpp"

namespace chiext {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t product =
      static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b);
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t stream_id) noexcept
    : key_{static_cast<std::uint32_t>(key),
           static_cast<std::uint32_t>(key >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream_id),
               static_cast<std::uint32_t>(stream_id >> 32)} {}

Philox4x32::Block Philox4x32::encrypt(Block ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

void Philox4x32::refill() noexcept {
  buffer_ = encrypt(counter_, key_);
  // 64-bit block index in the low two words.
  if (++counter_[0] == 0) ++counter_[1];
  next_word_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() noexcept {
  if (next_word_ >= 4) refill();
  const std::uint64_t lo = buffer_[static_cast<std::size_t>(next_word_)];
  const std::uint64_t hi = buffer_[static_cast<std::size_t>(next_word_ + 1)];
  next_word_ += 2;
  return lo | (hi << 32);
}

double RngStream::uniform() noexcept {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() noexcept {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double x, y, s;
  do {
    x = 2.0 * uniform() - 1.0;
    y = 2.0 * uniform() - 1.0;
    s = x * x + y * y;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = y * scale;
  has_cached_normal_ = true;
  return x * scale;
}

double RngStream::exponential() noexcept { return -std::log(uniform_open()); }

double RngStream::gamma(double shape) {
  if (!(shape >= 0.0) || !std::isfinite(shape)) {
    throw ConfigError("gamma shape must be nonnegative and finite");
  }
  if (shape == 0.0) return 0.0;
  // Marsaglia-Tsang for shape >= 1; for shape < 1 sample Gamma(shape + 1)
  // and multiply by U^(1/shape), which is exact.
  const bool boosted = shape < 1.0;
  const double d = (boosted ? shape + 1.0 : shape) - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  double v;
  for (;;) {
    double z;
    do {
      z = normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    const double z2 = z * z;
    if (u < 1.0 - 0.0331 * z2 * z2) break;
    if (std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) break;
  }
  double result = d * v;
  if (boosted) result *= std::pow(uniform_open(), 1.0 / shape);
  return result;
}

void RngStream::unit_sphere(std::span<double> out) noexcept {
  if (out.empty()) return;
  if (out.size() == 1) {
    out[0] = (engine_() >> 63) ? 1.0 : -1.0;
    return;
  }
  double norm2;
  do {
    norm2 = 0.0;
    for (double& x : out) {
      x = normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : out) x *= inv;
}

std::uint64_t RngPolicy::key() const noexcept {
  return splitmix64(splitmix64(master_seed) ^ fnv1a(experiment));
}

RngStream RngPolicy::stream(std::uint64_t replication) const noexcept {
  return RngStream(key(), replication);
}

RngPolicy RngPolicy::derive(std::string_view label) const {
  RngPolicy child = *this;
  child.experiment = experiment + "/" + std::string(label);
  return child;
}

}  // namespace chiext
