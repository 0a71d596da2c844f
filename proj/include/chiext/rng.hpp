#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>

namespace chiext {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The
/// 128-bit counter is split into a 64-bit block index and a 64-bit stream
/// id, so every (key, stream id) pair owns a disjoint counter range.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t key, std::uint64_t stream_id) noexcept;

  /// The raw bijection: ten rounds over `counter` under `key`.
  static Block encrypt(Block counter, Key key) noexcept;

  result_type operator()() noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

 private:
  void refill() noexcept;

  Key key_;
  Block counter_;
  Block buffer_{};
  int next_word_ = 4;
};

/// One owned stream of random variates. Not thread-safe; each worker (and
/// each replication) gets its own.
class RngStream {
 public:
  using result_type = Philox4x32::result_type;

  RngStream(std::uint64_t key, std::uint64_t stream_id) noexcept
      : engine_(key, stream_id) {}

  result_type operator()() noexcept { return engine_(); }
  static constexpr result_type min() noexcept { return Philox4x32::min(); }
  static constexpr result_type max() noexcept { return Philox4x32::max(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1).
  double uniform_open() noexcept;
  /// Standard normal (Marsaglia polar method, pairs cached).
  double normal() noexcept;
  /// Unit-mean exponential.
  double exponential() noexcept;
  /// Gamma(shape, 1), shape >= 0; shape == 0 returns 0.
  double gamma(double shape);
  /// Fills `out` with a point uniform on the unit sphere of R^out.size().
  /// For size 1 this is a fair random sign.
  void unit_sphere(std::span<double> out) noexcept;

 private:
  Philox4x32 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derivation of replication substreams from (master seed, experiment id,
/// replication index). Results that depend only on the per-replication
/// streams are independent of how replications are scheduled.
struct RngPolicy {
  std::uint64_t master_seed = 0;
  std::string experiment = "default";

  std::uint64_t key() const noexcept;
  RngStream stream(std::uint64_t replication) const noexcept;
  /// Same master seed, different experiment label.
  RngPolicy derive(std::string_view label) const;
};

}  // namespace chiext
