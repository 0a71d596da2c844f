#include <doctest.h>

#include <cmath>
#include <vector>

#include "chiext/rng.hpp"
#include "chiext/stats.hpp"

using namespace chiext;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using B = Philox4x32::Block;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::encrypt(B{0, 0, 0, 0}, K{0, 0}) ==
        B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::encrypt(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                            K{0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::encrypt(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                            K{0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  RngPolicy policy{123, "exp"};
  auto a = policy.stream(5);
  auto b = policy.stream(5);
  auto c = policy.stream(6);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    all_equal = all_equal && x == b();
    any_diff = any_diff || x != c();
  }
  CHECK(all_equal);
  CHECK(any_diff);
  CHECK(policy.key() != policy.derive("other").key());
  CHECK(policy.key() != RngPolicy{124, "exp"}.key());
}

TEST_CASE("uniform and normal moments") {
  RngStream s(1, 1);
  MomentAccumulator u, z, e;
  for (int i = 0; i < 200000; ++i) {
    const double x = s.uniform();
    CHECK_UNARY(x >= 0.0);
    CHECK_UNARY(x < 1.0);
    u.add(x);
    z.add(s.normal());
    e.add(s.exponential());
  }
  CHECK(std::abs(u.mean() - 0.5) < 4 * u.stderr());
  CHECK(std::abs(z.mean()) < 4 * z.stderr());
  CHECK(std::abs(z.variance() - 1.0) < 4 * std::sqrt(2.0 / 200000));
  CHECK(std::abs(e.mean() - 1.0) < 4 * e.stderr());
}

TEST_CASE("gamma sampler moments include shape below one") {
  for (double shape : {0.25, 0.5, 1.0 / 3.0, 1.0, 2.5, 7.0}) {
    RngStream s(9, static_cast<std::uint64_t>(shape * 1000));
    MomentAccumulator acc;
    const int n = 200000;
    for (int i = 0; i < n; ++i) acc.add(s.gamma(shape));
    // Var(X) = s, Var(X^2 sample) from the fourth moment s(s+1)(s+2)(s+3).
    CHECK(std::abs(acc.mean() - shape) < 4 * std::sqrt(shape / n));
    const double m4 = shape * (shape + 1) * (shape + 2) * (shape + 3);
    const double sd_var = std::sqrt((m4 - shape * shape * (shape + 1) * (shape + 1)) / n);
    CHECK(std::abs(acc.variance() - shape) < 4 * sd_var + 4 * std::sqrt(shape / n));
  }
  RngStream s(1, 2);
  CHECK(s.gamma(0.0) == 0.0);
}

TEST_CASE("unit sphere points") {
  RngStream s(4, 4);
  int plus = 0;
  for (int i = 0; i < 10000; ++i) {
    double one[1];
    s.unit_sphere(one);
    CHECK(std::abs(one[0]) == 1.0);
    plus += one[0] > 0 ? 1 : 0;
  }
  CHECK(std::abs(plus - 5000) < 4 * 50);
  MomentAccumulator c0;
  for (int i = 0; i < 50000; ++i) {
    double v[3];
    s.unit_sphere(v);
    CHECK(std::hypot(v[0], v[1], v[2]) == doctest::Approx(1.0).epsilon(1e-12));
    c0.add(v[0] * v[0]);
  }
  // E[O_1^2] = 1/3 on the sphere of R^3.
  CHECK(std::abs(c0.mean() - 1.0 / 3.0) < 4 * c0.stderr());
}
