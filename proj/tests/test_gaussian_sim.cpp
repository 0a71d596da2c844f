#include <doctest.h>

#include <cmath>
#include <vector>

#include "chiext/error.hpp"
#include "chiext/gaussian_sim.hpp"
#include "chiext/stats.hpp"

using namespace chiext;

TEST_CASE("grid") {
  const auto g = Grid::make(10.0, 101);
  CHECK(g.h() == doctest::Approx(0.1));
  CHECK(g.point(100) == doctest::Approx(10.0));
  CHECK(Grid::with_mesh(5.0, 0.1).n == 51);
  CHECK(Grid::with_mesh(5.0, 0.3).h() <= 0.3);
  CHECK_THROWS_AS(Grid::make(1.0, 1), ConfigError);
  CHECK_THROWS_AS(Grid::make(-1.0, 5), ConfigError);
}

TEST_CASE("two-point embedding") {
  const auto model = CovarianceModel::power_exponential(1.0, 1.0);
  const auto e = build_embedding(model, Grid::make(0.5, 2));
  REQUIRE(e.size() == 2);
  const double r = model(0.5);
  CHECK(e.eigenvalues()[0] == doctest::Approx(1 + r));
  CHECK(e.eigenvalues()[1] == doctest::Approx(1 - r));
}

TEST_CASE("exponential covariance embeds without clipping") {
  const auto e = build_embedding(CovarianceModel::power_exponential(1.0, 1.0),
                                 Grid::make(10.0, 1024));
  CHECK(e.size() == 2046);
  CHECK(e.clip_mass() == 0.0);
  CHECK(e.min_eigenvalue() > 0.0);
}

TEST_CASE("indefinite tables are refused") {
  std::vector<double> lags, values;
  for (int j = 0; j < 9; ++j) {
    lags.push_back(j);
    values.push_back(j == 8 ? -1.0 : 1.0);
  }
  const auto tab = CovarianceModel::tabulated(lags, values);
  CHECK_THROWS_AS(build_embedding(tab, Grid::make(8.0, 9)), NonEmbeddableError);
  try {
    build_embedding(tab, Grid::make(8.0, 9));
  } catch (const NonEmbeddableError& e) {
    CHECK(e.min_eigenvalue() < 0.0);
    CHECK(e.clip_mass() > kDefaultClipTolerance);
  }
}

TEST_CASE("padding uses the covariance's own values") {
  const auto model = CovarianceModel::generalized_cauchy(1.0, 1.0, 0.5);
  const auto e = build_embedding(model, Grid::make(10.0, 101), kDefaultClipTolerance, 1000);
  CHECK(e.size() == 1000);
  CHECK(e.path_length() == 101);
}

TEST_CASE("sampled paths have the model covariance") {
  const auto model = CovarianceModel::power_exponential(1.0, 1.0);
  const auto grid = Grid::make(3.0, 31);
  const auto e = build_embedding(model, grid);
  RngStream s(5, 5);
  const int n = 100000;
  const auto paths = sample_paths(e, n, s);
  REQUIRE(paths.size() == static_cast<std::size_t>(n));
  for (int lag : {0, 1, 5, 20}) {
    MomentAccumulator acc;
    for (const auto& p : paths) acc.add(p[3] * p[3 + lag]);
    CHECK(std::abs(acc.mean() - model(lag * grid.h())) < 4 * acc.stderr());
  }
}

TEST_CASE("sampling is deterministic in the stream") {
  const auto e = build_embedding(CovarianceModel::power_exponential(2.0, 1.5),
                                 Grid::make(5.0, 64));
  RngStream a(11, 3), b(11, 3);
  CHECK(sample_paths(e, 3, a) == sample_paths(e, 3, b));
}

TEST_CASE("bundle components are independent") {
  const auto spec = ModelSpec::broadcast(2, 1, 1.0, CovarianceModel::power_exponential(1, 1));
  const BundleSampler sampler(spec, Grid::make(2.0, 21));
  RngStream s(8, 8);
  MomentAccumulator c01, c02, v2;
  for (int i = 0; i < 40000; ++i) {
    const auto b = sampler.sample(s);
    REQUIRE(b.components.size() == 3);
    c01.add(b.components[0][4] * b.components[1][4]);
    c02.add(b.components[0][4] * b.components[2][4]);
    v2.add(b.components[2][10] * b.components[2][10]);
  }
  CHECK(std::abs(c01.mean()) < 4 * c01.stderr());
  CHECK(std::abs(c02.mean()) < 4 * c02.stderr());
  CHECK(std::abs(v2.mean() - 1.0) < 4 * v2.stderr());
}

TEST_CASE("fBm covariance identity") {
  for (double H : {0.25, 0.5, 0.75, 0.95}) {
    const double a = 0.5;
    FbmGenerator gen(H, 8);
    RngStream s(21, static_cast<std::uint64_t>(H * 100));
    MomentAccumulator v, c13, c38;
    for (int i = 0; i < 100000; ++i) {
      const auto z = gen.sample(a, s);
      v.add(z[7] * z[7]);
      c13.add(z[0] * z[2]);
      c38.add(z[2] * z[7]);
    }
    const auto cov = [&](double x, double y) {
      return 0.5 * (std::pow(x, 2 * H) + std::pow(y, 2 * H) -
                    std::pow(std::abs(x - y), 2 * H));
    };
    CHECK(std::abs(v.mean() - std::pow(4.0, 2 * H)) < 4 * v.stderr());
    CHECK(std::abs(c13.mean() - cov(0.5, 1.5)) < 4 * c13.stderr());
    CHECK(std::abs(c38.mean() - cov(1.5, 4.0)) < 4 * c38.stderr());
  }
}

TEST_CASE("Brownian increments are independent N(0, a)") {
  FbmGenerator gen(0.5, 6);
  RngStream s(2, 2);
  MomentAccumulator var, cross;
  for (int i = 0; i < 50000; ++i) {
    const auto z = gen.sample(0.3, s);
    const double d1 = z[1] - z[0], d2 = z[4] - z[3];
    var.add(d1 * d1);
    cross.add(d1 * d2);
  }
  CHECK(std::abs(var.mean() - 0.3) < 4 * var.stderr());
  CHECK(std::abs(cross.mean()) < 4 * cross.stderr());
}

TEST_CASE("Hurst one is a random line") {
  RngStream a(1, 9), b(1, 9);
  const auto z = sample_fbm(1.0, 0.5, 4, a);
  const double xi = b.normal();
  CHECK(z == std::vector<double>{0.5 * xi, 1.0 * xi, 1.5 * xi, 2.0 * xi});
  CHECK_THROWS_AS(FbmGenerator(1.2, 4), ConfigError);
  CHECK_THROWS_AS(FbmGenerator(0.0, 4), ConfigError);
}
