#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "chiext/covariance.hpp"
#include "chiext/model_spec.hpp"
#include "chiext/rng.hpp"

namespace chiext {

/// Uniform grid {0, h, ..., t_max} with n points.
struct Grid {
  double t_max = 1.0;
  int n = 2;

  /// Validates t_max > 0 and n >= 2.
  static Grid make(double t_max, int n);
  /// Smallest grid on [0, t_max] whose mesh does not exceed `max_mesh`.
  static Grid with_mesh(double t_max, double max_mesh);

  double h() const noexcept { return t_max / (n - 1); }
  double point(int j) const noexcept { return j * h(); }
};

inline constexpr double kDefaultClipTolerance = 1e-8;

namespace detail {
class FftPlan;
}

/// Eigen-decomposition of the circulant extension of a stationary
/// covariance sampled on a grid. Immutable after construction and safe to
/// share between threads.
class CirculantEmbedding {
 public:
  /// `row` holds the autocovariance at lags 0..L-1; the circulant has size
  /// M = 2(L-1). Samples are the first `path_length` values (default L).
  /// Throws NonEmbeddableError if the negative eigenvalues carry more than
  /// `tolerance` of the total l1 mass.
  static CirculantEmbedding from_autocovariance(std::span<const double> row,
                                                double tolerance,
                                                std::size_t path_length = 0);

  /// Number of lags (path length) produced per sample.
  std::size_t path_length() const noexcept { return path_length_; }
  /// Circulant size M.
  std::size_t size() const noexcept { return eigenvalues_.size(); }
  /// Clipped eigenvalues, all >= 0.
  const std::vector<double>& eigenvalues() const noexcept {
    return eigenvalues_;
  }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  double clip_mass() const noexcept { return clip_mass_; }

  /// Two independent paths of length path_length() from one transform.
  /// Each output span must have at least path_length() elements.
  void sample_pair(RngStream& stream, std::span<double> first,
                   std::span<double> second) const;

 private:
  CirculantEmbedding() = default;

  std::size_t path_length_ = 0;
  std::vector<double> eigenvalues_;
  std::vector<double> amplitudes_;  // sqrt(lambda / M)
  double min_eigenvalue_ = 0.0;
  double clip_mass_ = 0.0;
  std::shared_ptr<const detail::FftPlan> plan_;
};

/// Embedding of `model` on `grid`. `min_size` optionally enlarges the
/// circulant (rounded up to an even size) by padding with the covariance's
/// own values r(jh) at the extra lags.
CirculantEmbedding build_embedding(const CovarianceModel& model,
                                   const Grid& grid,
                                   double tolerance = kDefaultClipTolerance,
                                   std::size_t min_size = 0);

/// `count` independent paths; consecutive pairs share one transform.
std::vector<std::vector<double>> sample_paths(
    const CirculantEmbedding& embedding, std::size_t count,
    RngStream& stream);

/// Values of X_1, ..., X_{m+k} on a common grid.
struct PathBundle {
  Grid grid;
  std::vector<std::vector<double>> components;
};

/// Samples bundles for a ModelSpec. Components with identical covariance
/// models share one embedding, and are drawn in pairs.
class BundleSampler {
 public:
  BundleSampler(const ModelSpec& spec, const Grid& grid,
                double tolerance = kDefaultClipTolerance);

  const Grid& grid() const noexcept { return grid_; }
  std::size_t dimension() const noexcept { return slot_.size(); }

  PathBundle sample(RngStream& stream) const;
  /// In-place variant reusing the storage of `bundle`.
  void sample_into(RngStream& stream, PathBundle& bundle) const;

 private:
  Grid grid_;
  std::vector<CirculantEmbedding> embeddings_;
  std::vector<std::size_t> slot_;  // component -> embedding index
};

/// Fractional Brownian motion Z(a), Z(2a), ..., Z(Ja) with Hurst index H in
/// (0, 1]. H = 1 is the degenerate line Z(t) = t xi.
class FbmGenerator {
 public:
  FbmGenerator(double hurst, std::size_t J);

  double hurst() const noexcept { return hurst_; }
  std::size_t length() const noexcept { return J_; }

  std::vector<double> sample(double a, RngStream& stream) const;
  /// Two independent paths; spans must hold length() values.
  void sample_pair(double a, RngStream& stream, std::span<double> first,
                   std::span<double> second) const;

 private:
  double hurst_;
  std::size_t J_;
  std::shared_ptr<const CirculantEmbedding> noise_;  // fGn, when needed
};

std::vector<double> sample_fbm(double hurst, double a, std::size_t J,
                               RngStream& stream);

}  // namespace chiext
