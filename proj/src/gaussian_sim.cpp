#include "chiext/gaussian_sim.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>
#include <limits>
#include <type_traits>

#include "chiext/error.hpp"

namespace chiext {

namespace detail {

// FFTW's planner is not thread-safe; execution with the new-array interface
// is. Plans are created once per embedding and shared.
std::mutex& fftw_planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~ComplexBuffer() { fftw_free(data); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;

  fftw_complex* data;
};

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    ComplexBuffer scratch(n);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), scratch.data, scratch.data,
                             FFTW_FORWARD, FFTW_ESTIMATE);
    if (plan_ == nullptr) throw NumericError("FFTW planning failed");
  }
  ~FftPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const noexcept { return n_; }

  // In-place forward transform; `buffer` must come from fftw_malloc.
  void execute(fftw_complex* buffer) const {
    fftw_execute_dft(plan_, buffer, buffer);
  }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

}  // namespace detail

Grid Grid::make(double t_max, int n) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw ConfigError("grid t_max must be positive and finite");
  }
  if (n < 2) throw ConfigError("grid needs at least two points");
  return Grid{t_max, n};
}

Grid Grid::with_mesh(double t_max, double max_mesh) {
  if (!(max_mesh > 0.0)) throw ConfigError("mesh must be positive");
  const double cells = std::ceil(t_max / max_mesh - 1e-9);
  if (!(cells < 2e9)) throw ConfigError("grid would be too large");
  return make(t_max, std::max(2, static_cast<int>(cells) + 1));
}

CirculantEmbedding CirculantEmbedding::from_autocovariance(
    std::span<const double> row, double tolerance, std::size_t path_length) {
  if (row.size() < 2) throw ConfigError("embedding needs at least two lags");
  if (path_length == 0) path_length = row.size();
  if (path_length > row.size()) {
    throw ConfigError("path length exceeds the embedded lags");
  }
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be nonnegative");
  const std::size_t L = row.size();
  const std::size_t M = 2 * (L - 1);

  auto plan = std::make_shared<const detail::FftPlan>(M);
  detail::ComplexBuffer buf(M);
  for (std::size_t j = 0; j < M; ++j) {
    buf.data[j][0] = j < L ? row[j] : row[M - j];
    buf.data[j][1] = 0.0;
  }
  plan->execute(buf.data);

  CirculantEmbedding e;
  e.path_length_ = path_length;
  e.eigenvalues_.resize(M);
  double total = 0.0;
  double negative = 0.0;
  double min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < M; ++j) {
    // The row is real and symmetric, so the spectrum is real.
    const double lambda = buf.data[j][0];
    min_eig = std::min(min_eig, lambda);
    total += std::abs(lambda);
    if (lambda < 0.0) negative -= lambda;
    e.eigenvalues_[j] = std::max(lambda, 0.0);
  }
  e.min_eigenvalue_ = min_eig;
  e.clip_mass_ = total > 0.0 ? negative / total : 0.0;
  if (!(total > 0.0) || e.clip_mass_ > tolerance) {
    throw NonEmbeddableError(min_eig, e.clip_mass_);
  }
  e.amplitudes_.resize(M);
  for (std::size_t j = 0; j < M; ++j) {
    e.amplitudes_[j] = std::sqrt(e.eigenvalues_[j] / static_cast<double>(M));
  }
  e.plan_ = std::move(plan);
  return e;
}

void CirculantEmbedding::sample_pair(RngStream& stream,
                                     std::span<double> first,
                                     std::span<double> second) const {
  if (first.size() < path_length_ || second.size() < path_length_) {
    throw ConfigError("sample_pair output too short");
  }
  const std::size_t M = size();
  detail::ComplexBuffer buf(M);
  for (std::size_t j = 0; j < M; ++j) {
    const double re = stream.normal();
    const double im = stream.normal();
    buf.data[j][0] = amplitudes_[j] * re;
    buf.data[j][1] = amplitudes_[j] * im;
  }
  plan_->execute(buf.data);
  for (std::size_t j = 0; j < path_length_; ++j) {
    first[j] = buf.data[j][0];
    second[j] = buf.data[j][1];
  }
}

CirculantEmbedding build_embedding(const CovarianceModel& model,
                                   const Grid& grid, double tolerance,
                                   std::size_t min_size) {
  if (grid.n < 2) throw ConfigError("grid needs at least two points");
  std::size_t M = 2 * static_cast<std::size_t>(grid.n - 1);
  if (min_size > M) M = min_size + (min_size % 2);
  const std::size_t L = M / 2 + 1;
  std::vector<double> row(L);
  const double h = grid.h();
  for (std::size_t j = 0; j < L; ++j) {
    row[j] = model(static_cast<double>(j) * h);
  }
  return CirculantEmbedding::from_autocovariance(
      row, tolerance, static_cast<std::size_t>(grid.n));
}

std::vector<std::vector<double>> sample_paths(
    const CirculantEmbedding& embedding, std::size_t count,
    RngStream& stream) {
  std::vector<std::vector<double>> paths;
  paths.reserve(count + 1);
  const std::size_t n = embedding.path_length();
  while (paths.size() < count) {
    std::vector<double> a(n);
    std::vector<double> b(n);
    embedding.sample_pair(stream, a, b);
    paths.push_back(std::move(a));
    if (paths.size() < count) paths.push_back(std::move(b));
  }
  return paths;
}

namespace {

bool same_model(const CovarianceModel& a, const CovarianceModel& b) {
  return std::visit(
      [](const auto& x, const auto& y) {
        using X = std::decay_t<decltype(x)>;
        using Y = std::decay_t<decltype(y)>;
        if constexpr (!std::is_same_v<X, Y>) {
          return false;
        } else if constexpr (std::is_same_v<X, PowerExponential>) {
          return x.C == y.C && x.alpha == y.alpha;
        } else if constexpr (std::is_same_v<X, GeneralizedCauchy>) {
          return x.C == y.C && x.alpha == y.alpha && x.gamma == y.gamma;
        } else {
          return x.lags == y.lags && x.values == y.values;
        }
      },
      a.family(), b.family());
}

}  // namespace

BundleSampler::BundleSampler(const ModelSpec& spec, const Grid& grid,
                             double tolerance)
    : grid_(grid) {
  if (spec.models.size() != static_cast<std::size_t>(spec.dimension())) {
    throw ConfigError("spec has " + std::to_string(spec.models.size()) +
                      " models for " + std::to_string(spec.dimension()) +
                      " components");
  }
  std::vector<const CovarianceModel*> distinct;
  for (const auto& model : spec.models) {
    std::size_t idx = 0;
    while (idx < distinct.size() && !same_model(*distinct[idx], model)) ++idx;
    if (idx == distinct.size()) {
      distinct.push_back(&model);
      embeddings_.push_back(build_embedding(model, grid, tolerance));
    }
    slot_.push_back(idx);
  }
}

PathBundle BundleSampler::sample(RngStream& stream) const {
  PathBundle bundle;
  sample_into(stream, bundle);
  return bundle;
}

void BundleSampler::sample_into(RngStream& stream, PathBundle& bundle) const {
  const auto n = static_cast<std::size_t>(grid_.n);
  bundle.grid = grid_;
  bundle.components.resize(slot_.size());
  for (auto& c : bundle.components) c.resize(n);
  // Walk components in order; the second path of a transform goes to the
  // next component that uses the same embedding.
  std::vector<std::size_t> pending(embeddings_.size(), slot_.size());
  std::vector<double> spare(n);
  for (std::size_t i = 0; i < slot_.size(); ++i) {
    const std::size_t e = slot_[i];
    if (pending[e] != slot_.size()) {
      pending[e] = slot_.size();
      continue;  // already filled
    }
    std::size_t partner = slot_.size();
    for (std::size_t j = i + 1; j < slot_.size(); ++j) {
      if (slot_[j] == e) {
        partner = j;
        break;
      }
    }
    if (partner != slot_.size()) {
      embeddings_[e].sample_pair(stream, bundle.components[i],
                                 bundle.components[partner]);
      pending[e] = partner;
    } else {
      embeddings_[e].sample_pair(stream, bundle.components[i], spare);
    }
  }
}

FbmGenerator::FbmGenerator(double hurst, std::size_t J)
    : hurst_(hurst), J_(J) {
  if (!(hurst > 0.0 && hurst <= 1.0)) {
    throw ConfigError("Hurst index must lie in (0, 1]");
  }
  if (J == 0) throw ConfigError("fBm needs at least one point");
  if (hurst == 1.0 || hurst == 0.5 || J == 1) return;
  // Autocovariance of unit-spaced fractional Gaussian noise.
  std::vector<double> gamma(J);
  const double two_h = 2.0 * hurst;
  for (std::size_t j = 0; j < J; ++j) {
    const double x = static_cast<double>(j);
    gamma[j] = 0.5 * (std::pow(x + 1.0, two_h) - 2.0 * std::pow(x, two_h) +
                      std::pow(std::abs(x - 1.0), two_h));
  }
  noise_ = std::make_shared<const CirculantEmbedding>(
      CirculantEmbedding::from_autocovariance(gamma, kDefaultClipTolerance));
}

std::vector<double> FbmGenerator::sample(double a, RngStream& stream) const {
  std::vector<double> first(J_);
  std::vector<double> second(J_);
  sample_pair(a, stream, first, second);
  return first;
}

void FbmGenerator::sample_pair(double a, RngStream& stream,
                               std::span<double> first,
                               std::span<double> second) const {
  if (!(a > 0.0)) throw ConfigError("fBm step must be positive");
  if (first.size() < J_ || second.size() < J_) {
    throw ConfigError("fBm output too short");
  }
  if (hurst_ == 1.0) {
    const double xi1 = stream.normal();
    const double xi2 = stream.normal();
    for (std::size_t j = 0; j < J_; ++j) {
      const double t = a * static_cast<double>(j + 1);
      first[j] = t * xi1;
      second[j] = t * xi2;
    }
    return;
  }
  if (noise_) {
    noise_->sample_pair(stream, first, second);
  } else {
    for (std::size_t j = 0; j < J_; ++j) {
      first[j] = stream.normal();
      second[j] = stream.normal();
    }
  }
  // Cumulative sum of the noise, then self-similarity Z(a.) = a^H Z(.).
  const double scale = std::pow(a, hurst_);
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t j = 0; j < J_; ++j) {
    s1 += first[j];
    s2 += second[j];
    first[j] = scale * s1;
    second[j] = scale * s2;
  }
}

std::vector<double> sample_fbm(double hurst, double a, std::size_t J,
                               RngStream& stream) {
  return FbmGenerator(hurst, J).sample(a, stream);
}

}  // namespace chiext
