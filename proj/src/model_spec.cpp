#include "chiext/model_spec.hpp"

#include <cmath>
#include <string>

#include "chiext/error.hpp"

namespace chiext {

void ModelSpec::validate() const {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (k < 0) throw ConfigError("k must be nonnegative");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw ConfigError("kappa must be positive and finite");
  }
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw ConfigError("alpha must lie in (0, 2]");
  }
  if (models.size() != static_cast<std::size_t>(m + k)) {
    throw ConfigError("expected " + std::to_string(m + k) +
                      " component models, got " +
                      std::to_string(models.size()));
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto exponent = models[i].local_exponent();
    if (!exponent) {
      throw ConfigError("component " + std::to_string(i) +
                        ": tabulated models cannot define an instance");
    }
    if (std::abs(*exponent - alpha) > 1e-12) {
      throw ConfigError("component " + std::to_string(i) + " has alpha " +
                        std::to_string(*exponent) + ", instance alpha is " +
                        std::to_string(alpha));
    }
  }
}

std::vector<double> ModelSpec::coefficients() const {
  std::vector<double> c;
  c.reserve(models.size());
  for (const auto& model : models) c.push_back(model.local_coefficient().value());
  return c;
}

ModelSpec ModelSpec::broadcast(int m, int k, double kappa,
                               const CovarianceModel& model) {
  ModelSpec spec;
  spec.m = m;
  spec.k = k;
  spec.kappa = kappa;
  spec.alpha = model.local_exponent().value_or(0.0);
  if (m + k > 0) spec.models.assign(static_cast<std::size_t>(m + k), model);
  spec.validate();
  return spec;
}

}  // namespace chiext
