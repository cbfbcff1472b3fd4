#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "ffevss/nn/params.hpp"

namespace ffevss::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "name[row,col]" of the worst entry
};

/// Relative error with a small absolute floor, so entries whose true
/// gradient is numerically zero are judged on absolute agreement.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares the gradients already accumulated in `store` against central
/// differences of `loss` at `samples` uniformly drawn scalar entries.
/// `loss` must recompute the forward pass from the current values.
inline GradCheckResult gradient_check(ParamStore& store, const std::function<double()>& loss, std::size_t samples,
                                      std::mt19937_64& rng, double step = 1e-5) {
  GradCheckResult result;
  const std::size_t total = store.scalar_count();
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = pick(rng);
    std::size_t p = 0;
    while (flat >= static_cast<std::size_t>(store[p].value.size())) flat -= static_cast<std::size_t>(store[p++].value.size());
    Parameter& param = store[p];
    const Eigen::Index i = static_cast<Eigen::Index>(flat) % param.value.rows();
    const Eigen::Index j = static_cast<Eigen::Index>(flat) / param.value.rows();
    const double saved = param.value(i, j);
    param.value(i, j) = saved + step;
    const double up = loss();
    param.value(i, j) = saved - step;
    const double down = loss();
    param.value(i, j) = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(param.grad(i, j), numeric);
    ++result.checked;
    if (err >= result.max_relative_error) {
      result.max_relative_error = err;
      result.worst = param.name + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
    }
  }
  return result;
}

}  // namespace ffevss::nn
