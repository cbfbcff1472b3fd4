#include "ffevss/nn/params.hpp"

#include <cmath>
#include <sstream>

#include "ffevss/errors.hpp"

namespace ffevss::nn {

std::size_t ParamStore::add(const std::string& name, Matrix value) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter " + name);
  Parameter p;
  p.name = name;
  p.grad = Matrix::Zero(value.rows(), value.cols());
  p.first_moment = p.grad;
  p.second_moment = p.grad;
  p.value = std::move(value);
  params_.push_back(std::move(p));
  by_name_.emplace(name, params_.size() - 1);
  return params_.size() - 1;
}

std::size_t ParamStore::add_weight(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  // Column-major fill keeps the draw order independent of Eigen internals.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = dist(rng_);
  return add(name, std::move(w));
}

std::size_t ParamStore::add_bias(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

std::size_t ParamStore::index(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter " + std::string(name));
  return it->second;
}

bool ParamStore::contains(std::string_view name) const { return by_name_.find(name) != by_name_.end(); }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParamStore::check_finite() const {
  for (const auto& p : params_)
    if (!p.value.allFinite()) throw NumericError("non-finite value in parameter " + p.name);
}

void ParamStore::check_finite_grad() const {
  for (const auto& p : params_)
    if (!p.grad.allFinite()) throw NumericError("non-finite gradient in parameter " + p.name);
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

std::string ParamStore::rng_state() const {
  std::ostringstream out;
  out << rng_;
  return out.str();
}

void ParamStore::set_rng_state(const std::string& state) {
  std::istringstream in(state);
  in >> rng_;
  if (!in) throw ParseError("rng state: malformed");
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (params_.size() != other.params_.size() || adam_steps_ != other.adam_steps_ ||
      rng_ != other.rng_)
    return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value != b.value || a.first_moment != b.first_moment ||
        a.second_moment != b.second_moment)
      return false;
  }
  return true;
}

void adam_update(ParamStore& params, const AdamOptions& options) {
  params.check_finite_grad();
  double scale = 1.0;
  if (options.clip_norm) {
    const double norm = params.grad_norm();
    if (norm > *options.clip_norm) scale = *options.clip_norm / norm;
  }
  const int t = params.adam_steps() + 1;
  params.set_adam_steps(t);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (auto& p : params) {
    const Matrix g = p.grad * scale;
    p.first_moment = options.beta1 * p.first_moment + (1.0 - options.beta1) * g;
    p.second_moment = options.beta2 * p.second_moment + (1.0 - options.beta2) * g.cwiseAbs2();
    p.value.array() -= options.lr * (p.first_moment.array() / c1) /
                       ((p.second_moment.array() / c2).sqrt() + options.eps);
  }
  params.zero_grad();
  params.check_finite();
}

}  // namespace ffevss::nn
