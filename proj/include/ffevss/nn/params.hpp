#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ffevss::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

/// Named trainable tensors with paired gradient accumulators and Adam
/// moments. Insertion order is stable and defines checkpoint layout.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// Uniform in +-1/sqrt(cols).
  std::size_t add_weight(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  /// Zero initialised.
  std::size_t add_bias(const std::string& name, Eigen::Index rows, Eigen::Index cols = 1);
  std::size_t add(const std::string& name, Matrix value);

  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& operator[](std::string_view name) { return params_[index(name)]; }
  const Parameter& operator[](std::string_view name) const { return params_[index(name)]; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Throws NumericError naming the first parameter with a non-finite value.
  void check_finite() const;
  void check_finite_grad() const;
  double grad_norm() const;

  int adam_steps() const { return adam_steps_; }
  void set_adam_steps(int steps) { adam_steps_ = steps; }
  std::mt19937_64& rng() { return rng_; }
  std::string rng_state() const;
  void set_rng_state(const std::string& state);

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
  std::mt19937_64 rng_;
  int adam_steps_ = 0;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::optional<double> clip_norm;
};

/// Bias-corrected Adam step on every parameter, then clears gradients.
void adam_update(ParamStore& params, const AdamOptions& options = {});

}  // namespace ffevss::nn
