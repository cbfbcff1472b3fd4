#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "ffevss/nn/params.hpp"

namespace ffevss::nn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr; }
};

/// Records matrix-valued operators in execution order and replays them in
/// reverse to differentiate a scalar output. Parameter leaves are created
/// once per (store, index) and their gradients are pushed back into the
/// store with accumulate_into().
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(ParamStore& store, std::size_t index);
  Var param(ParamStore& store, std::string_view name) { return param(store, store.index(name)); }

  /// Records an operator output; `backward` receives the output gradient
  /// and must add into the inputs' gradients via add_grad().
  Var record(Matrix value, Backward backward);

  /// Clears node gradients, seeds d(output) = seed and runs the reverse sweep.
  void backward(Var output, double seed = 1.0);
  void add_grad(Var v, const Matrix& g);
  template <typename Expr>
  void add_grad(Var v, const Eigen::MatrixBase<Expr>& g) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Gradient of the last backward() output w.r.t. `v` (zeros if unreached).
  Matrix grad(Var v) const;
  /// Adds parameter-leaf gradients into `store` (single writer).
  void accumulate_into(ParamStore& store, double scale = 1.0) const;

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    Backward backward;
    const ParamStore* store = nullptr;
    std::size_t param = 0;
  };

  std::deque<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, int> param_nodes_;
};

// Operators. Shapes follow Eigen conventions; b-vectors are column vectors.
Var matmul(Var a, Var b);       // a * b
Var matmul_nt(Var a, Var b);    // a * b^T
Var matmul_tn(Var a, Var b);    // a^T * b
Var add(Var a, Var b);
Var add_bias_rows(Var m, Var bias);  // adds a k x 1 or 1 x k bias to every row
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var row_block(Var a, Eigen::Index start, Eigen::Index count);
Var col_block(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(Var a, Var b);
Var row(Var a, Eigen::Index i);
Var sum(Var a);
Var pick(Var a, Eigen::Index i, Eigen::Index j = 0);
/// Column-vector softmax.
Var softmax(Var logits);
/// Column-vector log-softmax restricted to `legal`; illegal entries are -inf
/// and receive no gradient.
Var masked_log_softmax(Var logits, const std::vector<bool>& legal);

}  // namespace ffevss::nn
