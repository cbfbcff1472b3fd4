#include "ffevss/nn/tape.hpp"

#include <cmath>
#include <limits>

#include "ffevss/errors.hpp"

namespace ffevss::nn {

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractViolation("scalar() on a non-scalar value");
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::param(ParamStore& store, std::size_t index) {
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return {this, it->second};
  Var v = record(store[index].value, nullptr);
  Node& n = nodes_.back();
  n.store = &store;
  n.param = index;
  param_nodes_.emplace(key, v.id);
  return v;
}

Var Tape::record(Matrix value, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::add_grad(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var output, double seed) {
  if (output.tape != this) throw ContractViolation("backward on a foreign variable");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  const Matrix& out = value(output.id);
  add_grad(output, Matrix::Constant(out.rows(), out.cols(), seed));
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate_into(ParamStore& store, double scale) const {
  for (const auto& [key, id] : param_nodes_) {
    if (key.first != &store) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) continue;
    if (!n.grad.allFinite()) throw NumericError("non-finite gradient in parameter " + store[key.second].name);
    store[key.second].grad += scale * n.grad;
  }
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) throw ContractViolation("matmul: inner dimensions differ");
  return a.tape->record(av * bv, [a, b](Tape& t, const Matrix& g) {
    t.add_grad(a, g * b.value().transpose());
    t.add_grad(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) throw ContractViolation("matmul_nt: inner dimensions differ");
  return a.tape->record(av * bv.transpose(), [a, b](Tape& t, const Matrix& g) {
    t.add_grad(a, g * b.value());
    t.add_grad(b, g.transpose() * a.value());
  });
}

Var matmul_tn(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) throw ContractViolation("matmul_tn: inner dimensions differ");
  return a.tape->record(av.transpose() * bv, [a, b](Tape& t, const Matrix& g) {
    t.add_grad(a, b.value() * g.transpose());
    t.add_grad(b, a.value() * g);
  });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  return a.tape->record(a.value() + b.value(), [a, b](Tape& t, const Matrix& g) {
    t.add_grad(a, g);
    t.add_grad(b, g);
  });
}

Var add_bias_rows(Var m, Var bias) {
  const Matrix& mv = m.value();
  const Matrix& bv = bias.value();
  const bool column = bv.cols() == 1 && bv.rows() == mv.cols();
  const bool row = bv.rows() == 1 && bv.cols() == mv.cols();
  if (!column && !row) throw ContractViolation("add_bias_rows: bias shape");
  Matrix out = column ? Matrix(mv.rowwise() + bv.col(0).transpose()) : Matrix(mv.rowwise() + bv.row(0));
  return m.tape->record(std::move(out), [m, bias, column](Tape& t, const Matrix& g) {
    t.add_grad(m, g);
    if (column)
      t.add_grad(bias, g.colwise().sum().transpose());
    else
      t.add_grad(bias, g.colwise().sum());
  });
}

Var hadamard(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "hadamard");
  return a.tape->record(a.value().cwiseProduct(b.value()), [a, b](Tape& t, const Matrix& g) {
    t.add_grad(a, g.cwiseProduct(b.value()));
    t.add_grad(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  return a.tape->record(a.value() * s, [a, s](Tape& t, const Matrix& g) { t.add_grad(a, g * s); });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  Matrix deriv = 1.0 - out.array().square();
  return a.tape->record(std::move(out), [a, d = std::move(deriv)](Tape& t, const Matrix& g) {
    t.add_grad(a, g.cwiseProduct(d));
  });
}

Var sigmoid(Var a) {
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  Matrix deriv = out.array() * (1.0 - out.array());
  return a.tape->record(std::move(out), [a, d = std::move(deriv)](Tape& t, const Matrix& g) {
    t.add_grad(a, g.cwiseProduct(d));
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  Matrix mask = (a.value().array() > 0.0).cast<double>().matrix();
  return a.tape->record(std::move(out), [a, m = std::move(mask)](Tape& t, const Matrix& g) {
    t.add_grad(a, g.cwiseProduct(m));
  });
}

Var row_block(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || start + count > av.rows()) throw ContractViolation("row_block: out of range");
  return a.tape->record(av.middleRows(start, count), [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.add_grad(a, full);
  });
}

Var col_block(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || start + count > av.cols()) throw ContractViolation("col_block: out of range");
  return a.tape->record(av.middleCols(start, count), [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.add_grad(a, full);
  });
}

Var concat_cols(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) throw ContractViolation("concat_cols: row counts differ");
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const Eigen::Index split = av.cols();
  return a.tape->record(std::move(out), [a, b, split](Tape& t, const Matrix& g) {
    t.add_grad(a, g.leftCols(split));
    t.add_grad(b, g.rightCols(g.cols() - split));
  });
}

Var row(Var a, Eigen::Index i) { return row_block(a, i, 1); }

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), [a](Tape& t, const Matrix& g) {
    t.add_grad(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var pick(Var a, Eigen::Index i, Eigen::Index j) {
  Matrix out(1, 1);
  out(0, 0) = a.value()(i, j);
  return a.tape->record(std::move(out), [a, i, j](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full(i, j) = g(0, 0);
    t.add_grad(a, full);
  });
}

Var softmax(Var logits) {
  const Matrix& u = logits.value();
  if (u.cols() != 1) throw ContractViolation("softmax: expects a column vector");
  Vector p = (u.col(0).array() - u.maxCoeff()).exp().matrix();
  p /= p.sum();
  Matrix out = p;
  return logits.tape->record(std::move(out), [logits, p](Tape& t, const Matrix& g) {
    const double dot = g.col(0).dot(p);
    t.add_grad(logits, (p.array() * (g.col(0).array() - dot)).matrix());
  });
}

Var masked_log_softmax(Var logits, const std::vector<bool>& legal) {
  const Matrix& u = logits.value();
  if (u.cols() != 1 || static_cast<std::size_t>(u.rows()) != legal.size())
    throw ContractViolation("masked_log_softmax: mask size differs from logits");
  double top = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    if (!legal[static_cast<std::size_t>(i)]) continue;
    if (!std::isfinite(u(i, 0))) throw NumericError("masked_log_softmax: non-finite logit");
    top = std::max(top, u(i, 0));
    any = true;
  }
  if (!any) throw ContractViolation("masked_log_softmax: empty legal set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    if (legal[static_cast<std::size_t>(i)]) total += std::exp(u(i, 0) - top);
  const double log_z = top + std::log(total);

  Matrix out(u.rows(), 1);
  Vector p = Vector::Zero(u.rows());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    if (legal[static_cast<std::size_t>(i)]) {
      out(i, 0) = u(i, 0) - log_z;
      p(i) = std::exp(out(i, 0));
    } else {
      out(i, 0) = -std::numeric_limits<double>::infinity();
    }
  }
  return logits.tape->record(std::move(out), [logits, p, legal](Tape& t, const Matrix& g) {
    double legal_sum = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      if (legal[static_cast<std::size_t>(i)]) legal_sum += g(i, 0);
    Matrix du = Matrix::Zero(g.rows(), 1);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      if (legal[static_cast<std::size_t>(i)]) du(i, 0) = g(i, 0) - p(i) * legal_sum;
    t.add_grad(logits, du);
  });
}

}  // namespace ffevss::nn
