#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ffevss/errors.hpp"
#include "ffevss/nn/tape.hpp"

namespace ffevss::nn {

// Plain forward versions. Node features are rows; weights act on columns,
// so an N x k feature block maps to N x d with W of shape d x k.

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-wise affine map: out(n, :) = b + W x_n.
template <typename DX, typename DW, typename DB>
DenseMatrix<typename DX::Scalar> embed(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DW>& w,
                                       const Eigen::MatrixBase<DB>& b) {
  if (x.cols() != w.cols() || b.size() != w.rows()) throw ContractViolation("embed: shape mismatch");
  DenseMatrix<typename DX::Scalar> out = x * w.transpose();
  out.rowwise() += b.reshaped().transpose();
  return out;
}

template <typename Scalar>
struct LstmState {
  DenseVector<Scalar> h;
  DenseVector<Scalar> c;

  static LstmState zero(Eigen::Index hidden) {
    return {DenseVector<Scalar>::Zero(hidden), DenseVector<Scalar>::Zero(hidden)};
  }
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-a).exp()).inverse();
}

/// One LSTM step with gates stacked as [input; forget; cell; output].
template <typename DX, typename DI, typename DH, typename DB>
LstmState<typename DX::Scalar> lstm_step(const Eigen::MatrixBase<DX>& x, const LstmState<typename DX::Scalar>& prev,
                                         const Eigen::MatrixBase<DI>& w_ih, const Eigen::MatrixBase<DH>& w_hh,
                                         const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DX::Scalar;
  const Eigen::Index hidden = prev.h.size();
  if (w_ih.rows() != 4 * hidden || w_hh.rows() != 4 * hidden || w_hh.cols() != hidden || w_ih.cols() != x.size() ||
      b.size() != 4 * hidden)
    throw ContractViolation("lstm_step: shape mismatch");
  const DenseVector<Scalar> gates = w_ih * x.reshaped() + w_hh * prev.h + b.reshaped();
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Array i = sigmoid(gates.segment(0, hidden).array());
  const Array f = sigmoid(gates.segment(hidden, hidden).array());
  const Array g = gates.segment(2 * hidden, hidden).array().tanh();
  const Array o = sigmoid(gates.segment(3 * hidden, hidden).array());
  LstmState<Scalar> next;
  next.c = (f * prev.c.array() + i * g).matrix();
  next.h = (o * next.c.array().tanh()).matrix();
  return next;
}

/// u_n = v tanh(W [node_n; h]) for every row of `node_vecs`.
template <typename DN, typename DH, typename DW, typename DV>
DenseVector<typename DN::Scalar> attention_scores(const Eigen::MatrixBase<DN>& node_vecs,
                                                  const Eigen::MatrixBase<DH>& h, const Eigen::MatrixBase<DW>& w,
                                                  const Eigen::MatrixBase<DV>& v) {
  using Scalar = typename DN::Scalar;
  const Eigen::Index d = node_vecs.cols();
  if (w.cols() != d + h.size() || v.size() != w.rows()) throw ContractViolation("attention_scores: shape mismatch");
  DenseMatrix<Scalar> pre = node_vecs * w.leftCols(d).transpose();
  pre.rowwise() += (w.rightCols(h.size()) * h.reshaped()).transpose();
  return pre.array().tanh().matrix() * v.reshaped();
}

/// Softmax over the legal entries; illegal entries are exactly zero.
template <typename DU>
DenseVector<typename DU::Scalar> masked_softmax(const Eigen::MatrixBase<DU>& logits, const std::vector<bool>& legal) {
  using Scalar = typename DU::Scalar;
  if (static_cast<std::size_t>(logits.size()) != legal.size())
    throw ContractViolation("masked_softmax: mask size differs from logits");
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  bool any = false;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!legal[static_cast<std::size_t>(i)]) continue;
    if (!std::isfinite(logits.reshaped()(i))) throw NumericError("masked_softmax: non-finite logit");
    top = std::max(top, logits.reshaped()(i));
    any = true;
  }
  if (!any) throw ContractViolation("masked_softmax: empty legal set");
  DenseVector<Scalar> p = DenseVector<Scalar>::Zero(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (legal[static_cast<std::size_t>(i)]) p(i) = std::exp(logits.reshaped()(i) - top);
  p /= p.sum();
  return p;
}

// Tape versions. Node features are rows here as well; the decoder keeps
// its hidden and cell state as 1 x H rows so every product is row-major
// over nodes.

/// Row-wise affine map on the tape; `b` is d x 1.
inline Var embed(Var x, Var w, Var b) { return add_bias_rows(matmul_nt(x, w), b); }

struct LstmVars {
  Var h;
  Var c;
};

/// LSTM step on 1 x E input and 1 x H state rows.
inline LstmVars lstm_step(Var x, LstmVars prev, Var w_ih, Var w_hh, Var b) {
  const Eigen::Index hidden = prev.h.cols();
  Var gates = add_bias_rows(add(matmul_nt(x, w_ih), matmul_nt(prev.h, w_hh)), b);
  Var i = sigmoid(col_block(gates, 0, hidden));
  Var f = sigmoid(col_block(gates, hidden, hidden));
  Var g = tanh(col_block(gates, 2 * hidden, hidden));
  Var o = sigmoid(col_block(gates, 3 * hidden, hidden));
  Var c = add(hadamard(f, prev.c), hadamard(i, g));
  return {hadamard(o, tanh(c)), c};
}

/// N x 1 logits for the rows of `node_vecs` and a 1 x H query row.
inline Var attention_scores(Var node_vecs, Var h, Var w, Var v) {
  const Eigen::Index d = node_vecs.cols();
  Var pre = add_bias_rows(matmul_nt(node_vecs, col_block(w, 0, d)), matmul_nt(h, col_block(w, d, h.cols())));
  return matmul_nt(tanh(pre), v);
}

}  // namespace ffevss::nn
