#pragma once

// Reverse-mode differentiation over a fixed set of matrix primitives.
//
// A Tape records every value produced during one forward pass together with
// a closure that pushes the output gradient back to its operands. Tapes are
// single-use: build, call backward() once, read gradients, discard.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "graphuil/graph.hpp"
#include "graphuil/params.hpp"

namespace graphuil {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape{nullptr};
  std::uint32_t id{0};
};

/// CSR sparsity pattern shared by edge-valued tensors (one value per nonzero).
struct SparsePattern {
  std::size_t n{0};
  std::vector<std::size_t> row_ptr;
  std::vector<NodeId> cols;
  std::vector<NodeId> rows;  // row index of every nonzero

  std::size_t nnz() const noexcept { return cols.size(); }

  /// Adjacency pattern of g, optionally with the diagonal.
  static SparsePattern from_graph(const Graph& g, bool include_self);
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of the last backward() root w.r.t. v; zeros if none reached it.
  Matrix grad(Var v) const;

  /// Runs reverse accumulation from a 1x1 root.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by primitive implementations.
  Var record(Matrix value, bool requires_grad, Backward backward);
  Matrix& grad_slot(Var v);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad{false};
    bool requires_grad{false};
    Backward backward;
  };
  std::vector<Node> nodes_;
};

/// Parameter blocks bound as tape variables, looked up by name.
class BoundParams {
 public:
  /// Frozen blocks (and every block when track_gradients is false) are bound
  /// as constants.
  BoundParams(Tape& tape, const ParamSet& params, std::span<const std::string> frozen = {},
              bool track_gradients = true);

  Var operator[](std::string_view name) const { return vars_[params_->index_of(name)]; }
  Var at(std::size_t i) const { return vars_[i]; }
  const ParamSet& params() const noexcept { return *params_; }

  /// Gradients for every block, in the ParamSet's layout.
  ParamSet gradients() const;

 private:
  Tape* tape_;
  const ParamSet* params_;
  std::vector<Var> vars_;
};

namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// a + 1·bias, bias a 1×C row broadcast down every row.
Var add_bias(Var a, Var bias);
Var relu(Var a);
Var sigmoid(Var a);
Var concat_cols(std::span<const Var> parts);
/// Rows [start, start+count).
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var gather_rows(Var a, std::span<const NodeId> index);

/// 1×1 reductions.
Var sum(Var a);
Var mean(Var a);
Var sum_squares(Var a);
/// Σ_r w_r · ||a_r||², weights constant.
Var weighted_row_sq_norm(Var a, std::span<const double> weights);
/// Σ mask ⊙ (a − target)², mask and target constant.
Var masked_sq_error(Var a, const Matrix& target, const Matrix& mask);
/// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
Var bce_with_logits(Var logits, const Matrix& targets);

/// Row-wise dot products of two same-shape matrices, m×1.
Var row_dot(Var a, Var b);

/// Softmax of each row over the entries where mask != 0; exactly 0 elsewhere.
/// A row with empty support is all zeros.
Var masked_row_softmax(Var logits, const Matrix& mask);

// The sparse operands below are captured by reference and must outlive the tape.

/// Constant sparse matrix times dense variable.
Var spmm(const SparseSymMatrix& p, Var x);
/// Edge-valued tensor (nnz×1) with entry u[row] + v[col].
Var edge_sum(const SparsePattern& pattern, Var u, Var v);
/// Softmax of edge logits within each row of the pattern.
Var segment_softmax(const SparsePattern& pattern, Var logits);
/// Sparse matrix with pattern and variable values (nnz×1) times dense x.
Var pattern_spmm(const SparsePattern& pattern, Var values, Var x);

}  // namespace ad

/// Builds a scalar loss on a tape from bound parameters.
using LossBuilder = std::function<Var(Tape&, const BoundParams&)>;

struct LossAndGrad {
  double loss{0.0};
  ParamSet grads;
};

/// Loss value only (no backward pass).
double evaluate_loss(const LossBuilder& loss, const ParamSet& params);

/// ∂loss/∂block for every block. Frozen blocks report exact zeros.
LossAndGrad grad(const LossBuilder& loss, const ParamSet& params, std::span<const std::string> frozen = {});

}  // namespace graphuil
