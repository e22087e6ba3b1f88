#include "graphuil/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "graphuil/error.hpp"

namespace graphuil {

SparsePattern SparsePattern::from_graph(const Graph& g, bool include_self) {
  SparsePattern p;
  p.n = g.num_nodes();
  p.row_ptr.assign(p.n + 1, 0);
  for (NodeId i = 0; i < p.n; ++i) {
    bool self_done = !include_self;
    auto push = [&](NodeId j) {
      p.cols.push_back(j);
      p.rows.push_back(i);
    };
    for (NodeId j : g.neighbors(i)) {
      if (!self_done && j > i) {
        push(i);
        self_done = true;
      }
      push(j);
    }
    if (!self_done) push(i);
    p.row_ptr[i + 1] = p.cols.size();
  }
  return p;
}

Var Tape::record(Matrix value, bool requires_grad, Backward backward) {
#ifndef NDEBUG
  assert(value.allFinite() && "non-finite value recorded on tape");
#endif
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) { return record(std::move(value), false, {}); }
Var Tape::variable(Matrix value) { return record(std::move(value), true, {}); }

double Tape::scalar(Var v) const {
  const auto& m = nodes_[v.id].value;
  if (m.rows() != 1 || m.cols() != 1) throw DimensionError("scalar() on a non-1x1 value");
  return m(0, 0);
}

Matrix& Tape::grad_slot(Var v) {
  auto& node = nodes_[v.id];
  if (!node.has_grad) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
  return node.grad;
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[v.id];
  if (!node.has_grad) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var root) {
  if (value(root).rows() != 1 || value(root).cols() != 1) {
    throw DimensionError("backward() root must be 1x1");
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad.resize(0, 0);
  }
  if (!nodes_[root.id].requires_grad) return;
  grad_slot(root)(0, 0) = 1.0;
  for (std::size_t k = root.id + 1; k-- > 0;) {
    auto& node = nodes_[k];
    if (node.has_grad && node.backward) node.backward(*this, node.grad);
  }
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params, std::span<const std::string> frozen,
                         bool track_gradients)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (const auto& b : params) {
    const bool is_frozen = std::find(frozen.begin(), frozen.end(), b.name) != frozen.end();
    vars_.push_back(track_gradients && !is_frozen ? tape.variable(b.value) : tape.constant(b.value));
  }
}

ParamSet BoundParams::gradients() const {
  ParamSet out;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& b = (*params_)[i];
    out.add(b.name, tape_->grad(vars_[i]));
  }
  return out;
}

double evaluate_loss(const LossBuilder& loss, const ParamSet& params) {
  Tape tape;
  BoundParams bound(tape, params, {}, false);
  return tape.scalar(loss(tape, bound));
}

LossAndGrad grad(const LossBuilder& loss, const ParamSet& params, std::span<const std::string> frozen) {
  Tape tape;
  BoundParams bound(tape, params, frozen);
  const Var root = loss(tape, bound);
  tape.backward(root);
  return {tape.scalar(root), bound.gradients()};
}

namespace ad {
namespace {

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw DimensionError(std::string(op) + ": " + detail);
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void same_shape(const char* op, const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op, shape(a) + " vs " + shape(b));
}

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Kept strictly inside (0, 1): in doubles 1/(1+e^-z) rounds to 1 from z ≈ 37.
double open_sigmoid(double z) {
  return std::clamp(stable_sigmoid(z), std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  require(t.value(a).cols() == t.value(b).rows(), "matmul", shape(t.value(a)) + " * " + shape(t.value(b)));
  Matrix out = t.value(a) * t.value(b);
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_slot(b).noalias() += t.value(a).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("add", t.value(a), t.value(b));
  return t.record(t.value(a) + t.value(b), t.requires_grad(a) || t.requires_grad(b),
                  [a, b](Tape& t, const Matrix& g) {
                    if (t.requires_grad(a)) t.grad_slot(a) += g;
                    if (t.requires_grad(b)) t.grad_slot(b) += g;
                  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("sub", t.value(a), t.value(b));
  return t.record(t.value(a) - t.value(b), t.requires_grad(a) || t.requires_grad(b),
                  [a, b](Tape& t, const Matrix& g) {
                    if (t.requires_grad(a)) t.grad_slot(a) += g;
                    if (t.requires_grad(b)) t.grad_slot(b) -= g;
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("hadamard", t.value(a), t.value(b));
  return t.record(t.value(a).cwiseProduct(t.value(b)), t.requires_grad(a) || t.requires_grad(b),
                  [a, b](Tape& t, const Matrix& g) {
                    if (t.requires_grad(a)) t.grad_slot(a) += g.cwiseProduct(t.value(b));
                    if (t.requires_grad(b)) t.grad_slot(b) += g.cwiseProduct(t.value(a));
                  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.record(t.value(a) * s, t.requires_grad(a), [a, s](Tape& t, const Matrix& g) { t.grad_slot(a) += g * s; });
}

Var add_bias(Var a, Var bias) {
  Tape& t = *a.tape;
  require(t.value(bias).rows() == 1 && t.value(bias).cols() == t.value(a).cols(), "add_bias",
          shape(t.value(a)) + " + " + shape(t.value(bias)));
  Matrix out = t.value(a).rowwise() + t.value(bias).row(0);
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(bias), [a, bias](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a) += g;
    if (t.requires_grad(bias)) t.grad_slot(bias) += g.colwise().sum();
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  return t.record(t.value(a).cwiseMax(0.0), t.requires_grad(a), [a](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad_slot(a);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = t.value(a).unaryExpr(&open_sigmoid);
  const std::uint32_t out_id = static_cast<std::uint32_t>(t.size());
  return t.record(std::move(out), t.requires_grad(a), [a, out_id](Tape& t, const Matrix& g) {
    const Matrix& s = t.value(Var{&t, out_id});
    t.grad_slot(a) += g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no operands");
  Tape& t = *parts[0].tape;
  const auto rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    require(t.value(p).rows() == rows, "concat_cols", "row count mismatch");
    cols += t.value(p).cols();
    rg = rg || t.requires_grad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  std::vector<Var> operands(parts.begin(), parts.end());
  return t.record(std::move(out), rg, [operands](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (Var p : operands) {
      const auto c = t.value(p).cols();
      if (t.requires_grad(p)) t.grad_slot(p) += g.middleCols(at, c);
      at += c;
    }
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Tape& t = *a.tape;
  const auto s = static_cast<Eigen::Index>(start);
  const auto c = static_cast<Eigen::Index>(count);
  require(s + c <= t.value(a).rows(), "slice_rows", "range exceeds " + shape(t.value(a)));
  Matrix out = t.value(a).middleRows(s, c);
  return t.record(std::move(out), t.requires_grad(a),
                  [a, s, c](Tape& t, const Matrix& g) { t.grad_slot(a).middleRows(s, c) += g; });
}

Var gather_rows(Var a, std::span<const NodeId> index) {
  Tape& t = *a.tape;
  const Matrix& x = t.value(a);
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] < x.rows(), "gather_rows", "row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = x.row(index[r]);
  }
  std::vector<NodeId> idx(index.begin(), index.end());
  return t.record(std::move(out), t.requires_grad(a), [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_slot(a);
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), t.requires_grad(a),
                  [a](Tape& t, const Matrix& g) { t.grad_slot(a).array() += g(0, 0); });
}

Var mean(Var a) {
  Tape& t = *a.tape;
  const auto n = static_cast<double>(t.value(a).size());
  require(n > 0, "mean", "empty operand");
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum() / n;
  return t.record(std::move(out), t.requires_grad(a),
                  [a, n](Tape& t, const Matrix& g) { t.grad_slot(a).array() += g(0, 0) / n; });
}

Var sum_squares(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = t.value(a).squaredNorm();
  return t.record(std::move(out), t.requires_grad(a),
                  [a](Tape& t, const Matrix& g) { t.grad_slot(a) += (2.0 * g(0, 0)) * t.value(a); });
}

Var weighted_row_sq_norm(Var a, std::span<const double> weights) {
  Tape& t = *a.tape;
  const Matrix& x = t.value(a);
  require(static_cast<Eigen::Index>(weights.size()) == x.rows(), "weighted_row_sq_norm", "weight count mismatch");
  double total = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) total += weights[static_cast<std::size_t>(r)] * x.row(r).squaredNorm();
  Matrix out(1, 1);
  out(0, 0) = total;
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(std::move(out), t.requires_grad(a), [a, w = std::move(w)](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad_slot(a);
    for (Eigen::Index r = 0; r < x.rows(); ++r) ga.row(r) += (2.0 * g(0, 0) * w[static_cast<std::size_t>(r)]) * x.row(r);
  });
}

Var masked_sq_error(Var a, const Matrix& target, const Matrix& mask) {
  Tape& t = *a.tape;
  same_shape("masked_sq_error", t.value(a), target);
  same_shape("masked_sq_error", t.value(a), mask);
  Matrix diff = (t.value(a) - target).cwiseProduct(mask);
  Matrix out(1, 1);
  out(0, 0) = (t.value(a) - target).array().square().cwiseProduct(mask.array()).sum();
  return t.record(std::move(out), t.requires_grad(a), [a, diff = std::move(diff)](Tape& t, const Matrix& g) {
    t.grad_slot(a) += (2.0 * g(0, 0)) * diff;
  });
}

Var bce_with_logits(Var logits, const Matrix& targets) {
  Tape& t = *logits.tape;
  same_shape("bce_with_logits", t.value(logits), targets);
  const Matrix& z = t.value(logits);
  const double n = static_cast<double>(z.size());
  require(n > 0, "bce_with_logits", "empty operand");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z.data()[i];
    total += std::max(zi, 0.0) - zi * targets.data()[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  return t.record(std::move(out), t.requires_grad(logits), [logits, targets, n](Tape& t, const Matrix& g) {
    const Matrix& z = t.value(logits);
    Matrix& gz = t.grad_slot(logits);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      gz.data()[i] += g(0, 0) * (stable_sigmoid(z.data()[i]) - targets.data()[i]) / n;
    }
  });
}

Var row_dot(Var a, Var b) {
  Tape& t = *a.tape;
  same_shape("row_dot", t.value(a), t.value(b));
  Matrix out = t.value(a).cwiseProduct(t.value(b)).rowwise().sum();
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_slot(a) += (t.value(b).array().colwise() * g.col(0).array()).matrix();
    if (t.requires_grad(b)) t.grad_slot(b) += (t.value(a).array().colwise() * g.col(0).array()).matrix();
  });
}

Var masked_row_softmax(Var logits, const Matrix& mask) {
  Tape& t = *logits.tape;
  same_shape("masked_row_softmax", t.value(logits), mask);
  const Matrix& z = t.value(logits);
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (mask(r, c) != 0.0) hi = std::max(hi, z(r, c));
    }
    if (!std::isfinite(hi)) continue;
    double denom = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (mask(r, c) != 0.0) denom += out(r, c) = std::exp(z(r, c) - hi);
    }
    out.row(r) /= denom;
  }
  const std::uint32_t out_id = static_cast<std::uint32_t>(t.size());
  return t.record(std::move(out), t.requires_grad(logits), [logits, out_id](Tape& t, const Matrix& g) {
    const Matrix& s = t.value(Var{&t, out_id});
    const Eigen::VectorXd dots = s.cwiseProduct(g).rowwise().sum();
    t.grad_slot(logits) += s.cwiseProduct((g.colwise() - dots));
  });
}

Var spmm(const SparseSymMatrix& p, Var x) {
  Tape& t = *x.tape;
  const Matrix& xv = t.value(x);
  require(static_cast<Eigen::Index>(p.n) == xv.rows(), "spmm", "operator is " + std::to_string(p.n) + "x" +
                                                                   std::to_string(p.n) + ", operand " + shape(xv));
  Matrix out = Matrix::Zero(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) {
      out.row(static_cast<Eigen::Index>(i)) += p.values[e] * xv.row(p.cols[e]);
    }
  }
  return t.record(std::move(out), t.requires_grad(x), [&p, x](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad_slot(x);
    for (std::size_t i = 0; i < p.n; ++i) {
      for (std::size_t e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) {
        gx.row(p.cols[e]) += p.values[e] * g.row(static_cast<Eigen::Index>(i));
      }
    }
  });
}

Var edge_sum(const SparsePattern& pattern, Var u, Var v) {
  Tape& t = *u.tape;
  const Matrix& uv = t.value(u);
  const Matrix& vv = t.value(v);
  const auto n = static_cast<Eigen::Index>(pattern.n);
  require(uv.rows() == n && uv.cols() == 1 && vv.rows() == n && vv.cols() == 1, "edge_sum",
          "node scores must be n x 1");
  Matrix out(static_cast<Eigen::Index>(pattern.nnz()), 1);
  for (std::size_t e = 0; e < pattern.nnz(); ++e) {
    out(static_cast<Eigen::Index>(e), 0) = uv(pattern.rows[e], 0) + vv(pattern.cols[e], 0);
  }
  return t.record(std::move(out), t.requires_grad(u) || t.requires_grad(v), [&pattern, u, v](Tape& t, const Matrix& g) {
    if (t.requires_grad(u)) {
      Matrix& gu = t.grad_slot(u);
      for (std::size_t e = 0; e < pattern.nnz(); ++e) gu(pattern.rows[e], 0) += g(static_cast<Eigen::Index>(e), 0);
    }
    if (t.requires_grad(v)) {
      Matrix& gv = t.grad_slot(v);
      for (std::size_t e = 0; e < pattern.nnz(); ++e) gv(pattern.cols[e], 0) += g(static_cast<Eigen::Index>(e), 0);
    }
  });
}

Var segment_softmax(const SparsePattern& pattern, Var logits) {
  Tape& t = *logits.tape;
  const Matrix& z = t.value(logits);
  require(z.rows() == static_cast<Eigen::Index>(pattern.nnz()) && z.cols() == 1, "segment_softmax",
          "logits must be nnz x 1");
  Matrix out(z.rows(), 1);
  for (std::size_t i = 0; i < pattern.n; ++i) {
    const auto b = static_cast<Eigen::Index>(pattern.row_ptr[i]);
    const auto e = static_cast<Eigen::Index>(pattern.row_ptr[i + 1]);
    if (b == e) continue;
    const double hi = z.col(0).segment(b, e - b).maxCoeff();
    double denom = 0.0;
    for (auto k = b; k < e; ++k) denom += out(k, 0) = std::exp(z(k, 0) - hi);
    out.col(0).segment(b, e - b) /= denom;
  }
  const std::uint32_t out_id = static_cast<std::uint32_t>(t.size());
  return t.record(std::move(out), t.requires_grad(logits), [&pattern, logits, out_id](Tape& t, const Matrix& g) {
    const Matrix& s = t.value(Var{&t, out_id});
    Matrix& gz = t.grad_slot(logits);
    for (std::size_t i = 0; i < pattern.n; ++i) {
      const auto b = static_cast<Eigen::Index>(pattern.row_ptr[i]);
      const auto e = static_cast<Eigen::Index>(pattern.row_ptr[i + 1]);
      double dot = 0.0;
      for (auto k = b; k < e; ++k) dot += s(k, 0) * g(k, 0);
      for (auto k = b; k < e; ++k) gz(k, 0) += s(k, 0) * (g(k, 0) - dot);
    }
  });
}

Var pattern_spmm(const SparsePattern& pattern, Var values, Var x) {
  Tape& t = *values.tape;
  const Matrix& w = t.value(values);
  const Matrix& xv = t.value(x);
  require(w.rows() == static_cast<Eigen::Index>(pattern.nnz()) && w.cols() == 1, "pattern_spmm",
          "values must be nnz x 1");
  require(xv.rows() == static_cast<Eigen::Index>(pattern.n), "pattern_spmm", "operand " + shape(xv));
  Matrix out = Matrix::Zero(xv.rows(), xv.cols());
  for (std::size_t e = 0; e < pattern.nnz(); ++e) {
    out.row(pattern.rows[e]) += w(static_cast<Eigen::Index>(e), 0) * xv.row(pattern.cols[e]);
  }
  return t.record(std::move(out), t.requires_grad(values) || t.requires_grad(x),
                  [&pattern, values, x](Tape& t, const Matrix& g) {
                    const Matrix& w = t.value(values);
                    const Matrix& xv = t.value(x);
                    if (t.requires_grad(values)) {
                      Matrix& gw = t.grad_slot(values);
                      for (std::size_t e = 0; e < pattern.nnz(); ++e) {
                        gw(static_cast<Eigen::Index>(e), 0) += g.row(pattern.rows[e]).dot(xv.row(pattern.cols[e]));
                      }
                    }
                    if (t.requires_grad(x)) {
                      Matrix& gx = t.grad_slot(x);
                      for (std::size_t e = 0; e < pattern.nnz(); ++e) {
                        gx.row(pattern.cols[e]) += w(static_cast<Eigen::Index>(e), 0) * g.row(pattern.rows[e]);
                      }
                    }
                  });
}

}  // namespace ad
}  // namespace graphuil
