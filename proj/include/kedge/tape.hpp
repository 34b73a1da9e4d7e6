#pragma once

// Reverse-mode tape over dense matrices and edge-indexed vectors (stored as
// m x 1 matrices). One tape lives for one forward/backward pass; ops append
// nodes, backward() walks them exactly once in reverse creation order, which
// is a valid reverse topological order because an op can only reference
// earlier nodes.
//
// Index arrays and edge lists are captured as spans: the caller keeps the
// underlying storage alive for the lifetime of the tape.

#include <kedge/common.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kedge {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  // Leaf that never receives a gradient (data, noise, masks).
  Var input(Mat value) { return push_node(std::move(value), false, {}); }

  // Leaf that accumulates a gradient (trainable parameter).
  Var param(Mat value) { return push_node(std::move(value), true, {}); }

  const Mat& value(Var v) const { return nodes_[check(v)].value; }

  const Mat& grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (!n.requires_grad) throw ShapeError("gradient requested for a non-differentiable node");
    return n.grad;
  }

  // Appends an op node. `back` accumulates into the parents' gradients; it is
  // invoked only when some parent needs a gradient. Exposed so higher-level
  // modules can register ops with analytic derivatives of their own.
  Var make_op(Mat value, std::span<const Var> parents,
              std::function<void(Tape&, int)> back) {
    bool needs = false;
    for (const Var& p : parents) {
      check(p);
      if (p.tape != this) throw ShapeError("op mixes variables from different tapes");
      needs |= nodes_[p.id].requires_grad;
    }
    return push_node(std::move(value), needs, needs ? std::move(back) : nullptr);
  }

  // Reverse pass from a scalar output. Gradient buffers are zeroed fresh each
  // time, so a tape may be differentiated more than once if needed.
  void backward(Var output) {
    const int out = check(output);
    const Node& o = nodes_[out];
    if (o.value.rows() != 1 || o.value.cols() != 1)
      throw ShapeError("backward requires a scalar output node");
    if (!o.requires_grad)
      throw ShapeError("backward from a node with no differentiable ancestry");
    for (Node& n : nodes_)
      if (n.requires_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[out].grad(0, 0) = 1.0;
    for (int i = out; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back) n.back(*this, i);
    }
  }

  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // For use inside backward closures.
  Mat& grad_buffer(int id) { return nodes_[id].grad; }
  const Mat& node_value(int id) const { return nodes_[id].value; }
  bool node_requires_grad(int id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&, int)> back;
  };

  int check(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw ShapeError("variable does not belong to this tape");
    return v.id;
  }

  Var push_node(Mat value, bool requires_grad, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(back)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

namespace detail {

inline void same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

inline Tape& tape_of(Var v) {
  if (!v.tape) throw ShapeError("unbound variable");
  return *v.tape;
}

// accumulate into a parent's gradient unless it is a constant
template <typename Expr>
void accum(Tape& t, int id, const Expr& e) {
  if (t.node_requires_grad(id)) t.grad_buffer(id) += e;
}

}  // namespace detail

// ---- linear algebra ----

inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(av.cols()) + " vs " +
                     std::to_string(bv.rows()) + ")");
  Mat out = av * bv;
  const Var parents[] = {a, b};
  return t.make_op(std::move(out), parents, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    detail::accum(t, a, g * t.node_value(b).transpose());
    detail::accum(t, b, t.node_value(a).transpose() * g);
  });
}

inline Var transpose(Var a) {
  Tape& t = detail::tape_of(a);
  Mat out = t.value(a).transpose();
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id](Tape& t, int self) {
    detail::accum(t, a, t.grad_buffer(self).transpose());
  });
}

inline Var slice_rows(Var a, int r0, int r1) {
  Tape& t = detail::tape_of(a);
  const Mat& av = t.value(a);
  if (r0 < 0 || r1 > av.rows() || r0 >= r1) throw ShapeError("slice_rows: bad range");
  Mat out = av.middleRows(r0, r1 - r0);
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id, r0, r1](Tape& t, int self) {
    if (t.node_requires_grad(a))
      t.grad_buffer(a).middleRows(r0, r1 - r0) += t.grad_buffer(self);
  });
}

// out.row(k) = a.row(idx[k])
inline Var gather_rows(Var a, std::span<const int> idx) {
  Tape& t = detail::tape_of(a);
  const Mat& av = t.value(a);
  Mat out(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= av.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(k) = av.row(idx[k]);
  }
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id, idx](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    const Mat& g = t.grad_buffer(self);
    Mat& ga = t.grad_buffer(a);
    for (size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(k);
  });
}

// out.row(seg[k]) += a.row(k); the reduction behind weighted degrees
inline Var segment_sum(Var a, std::span<const int> seg, int n_segments) {
  Tape& t = detail::tape_of(a);
  const Mat& av = t.value(a);
  if (static_cast<size_t>(av.rows()) != seg.size())
    throw ShapeError("segment_sum: segment ids do not match rows");
  Mat out = Mat::Zero(n_segments, av.cols());
  for (size_t k = 0; k < seg.size(); ++k) {
    if (seg[k] < 0 || seg[k] >= n_segments) throw ShapeError("segment_sum: id out of range");
    out.row(seg[k]) += av.row(k);
  }
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id, seg](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    const Mat& g = t.grad_buffer(self);
    Mat& ga = t.grad_buffer(a);
    for (size_t k = 0; k < seg.size(); ++k) ga.row(k) += g.row(seg[k]);
  });
}

// Sparse-times-dense: out.row(i) = sum over edges (i,j) of value(i,j) * dense.row(j).
// Gradients flow to both the per-edge values and the dense operand.
inline Var spmm(std::span<const Edge> edges, int n_rows, Var edge_vals, Var dense) {
  Tape& t = detail::tape_of(edge_vals);
  const Mat& ev = t.value(edge_vals);
  const Mat& dv = t.value(dense);
  if (ev.rows() != static_cast<Eigen::Index>(edges.size()) || ev.cols() != 1)
    throw ShapeError("spmm: edge values must be one column per edge");
  for (const Edge& e : edges)
    if (e.src < 0 || e.src >= n_rows || e.dst < 0 || e.dst >= dv.rows())
      throw ShapeError("spmm: edge endpoint out of range");
  Mat out = Mat::Zero(n_rows, dv.cols());
  for (size_t k = 0; k < edges.size(); ++k)
    out.row(edges[k].src) += ev(k, 0) * dv.row(edges[k].dst);
  const Var parents[] = {edge_vals, dense};
  return t.make_op(std::move(out), parents,
                   [edges, ev = edge_vals.id, de = dense.id](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    const Mat& vals = t.node_value(ev);
    const Mat& dense_v = t.node_value(de);
    const bool need_vals = t.node_requires_grad(ev);
    const bool need_dense = t.node_requires_grad(de);
    for (size_t k = 0; k < edges.size(); ++k) {
      const auto [i, j] = edges[k];
      if (need_vals) t.grad_buffer(ev)(k, 0) += g.row(i).dot(dense_v.row(j));
      if (need_dense) t.grad_buffer(de).row(j) += vals(k, 0) * g.row(i);
    }
  });
}

// ---- elementwise ----

namespace detail {

template <typename Fwd, typename Bwd>
Var unary_elementwise(Var a, Fwd fwd, Bwd bwd) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).unaryExpr(fwd);
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id, bwd](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    const Mat& x = t.node_value(a);
    t.grad_buffer(a).array() += t.grad_buffer(self).array() * x.unaryExpr(bwd).array();
  });
}

}  // namespace detail

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(t.value(a), t.value(b), "add");
  Mat out = t.value(a) + t.value(b);
  const Var parents[] = {a, b};
  return t.make_op(std::move(out), parents, [a = a.id, b = b.id](Tape& t, int self) {
    detail::accum(t, a, t.grad_buffer(self));
    detail::accum(t, b, t.grad_buffer(self));
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(t.value(a), t.value(b), "sub");
  Mat out = t.value(a) - t.value(b);
  const Var parents[] = {a, b};
  return t.make_op(std::move(out), parents, [a = a.id, b = b.id](Tape& t, int self) {
    detail::accum(t, a, t.grad_buffer(self));
    detail::accum(t, b, -t.grad_buffer(self));
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(t.value(a), t.value(b), "mul");
  Mat out = t.value(a).cwiseProduct(t.value(b));
  const Var parents[] = {a, b};
  return t.make_op(std::move(out), parents, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    detail::accum(t, a, g.cwiseProduct(t.node_value(b)));
    detail::accum(t, b, g.cwiseProduct(t.node_value(a)));
  });
}

inline Var scale(Var a, Real c) {
  Tape& t = detail::tape_of(a);
  Mat out = c * t.value(a);
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id, c](Tape& t, int self) {
    detail::accum(t, a, c * t.grad_buffer(self));
  });
}

inline Var add_scalar(Var a, Real c) {
  Tape& t = detail::tape_of(a);
  Mat out = t.value(a).array() + c;
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id](Tape& t, int self) {
    detail::accum(t, a, t.grad_buffer(self));
  });
}

inline Var leaky_relu(Var a, Real slope) {
  return detail::unary_elementwise(
      a, [slope](Real x) { return x >= 0.0 ? x : slope * x; },
      [slope](Real x) { return x > 0.0 ? 1.0 : slope; });
}

inline Var relu(Var a) { return leaky_relu(a, 0.0); }

inline Var vexp(Var a) {
  return detail::unary_elementwise(a, [](Real x) { return std::exp(x); },
                                   [](Real x) { return std::exp(x); });
}

inline Var vlog(Var a) {
  Tape& t = detail::tape_of(a);
  if ((t.value(a).array() <= 0.0).any()) throw DomainError("log of a non-positive value");
  return detail::unary_elementwise(a, [](Real x) { return std::log(x); },
                                   [](Real x) { return 1.0 / x; });
}

// elementwise a^b for positive bases, differentiable in both arguments
inline Var vpow(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(t.value(a), t.value(b), "pow");
  if ((t.value(a).array() <= 0.0).any()) throw DomainError("pow of a non-positive base");
  Mat out = t.value(a).array().pow(t.value(b).array());
  const Var parents[] = {a, b};
  return t.make_op(std::move(out), parents, [a = a.id, b = b.id](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    const auto& base = t.node_value(a).array();
    const auto& expo = t.node_value(b).array();
    const auto& out = t.node_value(self).array();
    detail::accum(t, a, (g.array() * expo * out / base).matrix());
    detail::accum(t, b, (g.array() * out * base.log()).matrix());
  });
}

inline Var pow_scalar(Var a, Real e) {
  Tape& t = detail::tape_of(a);
  if ((t.value(a).array() <= 0.0).any() && e < 1.0)
    throw DomainError("pow of a non-positive base with exponent < 1");
  return detail::unary_elementwise(a, [e](Real x) { return std::pow(x, e); },
                                   [e](Real x) { return e * std::pow(x, e - 1.0); });
}

// Hard clamp; subgradient 0 outside the open interval, including the kinks.
inline Var clamp(Var a, Real lo, Real hi) {
  return detail::unary_elementwise(
      a, [lo, hi](Real x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](Real x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

inline Var clamp_min(Var a, Real lo) {
  return detail::unary_elementwise(a, [lo](Real x) { return x < lo ? lo : x; },
                                   [lo](Real x) { return x > lo ? 1.0 : 0.0; });
}

// ---- reductions and structured ops ----

// Softmax of a per-edge column within segments (here: the out-neighborhood of
// each source node). The per-segment max is subtracted before exponentiation.
inline Var softmax_segments(Var logits, std::span<const int> seg, int n_segments) {
  Tape& t = detail::tape_of(logits);
  const Mat& x = t.value(logits);
  if (x.cols() != 1 || static_cast<size_t>(x.rows()) != seg.size())
    throw ShapeError("softmax_segments: logits must be one column aligned with segment ids");
  std::vector<Real> seg_max(n_segments, -std::numeric_limits<Real>::infinity());
  for (size_t k = 0; k < seg.size(); ++k) {
    if (seg[k] < 0 || seg[k] >= n_segments) throw ShapeError("softmax_segments: id out of range");
    seg_max[seg[k]] = std::max(seg_max[seg[k]], x(k, 0));
  }
  Mat out(x.rows(), 1);
  std::vector<Real> seg_sum(n_segments, 0.0);
  for (size_t k = 0; k < seg.size(); ++k) {
    out(k, 0) = std::exp(x(k, 0) - seg_max[seg[k]]);
    seg_sum[seg[k]] += out(k, 0);
  }
  for (size_t k = 0; k < seg.size(); ++k) out(k, 0) /= seg_sum[seg[k]];
  const Var parents[] = {logits};
  return t.make_op(std::move(out), parents,
                   [a = logits.id, seg, n_segments](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    const Mat& g = t.grad_buffer(self);
    const Mat& s = t.node_value(self);
    std::vector<Real> seg_dot(n_segments, 0.0);
    for (size_t k = 0; k < seg.size(); ++k) seg_dot[seg[k]] += g(k, 0) * s(k, 0);
    Mat& ga = t.grad_buffer(a);
    for (size_t k = 0; k < seg.size(); ++k)
      ga(k, 0) += s(k, 0) * (g(k, 0) - seg_dot[seg[k]]);
  });
}

// Per-row cross entropy of raw logits against integer labels, via a stable
// log-sum-exp; returns an n x 1 column.
inline Var cross_entropy_rows(Var logits, std::span<const int> labels) {
  Tape& t = detail::tape_of(logits);
  const Mat& x = t.value(logits);
  if (static_cast<size_t>(x.rows()) != labels.size())
    throw ShapeError("cross_entropy_rows: labels do not match rows");
  for (size_t r = 0; r < labels.size(); ++r)
    if (labels[r] < 0 || labels[r] >= x.cols())
      throw ShapeError("cross_entropy_rows: label out of range");
  Mat out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Real mx = x.row(r).maxCoeff();
    const Real lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    out(r, 0) = lse - x(r, labels[r]);
  }
  const Var parents[] = {logits};
  return t.make_op(std::move(out), parents, [a = logits.id, labels](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    const Mat& g = t.grad_buffer(self);
    const Mat& x = t.node_value(a);
    Mat& ga = t.grad_buffer(a);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Real mx = x.row(r).maxCoeff();
      Eigen::Array<Real, 1, Eigen::Dynamic> p = (x.row(r).array() - mx).exp();
      p /= p.sum();
      ga.row(r) += g(r, 0) * p.matrix();
      ga(r, labels[r]) -= g(r, 0);
    }
  });
}

// Mean of selected rows of a column vector; the training-loss reduction.
inline Var mean_rows(Var v, std::span<const int> rows) {
  Tape& t = detail::tape_of(v);
  const Mat& x = t.value(v);
  if (x.cols() != 1) throw ShapeError("mean_rows: expected a column vector");
  if (rows.empty()) throw ShapeError("mean_rows: empty row selection");
  Real sum = 0.0;
  for (int r : rows) {
    if (r < 0 || r >= x.rows()) throw ShapeError("mean_rows: row out of range");
    sum += x(r, 0);
  }
  Mat out(1, 1);
  out(0, 0) = sum / static_cast<Real>(rows.size());
  const Var parents[] = {v};
  return t.make_op(std::move(out), parents, [a = v.id, rows](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    const Real g = t.grad_buffer(self)(0, 0) / static_cast<Real>(rows.size());
    Mat& ga = t.grad_buffer(a);
    for (int r : rows) ga(r, 0) += g;
  });
}

inline Var sum_all(Var a) {
  Tape& t = detail::tape_of(a);
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum();
  const Var parents[] = {a};
  return t.make_op(std::move(out), parents, [a = a.id](Tape& t, int self) {
    if (!t.node_requires_grad(a)) return;
    t.grad_buffer(a).array() += t.grad_buffer(self)(0, 0);
  });
}

}  // namespace kedge
