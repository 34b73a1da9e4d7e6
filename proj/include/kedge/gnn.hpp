#pragma once

// GCN and SGC forward passes over (possibly masked) adjacencies, the
// symmetric degree normalization, Glorot initialization, and the random
// edge-dropping baseline.

#include <kedge/graph.hpp>
#include <kedge/rng.hpp>
#include <kedge/tape.hpp>

#include <random>
#include <span>
#include <vector>

namespace kedge {

enum class ModelKind { GCN, SGC };
enum class Activation { ReLU, Identity };

struct GnnConfig {
  ModelKind model = ModelKind::GCN;
  int layers = 2;
  int hidden = 16;
  int in_dim = 0;
  int classes = 0;
  Activation activation = Activation::ReLU;
};

inline void validate(const GnnConfig& cfg) {
  if (cfg.layers < 1) throw ShapeError("GnnConfig: layers must be >= 1");
  if (cfg.in_dim < 1 || cfg.classes < 1 || cfg.hidden < 1)
    throw ShapeError("GnnConfig: dimensions must be positive");
}

inline Mat glorot(int rows, int cols, std::mt19937_64& rng) {
  const Real limit = std::sqrt(6.0 / (rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = limit * (2.0 * unit_real(rng()) - 1.0);
  return m;
}

// W^(0)..W^(K-1) chaining in_dim -> hidden -> ... -> classes for GCN;
// a single in_dim -> classes map for SGC (K only controls propagation).
inline std::vector<Mat> init_weights(const GnnConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  std::vector<Mat> w;
  if (cfg.model == ModelKind::SGC) {
    w.push_back(glorot(cfg.in_dim, cfg.classes, rng));
    return w;
  }
  for (int k = 0; k < cfg.layers; ++k) {
    const int in = k == 0 ? cfg.in_dim : cfg.hidden;
    const int out = k == cfg.layers - 1 ? cfg.classes : cfg.hidden;
    w.push_back(glorot(in, out, rng));
  }
  return w;
}

// Symmetric normalization v_ij <- v_ij / sqrt(d_i d_j) with d the weighted
// (row-sum) degree of the input. Nodes fully disconnected by masks get their
// degree floored at 1e-8 instead of raising an error.
inline constexpr Real kDegreeFloor = 1e-8;

inline Var gcn_normalize(Tape& t, const EdgeSparseMat& s, Var vals) {
  if (t.value(vals).rows() != s.edge_count() || t.value(vals).cols() != 1)
    throw ShapeError("gcn_normalize: values not aligned with edges");
  Var deg = segment_sum(vals, s.src_ids, s.n);
  Var inv_sqrt = pow_scalar(clamp_min(deg, kDegreeFloor), -0.5);
  return mul(mul(vals, gather_rows(inv_sqrt, s.src_ids)), gather_rows(inv_sqrt, s.dst_ids));
}

// H^(k) = act(A_hat H^(k-1) W^(k-1)); no activation after the last layer
// (row softmax lives inside the loss).
inline Var gcn_forward(Tape& t, const EdgeSparseMat& s, Var norm_vals, Var h0,
                       std::span<const Var> weights, Activation act = Activation::ReLU) {
  Var h = h0;
  for (size_t k = 0; k < weights.size(); ++k) {
    h = matmul(spmm(s.edges, s.n, norm_vals, h), weights[k]);
    if (k + 1 < weights.size() && act == Activation::ReLU) h = relu(h);
  }
  return h;
}

// logits = A_hat^K X W; K = 0 degenerates to the plain linear map.
inline Var sgc_forward(Tape& t, const EdgeSparseMat& s, Var norm_vals, Var x, Var w, int k_hops) {
  (void)t;
  if (k_hops < 0) throw ShapeError("sgc_forward: negative propagation count");
  Var h = x;
  for (int k = 0; k < k_hops; ++k) h = spmm(s.edges, s.n, norm_vals, h);
  return matmul(h, w);
}

// DropEdge baseline: each non-self-loop edge removed independently with
// probability `rate`; training-time only, resampled by the caller per epoch.
inline EdgeSparseMat drop_edge(const EdgeSparseMat& a, Real rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate > 1.0) throw DomainError("drop_edge: rate outside [0,1]");
  std::vector<Edge> kept;
  std::vector<Real> vals;
  for (int k = 0; k < a.edge_count(); ++k) {
    const bool is_loop = a.edges[k].src == a.edges[k].dst;
    const bool dropped = !is_loop && unit_real(rng()) < rate;
    if (!dropped) {
      kept.push_back(a.edges[k]);
      vals.push_back(a.values[k]);
    }
  }
  Vec v(static_cast<Eigen::Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return EdgeSparseMat::build(a.n, std::move(kept), std::move(v));
}

}  // namespace kedge
