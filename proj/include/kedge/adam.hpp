#pragma once

// Adam with bias correction over a fixed list of named parameters. Moment
// buffers are created on the first step and keyed by position.

#include <kedge/common.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace kedge {

struct NamedParam {
  std::string name;
  Mat value;
};

struct AdamConfig {
  Real lr = 0.01;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::vector<NamedParam>& params, const std::vector<Mat>& grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: gradient count mismatch");
    if (m_.empty()) {
      for (const NamedParam& p : params) {
        m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      }
    }
    ++step_;
    const Real bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<Real>(step_));
    const Real bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<Real>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      const Mat& g = grads[i];
      Mat& p = params[i].value;
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw ShapeError("adam: gradient shape mismatch for parameter '" + params[i].name + "'");
      if (!g.allFinite())
        throw TrainError("non-finite gradient for parameter '" + params[i].name + "' at step " +
                         std::to_string(step_));
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      p.array() -= cfg_.lr * (m_[i].array() / bc1) /
                   ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    }
  }

  long step_count() const { return step_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace kedge
