#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kedge {

// 64-bit reals throughout; 32-bit is not enough to pass the 1e-4 gradient
// checks that gate every differentiable op.
using Real = double;

// Row-major dense matrix. Per-edge vectors are stored as m x 1 matrices so
// the tape handles both uniformly.
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct Edge {
  int src = 0;
  int dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Mat col_mat(const Vec& v) {
  Mat m(v.size(), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

inline Vec as_vec(const Mat& m) {
  if (m.cols() != 1) throw ShapeError("expected a column vector, got " +
                                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  Vec v(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[i] = m(i, 0);
  return v;
}

}  // namespace kedge
