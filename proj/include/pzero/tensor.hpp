#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pzero {

// Dense row-major matrix. Vectors are 1xN. Templated on the scalar so that
// training runs in single precision while gradient checks run in double.
template <class S>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<S> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), S(0)) {}

  S& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  S operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  S* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const S* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), S(0)); }

  bool operator==(const Mat& other) const = default;
};

// c = a * b, or c += a * b when accumulate is set. a: m x k, b: k x n.
template <class S>
void matmul(Mat<S>& c, const Mat<S>& a, const Mat<S>& b, bool accumulate = false) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) {
    throw std::runtime_error("matmul: shape mismatch");
  }
  if (!accumulate) c.zero();
  for (int i = 0; i < a.rows; ++i) {
    S* ci = c.row(i);
    const S* ai = a.row(i);
    for (int p = 0; p < a.cols; ++p) {
      const S aip = ai[p];
      const S* bp = b.row(p);
      for (int j = 0; j < b.cols; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c = a * b^T (+). a: m x k, b: n x k.
template <class S>
void matmul_nt(Mat<S>& c, const Mat<S>& a, const Mat<S>& b, bool accumulate = false) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows) {
    throw std::runtime_error("matmul_nt: shape mismatch");
  }
  for (int i = 0; i < a.rows; ++i) {
    const S* ai = a.row(i);
    S* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const S* bj = b.row(j);
      S acc = S(0);
      for (int p = 0; p < a.cols; ++p) acc += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

// c = a^T * b (+). a: k x m, b: k x n.
template <class S>
void matmul_tn(Mat<S>& c, const Mat<S>& a, const Mat<S>& b, bool accumulate = false) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols) {
    throw std::runtime_error("matmul_tn: shape mismatch");
  }
  if (!accumulate) c.zero();
  for (int p = 0; p < a.rows; ++p) {
    const S* ap = a.row(p);
    const S* bp = b.row(p);
    for (int i = 0; i < a.cols; ++i) {
      const S api = ap[i];
      S* ci = c.row(i);
      for (int j = 0; j < b.cols; ++j) ci[j] += api * bp[j];
    }
  }
}

// Adds a 1 x cols bias row to every row of m.
template <class S>
void add_row_bias(Mat<S>& m, const Mat<S>& bias) {
  for (int i = 0; i < m.rows; ++i) {
    S* mi = m.row(i);
    const S* b = bias.row(0);
    for (int j = 0; j < m.cols; ++j) mi[j] += b[j];
  }
}

template <class S>
void add_inplace(Mat<S>& a, const Mat<S>& b) {
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

template <class S>
bool all_finite(const Mat<S>& m) {
  for (S x : m.v) {
    if (!std::isfinite(static_cast<double>(x))) return false;
  }
  return true;
}

}  // namespace pzero
