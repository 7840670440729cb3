#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mlab/errors.hpp"

namespace mlab {

// Compensated (Neumaier) accumulator. Used wherever a sum over N^2 entries or a
// long series feeds a tolerance-checked result, so partitioned evaluation with a
// fixed reduction order reproduces bitwise.
struct NeumaierSum {
  double s = 0.0;
  double c = 0.0;

  void add(double v) {
    double t = s + v;
    if (std::fabs(s) >= std::fabs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

// Row-major dense matrix, minimal on purpose.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static Mat constant(int n, double v) { return Mat(n, n, v); }
};

inline double mat_trace(const Mat& m) {
  NeumaierSum s;
  for (int i = 0; i < m.rows; ++i) s.add(m.at(i, i));
  return s.value();
}

inline double mat_sum(const Mat& m) {
  NeumaierSum s;
  for (double v : m.a) s.add(v);
  return s.value();
}

// Entrywise l1 norm: ||C|| = sum_{x,y} |C(x,y)|.
inline double mat_l1_norm(const Mat& m) {
  NeumaierSum s;
  for (double v : m.a) s.add(std::fabs(v));
  return s.value();
}

inline double mat_max_abs_diff(const Mat& x, const Mat& y) {
  double d = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) d = std::max(d, std::fabs(x.a[i] - y.a[i]));
  return d;
}

// Conjugate gradient for a symmetric positive definite operator given as a
// matvec callable apply(v, out). Solves A x = b to ||b - A x||_2 <= tol
// (absolute). x is used as the starting guess. Returns the iteration count;
// throws SolveFailure if max_iter iterations do not reach tol.
template <class MatVec>
int cg_solve(size_t n, MatVec&& apply, const double* b, double* x, double tol, int max_iter) {
  std::vector<double> r(n), p(n), ap(n);
  apply(x, ap.data());
  double rr = 0.0;
  for (size_t i = 0; i < n; ++i) {
    r[i] = b[i] - ap[i];
    p[i] = r[i];
    rr += r[i] * r[i];
  }
  double tol2 = tol * tol;
  if (rr <= tol2) return 0;
  for (int it = 1; it <= max_iter; ++it) {
    apply(p.data(), ap.data());
    double pap = 0.0;
    for (size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) throw SolveFailure("cg_solve: operator not positive definite");
    double alpha = rr / pap;
    double rr_next = 0.0;
    for (size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_next += r[i] * r[i];
    }
    if (rr_next <= tol2) return it;
    double beta = rr_next / rr;
    rr = rr_next;
    for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  throw SolveFailure("cg_solve: no convergence in " + std::to_string(max_iter) + " iterations");
}

}  // namespace mlab
