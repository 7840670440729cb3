#include "mlab/voter.hpp"

#include <cmath>
#include <utility>

namespace mlab {

double AlphaTable::at(int n, int s) const {
  if (n < 0 || n > n_max)
    throw PreconditionViolation("AlphaTable: row " + std::to_string(n) + " outside 0.." +
                                std::to_string(n_max));
  if (s < 0) throw PreconditionViolation("AlphaTable: negative s");
  if (s > n) return 0.0;  // finite speed of propagation
  return rows[n][s];
}

VoterFunctionals::VoterFunctionals(double density) : u(density) {
  if (!(u > 0.0 && u < 1.0))
    throw PreconditionViolation("VoterFunctionals: need density in (0,1)");
}

double VoterFunctionals::s_beta(const Mat& c) const {
  return u * u * mat_sum(c) + (u - u * u) * mat_trace(c);
}

double VoterFunctionals::s_xi(const std::vector<uint8_t>& xi, const Mat& c) {
  NeumaierSum acc;
  int n = c.rows;
  for (int x = 0; x < n; ++x) {
    if (!xi[x]) continue;
    const double* row = c.row(x);
    for (int y = 0; y < n; ++y)
      if (xi[y]) acc.add(row[y]);
  }
  return acc.value();
}

double VoterFunctionals::p1(const std::vector<uint8_t>& xi) {
  long long ones = 0;
  for (uint8_t v : xi) ones += v ? 1 : 0;
  return static_cast<double>(ones) / static_cast<double>(xi.size());
}

double VoterFunctionals::p10(const KernelMatrix& k, const std::vector<uint8_t>& xi) {
  NeumaierSum acc;
  for (int x = 0; x < k.n; ++x) {
    if (!xi[x]) continue;
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
      if (!xi[k.col_idx[p]]) acc.add(k.val[p]);
  }
  return acc.value() / k.n;
}

Mat apply_L(const KernelMatrix& k, const Mat& c) {
  int n = k.n;
  if (c.rows != n || c.cols != n) throw DimensionMismatch("apply_L: matrix size mismatch");
  double invn = 1.0 / n;

  Mat cq, qc;
  k.right_multiply(c, cq);
  k.left_multiply(c, qc);

  Mat out(n, n);
  double scale = (n - 2.0) / n;
  for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = scale * c.a[i] + invn * (cq.a[i] + qc.a[i]);

  std::vector<double> d(n), qd(n);
  for (int x = 0; x < n; ++x) d[x] = c.at(x, x);
  k.matvec(d.data(), qd.data());

  // -(1/N)[diag(C) Q + Q diag(C)] lives on the support of Q
  for (int x = 0; x < n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
      int y = k.col_idx[p];
      out.at(x, y) -= invn * (d[x] + d[y]) * k.val[p];
    }
  // +(1/N) diag(C) + diag(Q diag(C) J)
  for (int x = 0; x < n; ++x) out.at(x, x) += invn * d[x] + invn * qd[x];
  return out;
}

Mat apply_L0(const KernelMatrix& k, const Mat& c) {
  int n = k.n;
  if (c.rows != n || c.cols != n) throw DimensionMismatch("apply_L0: matrix size mismatch");
  double invn = 1.0 / n;
  double tr2 = 2.0 * mat_trace(c) / (static_cast<double>(n) * n);

  Mat cq, qc;
  k.right_multiply(c, cq);
  k.left_multiply(c, qc);

  Mat out(n, n);
  double scale = (n - 2.0) / n;
  for (size_t i = 0; i < out.a.size(); ++i) out.a[i] = scale * c.a[i] + invn * (cq.a[i] + qc.a[i]);
  // -(2 tr/N^2) Q on the support, +(2 tr/N^2) I on the diagonal
  for (int x = 0; x < n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
      out.at(x, k.col_idx[p]) -= tr2 * k.val[p];
  for (int x = 0; x < n; ++x) out.at(x, x) += tr2;
  return out;
}

namespace {

// Stream the alpha rows without materializing the table: visit(n, row) sees
// row n in row[0..n]. The recursion only ever needs the previous row.
template <class Visit>
void stream_alpha_rows(const TraceSeq& t, int n_max, Visit&& visit) {
  if (n_max < 0) throw PreconditionViolation("alpha rows: need n_max >= 0");
  if (t.s_max() < n_max)
    throw InsufficientTraces("alpha rows: recursion to n_max=" + std::to_string(n_max) +
                             " needs traces to s_max >= n_max, have " + std::to_string(t.s_max()));
  double n_states = t.values[0];  // t_0 = N
  double keep = (n_states - 2.0) / n_states;
  double shift = 2.0 / n_states;
  double inj = 2.0 / (n_states * n_states);

  std::vector<double> cur(n_max + 2, 0.0), next(n_max + 2, 0.0);
  visit(0, cur);
  for (int n = 0; n < n_max; ++n) {
    NeumaierSum w;
    for (int s = 1; s <= n; ++s) w.add(cur[s] * t.values[s]);
    double weighted = w.value();
    next[0] = inj + cur[0] + inj * weighted;
    next[1] = -inj + keep * cur[1] - inj * weighted;
    for (int s = 2; s <= n + 1; ++s) next[s] = keep * cur[s] + shift * cur[s - 1];
    std::swap(cur, next);
    visit(n + 1, cur);
  }
}

}  // namespace

AlphaTable alpha_table(const TraceSeq& t, int n_max) {
  AlphaTable a;
  a.n_max = n_max;
  a.traces = t;
  a.rows.resize(n_max + 1);
  stream_alpha_rows(t, n_max, [&](int n, const std::vector<double>& row) {
    a.rows[n].assign(row.begin(), row.begin() + n + 1);
  });
  return a;
}

std::complex<double> alpha_generating_function(const Spectrum& sp, std::complex<double> zeta,
                                               std::complex<double> q, GenMode mode, int n_terms) {
  int n = sp.n();
  double nn = n;
  if (std::abs(zeta) >= 1.0)
    throw OutsideDomain("alpha_generating_function: need |zeta| < 1, got " +
                        std::to_string(std::abs(zeta)));
  if (std::abs(q) > 1.0 + 1e-12)
    throw OutsideDomain("alpha_generating_function: need |q| <= 1, got " +
                        std::to_string(std::abs(q)));

  if (mode == GenMode::closed_form) {
    std::complex<double> trace = 0.0;
    for (double qi : sp.eigenvalues) trace += 1.0 / (nn - zeta * (nn - 2.0 + 2.0 * qi));
    std::complex<double> one(1.0, 0.0);
    std::complex<double> num = 2.0 * zeta * (one - q) / (nn - zeta * (nn - 2.0 + 2.0 * q));
    return num / (nn * (one - zeta) * (one - zeta) * trace);
  }

  // direct_sum: rows are bounded by 3 (1/N)(1+6/N)^{n-1}, so the tail after
  // n_terms is controlled only when |zeta| (1+6/N) < 1.
  double growth = 1.0 + 6.0 / nn;
  double r = std::abs(zeta) * growth;
  if (r >= 1.0)
    throw OutsideDomain("alpha_generating_function: direct_sum needs |zeta| < N/(N+6) = " +
                        std::to_string(nn / (nn + 6.0)));
  auto tail_bound = [&](int terms) {
    return 3.0 / nn * std::pow(std::abs(zeta), terms + 1) * std::pow(growth, terms) / (1.0 - r);
  };
  if (n_terms <= 0) {
    n_terms = 1;
    while (tail_bound(n_terms) >= 1e-10 && n_terms < 1000000) ++n_terms;
  } else if (tail_bound(n_terms) >= 1e-10) {
    throw OutsideDomain("alpha_generating_function: n_terms=" + std::to_string(n_terms) +
                        " leaves tail bound " + std::to_string(tail_bound(n_terms)) +
                        " >= 1e-10");
  }

  TraceSeq t = trace_seq(sp, n_terms);
  std::complex<double> acc = 0.0, zp = 1.0;  // zp = zeta^n
  stream_alpha_rows(t, n_terms, [&](int nrow, const std::vector<double>& row) {
    if (nrow > 0) {
      std::complex<double> inner = 0.0, qp = 1.0;  // qp = q^s
      for (int s = 0; s <= nrow; ++s) {
        inner += qp * row[s];
        qp *= q;
      }
      acc += zp * inner;
    }
    zp *= zeta;
  });
  return acc;
}

int series_truncation_index(int n_states, double lambda, double u, double tol) {
  if (lambda <= 0.0) throw PreconditionViolation("series truncation: need lambda > 0");
  if (!(u > 0.0 && u < 1.0)) throw PreconditionViolation("series truncation: need u in (0,1)");
  if (tol <= 0.0) throw PreconditionViolation("series truncation: need tol > 0");
  double target = tol * u * (1.0 - u);
  if (target >= 1.0) return 1;
  double nn = n_states;
  double idx = std::ceil(std::log(target) / std::log(nn / (nn + lambda)));
  return std::max(1, static_cast<int>(idx));
}

double series_tail_bound(int n_states, double lambda, double u, int n_trunc) {
  double nn = n_states;
  return std::pow(nn / (nn + lambda), n_trunc) / (u * (1.0 - u));
}

SeriesResult laplace_series_exact(const KernelMatrix& k, double lambda, double u, double tol) {
  int n = k.n;
  int n_trunc = series_truncation_index(n, lambda, u, tol);
  VoterFunctionals f(u);

  Mat c = Mat::constant(n, 1.0 / n);  // J
  double s_prev = f.s_beta(c);
  double weight = 1.0, decay = n / (n + lambda);
  NeumaierSum acc;
  for (int step = 0; step < n_trunc; ++step) {
    Mat next = apply_L(k, c);
    double s_next = f.s_beta(next);
    acc.add(weight * (s_next - s_prev) / n);
    weight *= decay;
    c = std::move(next);
    s_prev = s_next;
  }
  double prefactor = lambda * n * static_cast<double>(n) / (2.0 * u * (1.0 - u) * (n + lambda));
  SeriesResult r;
  r.value = 1.0 - prefactor * acc.value();
  r.truncation_index = n_trunc;
  r.tail_bound = series_tail_bound(n, lambda, u, n_trunc);
  return r;
}

SeriesResult laplace_series_approx(const Spectrum& sp, double lambda, double u, ApproxMode mode,
                                   double tol) {
  if (lambda <= 0.0) throw PreconditionViolation("laplace_series_approx: need lambda > 0");
  SeriesResult r;
  if (mode == ApproxMode::trace_ratio) {
    r.value = green_ratio(sp, lambda);
    return r;
  }

  int n = sp.n();
  double nn = n;
  int n_trunc = series_truncation_index(n, lambda, u, tol);
  TraceSeq t = trace_seq(sp, n_trunc);

  // g(n) = sum_s alpha(n,s) (u^2 N + (u-u^2) tr(Q^s)) / N; the series term is
  // the increment g(n+1) - g(n), weighted geometrically.
  double uu = u * u, uv = u - u * u;
  double weight = 1.0, decay = nn / (nn + lambda);
  double g_prev = 0.0;
  NeumaierSum acc;
  stream_alpha_rows(t, n_trunc, [&](int nrow, const std::vector<double>& row) {
    if (nrow == 0) return;
    NeumaierSum g;
    for (int s = 0; s <= nrow; ++s) g.add(row[s] * (uu * nn + uv * t.values[s]));
    double g_cur = g.value() / nn;
    acc.add(weight * (g_cur - g_prev));
    weight *= decay;
    g_prev = g_cur;
  });
  double prefactor = lambda * nn * nn / (2.0 * u * (1.0 - u) * (nn + lambda));
  r.value = 1.0 - prefactor * acc.value();
  r.truncation_index = n_trunc;
  r.tail_bound = series_tail_bound(n, lambda, u, n_trunc);
  return r;
}

Mat eta_n(const KernelMatrix& k, const AlphaTable& a, int n) {
  if (n < 1) throw PreconditionViolation("eta_n: need n >= 1");
  if (n - 1 > a.n_max)
    throw PreconditionViolation("eta_n: need table rows up to " + std::to_string(n - 1) +
                                ", have " + std::to_string(a.n_max));
  int nn = k.n;
  Mat out(nn, nn);
  if (n <= 2) return out;  // rows 0 and 1 carry no s >= 2 coefficients

  auto d = diag_powers(k, n - 1);
  std::vector<double> qd(nn);
  double n2 = static_cast<double>(nn) * nn;
  for (int s = 2; s <= n - 1; ++s) {
    double coeff = a.at(n - 1, s);
    if (coeff == 0.0) continue;
    const auto& ds = d[s];
    NeumaierSum trs;
    for (double v : ds) trs.add(v);
    double tr = trs.value();
    k.matvec(ds.data(), qd.data());
    for (int x = 0; x < nn; ++x)
      out.at(x, x) += coeff * (ds[x] / nn + qd[x] / nn - 2.0 * tr / n2);
    for (int x = 0; x < nn; ++x)
      for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
        int y = k.col_idx[p];
        out.at(x, y) += coeff * (2.0 * tr / n2 - (ds[x] + ds[y]) / nn) * k.val[p];
      }
  }
  return out;
}

}  // namespace mlab
