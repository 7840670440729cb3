#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "mlab/kernel.hpp"
#include "mlab/spectral.hpp"

namespace mlab {

// Coefficient table of the reduced correlation dynamics: row n holds the
// coefficients alpha(n, s), s = 0..n, of the expansion of the n-fold reduced
// operator applied to the uniform-pair matrix J in powers of Q. Rows beyond
// s = n are identically zero (finite speed of propagation) and every row sums
// to zero.
struct AlphaTable {
  int n_max = 0;
  std::vector<std::vector<double>> rows;  // rows[n] holds alpha(n, 0..n)
  TraceSeq traces;                        // the trace sequence feeding the recursion

  double at(int n, int s) const;  // 0 for s > n
};

// Linear functionals of pair-correlation matrices used throughout:
// s_beta averages <xi|C|xi> over i.i.d. Bernoulli(u) configurations,
// s_xi evaluates a fixed configuration, p1 is the density of ones, and p10 is
// the mean local density of kernel-adjacent disagreeing pairs,
//   p10(xi) = (1/N) sum_{x,y} Q(x,y) xi(x)(1 - xi(y)) = p1(xi) - (1/N)<xi|Q|xi>.
// One voter update raises E[p1^2] by exactly (2/N^2) E[p10], which is what
// makes this the functional driving the meeting-time series.
struct VoterFunctionals {
  double u = 0.5;

  explicit VoterFunctionals(double density);

  // E_xi <xi|C|xi> = u^2 * (entry sum of C) + (u - u^2) * tr(C)
  double s_beta(const Mat& c) const;

  static double s_xi(const std::vector<uint8_t>& xi, const Mat& c);
  static double p1(const std::vector<uint8_t>& xi);
  static double p10(const KernelMatrix& k, const std::vector<uint8_t>& xi);
};

// One step of the pair-correlation operator of the voter dynamics:
// L(C) = ((N-2)/N) C + (1/N)(CQ + QC) - (1/N)[diag(C) Q + Q diag(C)]
//        + (1/N) diag(C) + diag(Q diag(C) J).
// diag(C) denotes the diagonal matrix carrying C's diagonal and J the
// constant matrix with entries 1/N. Cost O(nnz(Q) * N).
Mat apply_L(const KernelMatrix& k, const Mat& c);

// The trace-smoothed variant: diagonal extraction replaced by (tr(C)/N) I:
// L0(C) = ((N-2)/N) C + (1/N)(CQ + QC) - (2 tr(C)/N^2) Q + (2 tr(C)/N^2) I.
// Agrees with apply_L on J always, and on all powers Q^s iff the kernel is
// walk-regular.
Mat apply_L0(const KernelMatrix& k, const Mat& c);

// alpha(0,s) = 0;
// alpha(n+1,0) =  2/N^2 + alpha(n,0) + (2/N^2) sum_{s>=1} alpha(n,s) tr(Q^s)
// alpha(n+1,1) = -2/N^2 + ((N-2)/N) alpha(n,1)
//                       - (2/N^2) sum_{s>=1} alpha(n,s) tr(Q^s)
// alpha(n+1,s) = ((N-2)/N) alpha(n,s) + (2/N) alpha(n,s-1),  s >= 2.
// Requires t.s_max >= n_max.
AlphaTable alpha_table(const TraceSeq& t, int n_max);

enum class GenMode { closed_form, direct_sum };

// Generating function sum_{n,s} zeta^n q^s alpha(n,s).
// closed_form evaluates the spectral expression
//   2 zeta (1-q) [N - zeta(N-2+2q)]^{-1} / (N (1-zeta)^2 tr(1/(N - zeta(N-2+2Q))))
// valid for |zeta| < 1, |q| <= 1. direct_sum streams the recursion and
// truncates; it requires |zeta| (1 + 6/N) < 1 so the geometric tail bound on
// the rows applies, and picks n_terms automatically (tail < 1e-10) when
// n_terms <= 0.
std::complex<double> alpha_generating_function(const Spectrum& s, std::complex<double> zeta,
                                               std::complex<double> q, GenMode mode,
                                               int n_terms = 0);

struct SeriesResult {
  double value = 0.0;
  int truncation_index = 0;  // number of series terms summed
  double tail_bound = 0.0;   // geometric bound on the discarded remainder
};

// Truncation rule shared by the series evaluators: the remainder after
// n_trunc terms is at most (1/(u(1-u))) (N/(N+lambda))^{n_trunc}, so
// n_trunc = ceil(log(tol * u(1-u)) / log(N/(N+lambda))).
int series_truncation_index(int n_states, double lambda, double u, double tol);
double series_tail_bound(int n_states, double lambda, double u, int n_trunc);

// Exponential transform of the first-order meeting time by iterating the full
// pair operator:
//   E[e^{-lambda M}] = 1 - (lambda N^2 / (2u(1-u)(N+lambda)))
//        * sum_n (N/(N+lambda))^n [s_beta(L^{n+1}(J)) - s_beta(L^n(J))] / N.
// The output does not depend on u; u only reweights the functional.
SeriesResult laplace_series_exact(const KernelMatrix& k, double lambda, double u, double tol);

enum class ApproxMode { trace_ratio, alpha_series };

// The trace-smoothed value of the same series. trace_ratio evaluates it in
// closed form as the Green-function ratio; alpha_series sums the reduced
// series through the alpha recursion with the same truncation rule. Both
// modes return the identical quantity.
SeriesResult laplace_series_approx(const Spectrum& s, double lambda, double u, ApproxMode mode,
                                   double tol = 1e-8);

// Walk-regularity defect matrix: with A holding rows up to n-1,
//   eta_n = sum_s alpha(n-1,s) [D_s + O_s],
//   D_s = (1/N) diag(Q^s) + diag(Q diag(Q^s) J) - (2 tr(Q^s)/N^2) I
//   O_s = -(1/N)(diag(Q^s) Q + Q diag(Q^s)) + (2 tr(Q^s)/N^2) Q.
// Zero for every walk-regular kernel and for n <= 2 always.
Mat eta_n(const KernelMatrix& k, const AlphaTable& a, int n);

}  // namespace mlab
