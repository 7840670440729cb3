#pragma once

#include <vector>

#include "mlab/errors.hpp"
#include "mlab/kernel.hpp"

namespace mlab {

// Eigenvalue data of a symmetric stochastic kernel. Eigenvalues are sorted
// ascending; eigenvectors are stored column-major alongside (vectors[i] is the
// i-th eigenvector, matching eigenvalues[i]). Immutable after construction.
struct Spectrum {
  std::vector<double> eigenvalues;          // ascending, in [-1, 1]
  std::vector<std::vector<double>> vectors; // vectors[i][x] = U(x, i)
  bool has_unit = false;                    // largest eigenvalue equals 1
  int n() const { return static_cast<int>(eigenvalues.size()); }
};

// Traces t_s = tr(Q^s) = sum_i q_i^s for s = 0..s_max. t_0 = N, t_1 = 0.
struct TraceSeq {
  std::vector<double> values;
  int s_max() const { return static_cast<int>(values.size()) - 1; }
  double at(int s) const;
};

// Full symmetric eigendecomposition with a residual check ||Qv - qv|| <= 1e-8
// on every pair. Throws EigensolverFailure if the backend fails or the
// residual check does not hold.
Spectrum spectrum(const KernelMatrix& k);

// sum_i q_i^s, or sum_i |q_i|^s when absolute is set; exclude_unit drops
// eigenvalues within 1e-9 of 1 (the restriction of a trace to the part of the
// spectrum strictly below 1).
double trace_power(const Spectrum& s, int power, bool absolute = false, bool exclude_unit = false);

TraceSeq trace_seq(const Spectrum& s, int s_max);

// tr(Q / (lambda + 2(I - Q))) / tr(1 / (lambda + 2(I - Q))). Strictly
// decreasing in lambda, valued in (-1, 1).
double green_ratio(const Spectrum& s, double lambda);

// Same ratio computed without the eigendecomposition: two linear solves with
// the matrix (lambda + 2)I - 2Q. Cross-check route for green_ratio.
double green_ratio_resolvent(const KernelMatrix& k, double lambda, double tol = 1e-12);

// Exponential transform of the single-walker hitting time: with
// G = (lambda/2 + I - Q)^{-1}, returns G(x,y) / G(y,y), in (0, 1].
double hitting_laplace(const KernelMatrix& k, int x, int y, double lambda);

struct CircleTraceExtrema {
  double min = 0.0, max = 0.0;           // grid extrema of the absolute trace value
  double argmin_angle = 0.0, argmax_angle = 0.0;
  double closed_form_min = 0.0;          // endpoint value at zeta = +(1 - eps/N)
  double closed_form_max = 0.0;          // endpoint value at zeta = -(1 - eps/N)
};

// Extrema over the circle |zeta| = 1 - eps/N of
// |(1/N) tr((1 - zeta) / (N - zeta(N - 2 + 2Q)))|. The closed-form endpoint
// values are evaluated per eigenvalue; at eps = 0 the unit-eigenvalue term of
// the minimum is read as its limit 1/N (so the min becomes 1/N^2 plus
// vanishing contributions).
CircleTraceExtrema circle_trace_extrema(const Spectrum& s, double epsilon, int grid_points);

// Spectral density of the k-regular infinite tree:
// f_k(q) = sqrt(4(k-1) - (kq)^2) / (2 pi (1 - q^2)) on
// [-2 sqrt(k-1)/k, 2 sqrt(k-1)/k], zero outside.
double kesten_mckay_density(int k, double q);

// integral of q^s f_k(q) dq; equals the s-step return probability of the walk
// on the infinite k-regular tree. Adaptive quadrature on the substitution
// q = (2 sqrt(k-1)/k) cos(theta), absolute tolerance 1e-10.
double kesten_mckay_moment(int k, int s);

// Tree analogue of green_ratio:
// integral q/(lambda+2-2q) f_k dq / integral 1/(lambda+2-2q) f_k dq.
// k = 2 is allowed but the walk is recurrent; recurrence_warning is set.
double tree_green_ratio(int k, double lambda, bool* recurrence_warning = nullptr);

}  // namespace mlab
