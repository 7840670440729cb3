#pragma once

#include <vector>

#include "mlab/kernel.hpp"
#include "mlab/spectral.hpp"

namespace mlab {

// Full evaluation of the three-term error bound on
// |E[e^{-lambda M_{U,V}}] - green_ratio|:
//   term1 = 4 (1 + lambda/N)^{-mN}
//   term2 = [(1 + lambda/N)(1 - eps/N)]^{-(mN+1)}
//             * C_eps * lambda (N - eps) / ((lambda - eps) N - lambda eps)
//   term3 = 80 * Delta * (1 + 6/N)^{mN}
// Hypotheses: eps in (0,1], lambda > eps, (lambda-eps)N - lambda eps > 0,
// m >= 1, gamma in [0,1], N > 8.
struct BoundReport {
  // inputs
  int n = 0;
  double lambda = 0.0;
  double epsilon = 0.0;
  int m = 0;
  double gamma = 0.0;
  int s_max = 0;

  // assembled bound
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double total = 0.0;
  double delta = 0.0;  // inhomogeneity parameter, minimized over s <= s_max
  double c_eps = 0.0;
  int s_star = 0;       // the s attaining delta
  bool vacuous = false; // total > 2: the left side can never exceed 2

  // measured left side (present when requested)
  bool has_lhs = false;
  double lhs_exact = 0.0;    // |series - ratio|
  double series_value = 0.0; // exact transform E[e^{-lambda M_{U,V}}]
  double ratio_value = 0.0;  // green ratio
};

// Per-state agreement counts: counts[s][x] = #{y : |Q^s(x,x) - Q^s(y,y)| <= gamma}.
struct RSetProfile {
  int n = 0;
  double gamma = 0.0;
  std::vector<std::vector<int>> counts;  // indexed [s][x], s = 0..s_max
};

// #{y : |Q^s(x,x) - Q^s(y,y)| <= gamma}; always >= 1 (y = x), = N at gamma = 1.
int r_set_size(const KernelMatrix& k, int x, int s, double gamma);

RSetProfile r_set_profile(const KernelMatrix& k, int s_max, double gamma);

struct DeltaResult {
  double delta = 0.0;
  int s_star = 0;
};

// Delta = min over s in {1..s_max} of
//   min{ min_x [N - #R_gamma(x,s)]/N + gamma,  tr(|Q|^s)/N }.
// Truncating the minimization over s can only increase the returned value, so
// downstream bounds stay valid.
DeltaResult delta_q_gamma(const KernelMatrix& k, double gamma, int s_max);

// C_eps = (1/pi) (2/eps + 9 + pi + 32 sqrt(2)/(1 - cos 1)^{1/2}) (4+eps)/eps,
// for eps in (0,1]. Diverges as eps -> 0.
double c_epsilon(double epsilon);

struct DiagDeviationNorms {
  double norm_smoothed = 0.0;  // ||diag(Q diag(Q^s) J) - (tr(Q^s)/N^2) I||
  double norm_diag = 0.0;      // ||(1/N) diag(Q^s) - (tr(Q^s)/N^2) I||
  double bound_r = 0.0;        // 4 min_x [N - #R_gamma(x,s)]/N + gamma
  double bound_trace = 0.0;    // 2 tr(|Q|^s ; Q < 1)/N
};

// Entrywise-l1 norms of the two diagonal-deviation matrices together with the
// two analytic bounds that dominate them:
// norm_smoothed <= norm_diag <= min(bound_r, bound_trace).
DiagDeviationNorms diag_deviation_norms(const KernelMatrix& k, int s, double gamma);

// Default truncation for the Delta minimization: ceil(4 log N).
int default_s_max(int n);

// Assemble the full report. s_max <= 0 selects default_s_max(N). When
// with_lhs is set, the exact transform is computed (operator-series iteration
// for N <= 200, pair-system solve above) and compared against the ratio.
// Throws PreconditionViolation listing every violated hypothesis.
BoundReport theorem1_bound(const KernelMatrix& k, double lambda, double epsilon, int m,
                           double gamma, int s_max = 0, bool with_lhs = false);

}  // namespace mlab
