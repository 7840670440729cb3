#pragma once

#include <cstdint>
#include <vector>

#include "mlab/kernel.hpp"

namespace mlab {

// phi(x,y) = E[e^{-lambda M_{x,y}}] for the first-meeting time M_{x,y} of two
// independent rate-1 chains. Solves the first-epoch system
//   (2 + lambda) phi(x,y) = sum_z Q(x,z) phi(z,y) + sum_z Q(y,z) phi(x,z),
//   phi(x,x) = 1,
// whose off-diagonal part is symmetric positive definite.
struct PairLaplaceTable {
  int n = 0;
  double lambda = 0.0;
  Mat phi;
  double max_residual = 0.0;  // largest absolute equation residual
};

// Conjugate-gradient solve of the pair system; every equation residual is
// checked against 1e-10.
PairLaplaceTable exact_pair_laplace(const KernelMatrix& k, double lambda);

// E[e^{-lambda M_{U,V}}] = (1/N) sum_{x,y} Q(x,y) phi(x,y): the transform of
// the meeting time from a uniform state and one of its Q-neighbors.
double exact_first_order_laplace(const KernelMatrix& k, double lambda);

// P(M_{x,y} > t) for the product chain, by uniformization: the merged jump
// process has rate 2, and survival after j jump events follows
// sigma_{j+1} = (1/2)(Q sigma_j + sigma_j Q) restricted off-diagonal.
// Series truncated at the 1e-9 Poisson tail; result within 1e-8.
double meeting_tail(const KernelMatrix& k, int x, int y, double t);

enum class StartKind {
  uniform_pair,     // x, y independent uniform
  q_adjacent_pair,  // x uniform, y one Q-step from x
  fixed_pair,       // given (x, y)
  s_step,           // x uniform, y at s Q-steps along one trajectory
  independent_steps // common uniform start, then m and n independent Q-steps
};

struct StartSpec {
  StartKind kind = StartKind::q_adjacent_pair;
  int x = 0, y = 0;  // fixed_pair
  int s = 0;         // s_step
  int m = 0, n = 0;  // independent_steps

  static StartSpec uniform_pair();
  static StartSpec q_adjacent_pair();
  static StartSpec fixed_pair(int x, int y);
  static StartSpec s_step(int s);
  static StartSpec independent_steps(int m, int n);
};

struct MeetingEstimate {
  double value = 0.0;      // mean of e^{-lambda M} over samples
  double std_error = 0.0;  // sample standard deviation / sqrt(samples)
  long long samples = 0;
  uint64_t seed = 0;
  double lambda = 0.0;
};

// Monte Carlo estimate of E[e^{-lambda M}] under the chosen start. Event-driven
// simulation: merged rate-2 exponential clock, fair coin for which chain
// jumps, meeting checked after every jump. Samples are drawn in fixed-size
// chunks with one counter-derived RNG stream per chunk and partial sums
// combined in chunk order, so the result is bit-identical for any worker
// count. A sample is settled once lambda * elapsed > 746, where the
// contribution e^{-lambda M} underflows to zero exactly.
MeetingEstimate simulate_meeting(const KernelMatrix& k, const StartSpec& start, double lambda,
                                 long long samples, uint64_t seed, int workers = 1);

// Raw meeting times (sorted ascending) from the same sampling mechanics; used
// for distributional comparisons.
std::vector<double> simulate_meeting_times(const KernelMatrix& k, const StartSpec& start,
                                           long long samples, uint64_t seed, int workers = 1);

// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)| for sorted
// samples.
double ks_two_sample(const std::vector<double>& a_sorted, const std::vector<double>& b_sorted);

// Defect of the meeting-time shift identity relating the pair started at the
// ends of an (m+n+1)-step bridge to the pair started at independent m- and
// n-step offsets:
//   |  int_0^t 2 e^{-2(t-v)} P(M_{V0,V_{m+n+1}} > v) dv
//    - P(M_{U_m,V_n} > t) + e^{-2t}(1 - tr(Q^{m+n})/N)
//    - int_0^t 2 e^{-2(t-v)} (1/N) sum_{x,y} Q^{m+n}(x,x) Q(x,y) P(M_{x,y} > v) dv |.
// Convolutions by composite Gauss-Legendre quadrature with quad_points nodes;
// tails from one shared uniformization table.
double higher_order_residual(const KernelMatrix& k, int m, int n, double t, int quad_points);

}  // namespace mlab
