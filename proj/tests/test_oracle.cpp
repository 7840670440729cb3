#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mlab/bounds.hpp"
#include "mlab/errors.hpp"
#include "mlab/kernel.hpp"
#include "mlab/oracle.hpp"
#include "mlab/spectral.hpp"
#include "mlab/voter.hpp"
#include "support.hpp"

using namespace mlab;

namespace {

KernelMatrix mixed10k() { return kernel_from_graph(fixtures::mixed10()); }

double poisson_mass(double mean, int j) {
  if (mean <= 0.0) return j == 0 ? 1.0 : 0.0;
  return std::exp(-mean + j * std::log(mean) - std::lgamma(j + 1.0));
}

// 16-point Gauss-Legendre rule on [-1, 1] (positive half; mirrored below).
constexpr double kNode[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                             0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                             0.9445750230732326, 0.9894009349916499};
constexpr double kWeight[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                               0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                               0.0622535239386479, 0.0271524594117541};

// Composite 16-point Gauss-Legendre integral of f over [0, t].
template <class F>
double gl_integrate(F&& f, double t, int panels) {
  double acc = 0.0;
  const double h = t / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h, half = 0.5 * h;
    for (int i = 0; i < 8; ++i) {
      acc += half * kWeight[i] * (f(mid - half * kNode[i]) + f(mid + half * kNode[i]));
    }
  }
  return acc;
}

// Dense reference solve of the pair system on the off-diagonal index set.
Mat dense_pair_solve(const KernelMatrix& k, double lambda) {
  const int n = k.n;
  std::vector<std::vector<double>> q(n, std::vector<double>(n, 0.0));
  for (int x = 0; x < n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) q[x][k.col_idx[p]] = k.val[p];
  std::vector<int> idx(n * n, -1);
  int m = 0;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (x != y) idx[x * n + y] = m++;
  std::vector<double> a(static_cast<size_t>(m) * m, 0.0), b(m, 0.0);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (x == y) continue;
      const int r = idx[x * n + y];
      a[static_cast<size_t>(r) * m + r] += 2.0 + lambda;
      for (int z = 0; z < n; ++z) {
        if (z == y) {
          b[r] += q[x][z];  // phi(y, y) = 1
        } else {
          a[static_cast<size_t>(r) * m + idx[z * n + y]] -= q[x][z];
        }
        if (z == x) {
          b[r] += q[y][z];  // phi(x, x) = 1
        } else {
          a[static_cast<size_t>(r) * m + idx[x * n + z]] -= q[y][z];
        }
      }
    }
  }
  const lapack_int info =
      LAPACKE_dposv(LAPACK_ROW_MAJOR, 'U', m, 1, a.data(), m, b.data(), 1);
  REQUIRE(info == 0);
  Mat phi(n, n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) phi.at(x, y) = (x == y) ? 1.0 : b[idx[x * n + y]];
  }
  return phi;
}

}  // namespace

TEST_CASE("complete-graph pair transforms match the closed form") {
  const KernelMatrix k = named_kernel("complete", 10);
  for (double lambda : {0.2, 1.0, 5.0}) {
    const PairLaplaceTable t = exact_pair_laplace(k, lambda);
    CHECK(t.n == 10);
    CHECK(t.max_residual <= 1e-10);
    const double closed = 2.0 / (2.0 + lambda * 9.0);
    for (int x = 0; x < 10; ++x) {
      for (int y = 0; y < 10; ++y) {
        if (x == y) {
          CHECK(t.phi.at(x, y) == 1.0);
        } else {
          CHECK(t.phi.at(x, y) == doctest::Approx(closed).epsilon(1e-10));
          CHECK(t.phi.at(x, y) == doctest::Approx(t.phi.at(y, x)).epsilon(1e-12));
          CHECK(t.phi.at(x, y) > 0.0);
          CHECK(t.phi.at(x, y) <= 1.0);
        }
      }
    }
    CHECK(exact_first_order_laplace(k, lambda) == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("dense factorization reproduces the conjugate-gradient pair solve") {
  for (double lambda : {0.5, 2.0}) {
    const KernelMatrix k = mixed10k();
    const PairLaplaceTable t = exact_pair_laplace(k, lambda);
    const Mat ref = dense_pair_solve(k, lambda);
    CHECK(mat_max_abs_diff(t.phi, ref) <= 1e-9);
  }
  const KernelMatrix w = fixtures::w6();
  const PairLaplaceTable t = exact_pair_laplace(w, 1.0);
  const Mat ref = dense_pair_solve(w, 1.0);
  CHECK(mat_max_abs_diff(t.phi, ref) <= 1e-9);
}

TEST_CASE("walk-regular first-order transform equals the trace ratio") {
  for (double lambda : {0.2, 1.0, 5.0}) {
    const KernelMatrix k = named_kernel("cycle", 12);
    CHECK(exact_first_order_laplace(k, lambda) ==
          doctest::Approx(green_ratio(k.spectrum_cached(), lambda)).epsilon(1e-9));
  }
}

TEST_CASE("pair-system and operator-series transforms agree on irregular kernels") {
  for (const KernelMatrix& k : {mixed10k(), fixtures::w6()}) {
    for (double lambda : {0.2, 1.0, 5.0}) {
      const double pair_route = exact_first_order_laplace(k, lambda);
      const double series_route = laplace_series_exact(k, lambda, 0.5, 1e-9).value;
      CHECK(pair_route == doctest::Approx(series_route).epsilon(2e-8));
    }
  }
}

TEST_CASE("meeting tails by uniformization match the complete-graph exponential") {
  const KernelMatrix k = named_kernel("complete", 10);
  CHECK(meeting_tail(k, 3, 3, 0.0) == 0.0);
  CHECK(meeting_tail(k, 3, 3, 2.5) == 0.0);
  CHECK(meeting_tail(k, 0, 7, 0.0) == 1.0);
  for (double t : {0.1, 0.5, 2.0, 5.0, 20.0}) {
    // Distinct states merge at rate 2 * (1/9): each jump lands on the partner
    // with probability 1/9.
    CHECK(meeting_tail(k, 0, 7, t) == doctest::Approx(std::exp(-2.0 * t / 9.0)).epsilon(1e-8));
  }
  const KernelMatrix c = named_kernel("cycle", 12);
  double prev = 1.0;
  for (double t : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    const double cur = meeting_tail(c, 0, 3, t);
    CHECK(cur <= prev + 1e-12);
    CHECK(cur >= 0.0);
    prev = cur;
  }
  CHECK_THROWS_AS(meeting_tail(k, 0, 7, -1.0), PreconditionViolation);
  CHECK_THROWS_AS(meeting_tail(k, 0, 99, 1.0), PreconditionViolation);
}

TEST_CASE("tail integral of the uniformization series recovers the pair transform") {
  // 1 - lambda * int_0^inf e^{-lambda t} P(M > t) dt = E[e^{-lambda M}],
  // integrating two independent numerical routes against each other.
  const KernelMatrix k = mixed10k();
  const double lambda = 1.0;
  const PairLaplaceTable tab = exact_pair_laplace(k, lambda);
  const double horizon = 40.0;  // tail below 1e-12 by then
  const double integral = gl_integrate(
      [&](double t) { return std::exp(-lambda * t) * meeting_tail(k, 0, 9, t); }, horizon, 40);
  CHECK(1.0 - lambda * integral == doctest::Approx(tab.phi.at(0, 9)).epsilon(1e-8));
}

TEST_CASE("exponential-shift identity validates the quadrature constants") {
  // int_0^t 2 e^{-2(t-v)} pois_{2v}(j) dv = pois_{2t}(j+1), exactly.
  for (double t : {0.5, 2.0, 5.0}) {
    for (int j = 0; j <= 20; ++j) {
      const double lhs = gl_integrate(
          [&](double v) { return 2.0 * std::exp(-2.0 * (t - v)) * poisson_mass(2.0 * v, j); }, t,
          8);
      CHECK(lhs == doctest::Approx(poisson_mass(2.0 * t, j + 1)).epsilon(1e-10));
      CHECK(std::abs(lhs - poisson_mass(2.0 * t, j + 1)) <= 1e-12);
    }
  }
}

TEST_CASE("meeting-time shift identity holds to quadrature accuracy") {
  const KernelMatrix c = named_kernel("cycle", 12);
  for (int mn : {0, 1, 2}) {
    for (int nn : {0, 1, 2}) {
      for (double t : {0.5, 2.0, 5.0}) {
        CHECK(higher_order_residual(c, mn, nn, t, 96) <= 1e-6);
      }
    }
  }
  const KernelMatrix k = mixed10k();
  CHECK(higher_order_residual(k, 1, 1, 2.0, 96) <= 1e-6);
  CHECK(higher_order_residual(k, 2, 1, 3.0, 96) == higher_order_residual(k, 1, 2, 3.0, 96));
  // Zero offsets make both sides coincide term by term.
  CHECK(higher_order_residual(k, 0, 0, 2.0, 64) <= 1e-12);
  CHECK(higher_order_residual(k, 1, 1, 0.0, 64) <= 1e-15);
  CHECK_THROWS_AS(higher_order_residual(k, -1, 0, 1.0, 64), PreconditionViolation);
  CHECK_THROWS_AS(higher_order_residual(k, 0, 0, -1.0, 64), PreconditionViolation);
  CHECK_THROWS_AS(higher_order_residual(k, 0, 0, 1.0, 16), PreconditionViolation);
}

TEST_CASE("return-probability spread bounds the mixture drift of shifted tails") {
  // | (1/N) sum_x Q^s(x,x) r_x(v) - (tr(Q^s)/N) * avg(v) | <= norm_diag, where
  // r_x(v) = sum_y Q(x,y) P(M_{x,y} > v) and avg is the one-step mixture tail.
  const KernelMatrix k = mixed10k();
  const int s = 3;
  const auto d = diag_powers(k, s);
  const double tr = [&] {
    double acc = 0.0;
    for (int x = 0; x < k.n; ++x) acc += d[s][x];
    return acc;
  }();
  const DiagDeviationNorms norms = diag_deviation_norms(k, s, 0.0);
  for (double v : {0.5, 2.0}) {
    double mixture = 0.0, avg = 0.0;
    for (int x = 0; x < k.n; ++x) {
      double rx = 0.0;
      for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
        rx += k.val[p] * meeting_tail(k, x, k.col_idx[p], v);
      }
      mixture += d[s][x] * rx / k.n;
      avg += rx / k.n;
    }
    CHECK(std::abs(mixture - (tr / k.n) * avg) <= norms.norm_diag + 1e-10);
  }
}

TEST_CASE("simulation from a coincident start settles immediately") {
  const KernelMatrix k = named_kernel("cycle", 12);
  const MeetingEstimate est = simulate_meeting(k, StartSpec::fixed_pair(4, 4), 1.0, 1000, 7);
  CHECK(est.value == 1.0);
  CHECK(est.std_error == 0.0);
  CHECK(est.samples == 1000);
  const auto times = simulate_meeting_times(k, StartSpec::fixed_pair(4, 4), 1000, 7);
  CHECK(times.size() == 1000);
  CHECK(times.front() == 0.0);
  CHECK(times.back() == 0.0);
}

TEST_CASE("simulation agrees with closed forms within standard error") {
  const KernelMatrix k = named_kernel("complete", 10);
  const double closed = 2.0 / 11.0;
  const MeetingEstimate adj =
      simulate_meeting(k, StartSpec::q_adjacent_pair(), 1.0, 100000, 20260822);
  CHECK(adj.std_error > 0.0);
  CHECK(adj.std_error < 2e-3);
  CHECK(std::abs(adj.value - closed) <= 5.0 * adj.std_error + 1e-12);
  // Uniform starts put mass 1/10 on coincident pairs, contributing 1 exactly.
  const MeetingEstimate uni =
      simulate_meeting(k, StartSpec::uniform_pair(), 1.0, 100000, 20260823);
  const double mixed = 0.1 + 0.9 * closed;
  CHECK(std::abs(uni.value - mixed) <= 5.0 * uni.std_error + 1e-12);
}

TEST_CASE("simulation results are bit-identical across worker counts") {
  const KernelMatrix k = mixed10k();
  const MeetingEstimate w1 = simulate_meeting(k, StartSpec::q_adjacent_pair(), 0.7, 20000, 99, 1);
  const MeetingEstimate w3 = simulate_meeting(k, StartSpec::q_adjacent_pair(), 0.7, 20000, 99, 3);
  CHECK(w1.value == w3.value);
  CHECK(w1.std_error == w3.std_error);
  CHECK(w1.samples == w3.samples);
  const MeetingEstimate other =
      simulate_meeting(k, StartSpec::q_adjacent_pair(), 0.7, 20000, 100, 2);
  CHECK(w1.value != other.value);
  const auto t1 = simulate_meeting_times(k, StartSpec::s_step(2), 20000, 424242, 1);
  const auto t3 = simulate_meeting_times(k, StartSpec::s_step(2), 20000, 424242, 3);
  REQUIRE(t1.size() == t3.size());
  CHECK(std::equal(t1.begin(), t1.end(), t3.begin()));
  CHECK(std::is_sorted(t1.begin(), t1.end()));
  CHECK(t1.front() >= 0.0);
}

TEST_CASE("empirical tails from weighted-kernel simulation match uniformization") {
  const KernelMatrix w = fixtures::w6();
  const auto times = simulate_meeting_times(w, StartSpec::fixed_pair(0, 3), 20000, 5151);
  for (double t : {1.0, 3.0}) {
    const auto hi = std::upper_bound(times.begin(), times.end(), t);
    const double emp = static_cast<double>(times.end() - hi) / times.size();
    const double exact = meeting_tail(w, 0, 3, t);
    CHECK(std::abs(emp - exact) <= 4.0 * std::sqrt(exact * (1.0 - exact) / 20000.0) + 1e-3);
  }
}

TEST_CASE("two-sample distance on hand-built samples") {
  CHECK(ks_two_sample({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(ks_two_sample({1.0, 2.0}, {3.0, 4.0}) == 1.0);
  CHECK(ks_two_sample({1.0, 2.0, 3.0}, {1.5}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(ks_two_sample({}, {1.0}), PreconditionViolation);
  CHECK_THROWS_AS(ks_two_sample({1.0}, {}), PreconditionViolation);
}

TEST_CASE("bridge and independent-offset starts share a meeting distribution") {
  // Positions 0 and m+n along one stationary trajectory versus independent m-
  // and n-step walks from a common uniform start.
  const KernelMatrix k = kernel_from_graph(random_regular_graph(3, 60, 33550336));
  const long long samples = 20000;
  const auto bridge = simulate_meeting_times(k, StartSpec::s_step(3), samples, 17, 2);
  const auto split = simulate_meeting_times(k, StartSpec::independent_steps(2, 1), samples, 18, 2);
  const double threshold = 1.9495 * std::sqrt(2.0 / samples);  // alpha = 0.001
  CHECK(ks_two_sample(bridge, split) < threshold);
  // Power check: genuinely different start laws are flagged.
  const KernelMatrix c = named_kernel("cycle", 12);
  const auto near = simulate_meeting_times(c, StartSpec::s_step(1), samples, 19);
  const auto far = simulate_meeting_times(c, StartSpec::s_step(5), samples, 20);
  CHECK(ks_two_sample(near, far) > 0.05);
}

TEST_CASE("simulation argument validation") {
  const KernelMatrix k = named_kernel("cycle", 12);
  CHECK_THROWS_AS(simulate_meeting(k, StartSpec::q_adjacent_pair(), 0.0, 100, 1),
                  PreconditionViolation);
  CHECK_THROWS_AS(simulate_meeting(k, StartSpec::q_adjacent_pair(), 1.0, 0, 1),
                  PreconditionViolation);
  CHECK_THROWS_AS(simulate_meeting(k, StartSpec::q_adjacent_pair(), 1.0, 100, 1, 0),
                  PreconditionViolation);
  CHECK_THROWS_AS(simulate_meeting(k, StartSpec::fixed_pair(0, 99), 1.0, 100, 1),
                  PreconditionViolation);
  CHECK_THROWS_AS(simulate_meeting(k, StartSpec::s_step(-1), 1.0, 100, 1), PreconditionViolation);
  CHECK_THROWS_AS(simulate_meeting_times(k, StartSpec::q_adjacent_pair(), 0, 1),
                  PreconditionViolation);
  CHECK_THROWS_AS(exact_pair_laplace(k, 0.0), PreconditionViolation);
  CHECK_THROWS_AS(exact_pair_laplace(k, -1.0), PreconditionViolation);
}
