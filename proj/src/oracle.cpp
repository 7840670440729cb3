#include "mlab/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mlab/rng.hpp"

namespace mlab {

namespace {

constexpr long long kChunk = 4096;
// lambda * elapsed beyond this makes e^{-lambda t} round to exactly 0.0, so a
// run can settle without changing the sample's contribution.
constexpr double kSettleExponent = 746.0;
constexpr long long kMaxEventsPerSample = 100000000;

// 16-point Gauss-Legendre rule on [-1,1], positive half of the nodes.
constexpr double kGlNode[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                               0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                               0.9445750230732326, 0.9894009349916499};
constexpr double kGlWeight[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                 0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};

void check_state(const KernelMatrix& k, int x, const char* where) {
  if (x < 0 || x >= k.n) throw PreconditionViolation(std::string(where) + ": state out of range");
}

// Survival matrices of the uniformized product chain: sigma_j(x,y) is the
// probability that two independent walks started at x != y avoid meeting over
// j merged jump events. sigma_{j+1} = (1/2)(Q sigma_j + sigma_j Q) off-diagonal.
std::vector<Mat> sigma_table(const KernelMatrix& k, int j_max) {
  int n = k.n;
  std::vector<Mat> sig;
  sig.reserve(j_max + 1);
  Mat first(n, n, 1.0);
  for (int x = 0; x < n; ++x) first.at(x, x) = 0.0;
  sig.push_back(std::move(first));
  Mat left, right;
  for (int j = 0; j < j_max; ++j) {
    k.left_multiply(sig.back(), left);
    k.right_multiply(sig.back(), right);
    Mat next(n, n);
    for (size_t i = 0; i < next.a.size(); ++i) next.a[i] = 0.5 * (left.a[i] + right.a[i]);
    for (int x = 0; x < n; ++x) next.at(x, x) = 0.0;
    sig.push_back(std::move(next));
  }
  return sig;
}

int poisson_truncation(double t) {
  return static_cast<int>(std::ceil(2.0 * t + 12.0 * std::sqrt(2.0 * t) + 25.0));
}

// pmf of Poisson(mean) for j = 0..j_max, evaluated in log space so large means
// cannot overflow the incremental recurrence.
std::vector<double> poisson_row(double mean, int j_max) {
  std::vector<double> p(j_max + 1, 0.0);
  if (mean <= 0.0) {
    p[0] = 1.0;
    return p;
  }
  double lm = std::log(mean);
  for (int j = 0; j <= j_max; ++j) p[j] = std::exp(-mean + j * lm - std::lgamma(j + 1.0));
  return p;
}

struct RowSampler {
  // per-row fast path: all transition weights in the row equal
  std::vector<uint8_t> uniform_row;

  explicit RowSampler(const KernelMatrix& k) : uniform_row(k.n, 0) {
    for (int x = 0; x < k.n; ++x) {
      int deg = k.row_degree(x);
      if (deg == 0) continue;
      bool flat = true;
      double v0 = k.val[k.row_ptr[x]];
      for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
        if (k.val[p] != v0) {
          flat = false;
          break;
        }
      uniform_row[x] = flat ? 1 : 0;
    }
  }

  int step(const KernelMatrix& k, SplitMix64& rng, int x) const {
    int deg = k.row_degree(x);
    if (deg == 0) throw NumericError("simulate: state with empty row");
    if (uniform_row[x]) return k.col_idx[k.row_ptr[x] + rng.next_below(deg)];
    double u = rng.next_unit();
    double cum = 0.0;
    int last = k.col_idx[k.row_ptr[x + 1] - 1];
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
      cum += k.val[p];
      if (u <= cum) return k.col_idx[p];
    }
    return last;  // guard against rounding in the cumulative sum
  }
};

std::pair<int, int> draw_start(const KernelMatrix& k, const RowSampler& rows,
                               const StartSpec& start, SplitMix64& rng) {
  switch (start.kind) {
    case StartKind::uniform_pair:
      return {static_cast<int>(rng.next_below(k.n)), static_cast<int>(rng.next_below(k.n))};
    case StartKind::q_adjacent_pair: {
      int x = static_cast<int>(rng.next_below(k.n));
      return {x, rows.step(k, rng, x)};
    }
    case StartKind::fixed_pair:
      return {start.x, start.y};
    case StartKind::s_step: {
      int x = static_cast<int>(rng.next_below(k.n));
      int y = x;
      for (int i = 0; i < start.s; ++i) y = rows.step(k, rng, y);
      return {x, y};
    }
    case StartKind::independent_steps: {
      int w = static_cast<int>(rng.next_below(k.n));
      int x = w, y = w;
      for (int i = 0; i < start.m; ++i) x = rows.step(k, rng, x);
      for (int i = 0; i < start.n; ++i) y = rows.step(k, rng, y);
      return {x, y};
    }
  }
  throw PreconditionViolation("simulate: unknown start kind");
}

// One meeting time. Returns +infinity when the transform-mode cap settles the
// sample (cap <= 0 disables the cap for raw-time draws).
double sample_meeting_time(const KernelMatrix& k, const RowSampler& rows, const StartSpec& start,
                           SplitMix64& rng, double cap) {
  auto [x, y] = draw_start(k, rows, start, rng);
  double t = 0.0;
  long long events = 0;
  while (x != y) {
    t += rng.next_exponential(2.0);
    if (cap > 0.0 && t > cap) return std::numeric_limits<double>::infinity();
    if (++events > kMaxEventsPerSample)
      throw NumericError("simulate: sample exceeded the event budget");
    if (rng.next_u64() & 1u)
      x = rows.step(k, rng, x);
    else
      y = rows.step(k, rng, y);
  }
  return t;
}

void validate_sim_args(const KernelMatrix& k, const StartSpec& start, long long samples,
                       int workers) {
  if (samples <= 0) throw PreconditionViolation("simulate: need samples > 0");
  if (workers < 1) throw PreconditionViolation("simulate: need workers >= 1");
  if (start.kind == StartKind::fixed_pair) {
    check_state(k, start.x, "simulate");
    check_state(k, start.y, "simulate");
  }
  if (start.kind == StartKind::s_step && start.s < 0)
    throw PreconditionViolation("simulate: need s >= 0");
  if (start.kind == StartKind::independent_steps && (start.m < 0 || start.n < 0))
    throw PreconditionViolation("simulate: need m, n >= 0");
}

// Runs `body(chunk_index, chunk_samples)` over all chunks on the requested
// number of workers. Chunk outputs are indexed, so combination order never
// depends on scheduling.
template <class Body>
void run_chunks(long long samples, int workers, Body&& body) {
  long long chunks = (samples + kChunk - 1) / kChunk;
  std::atomic<long long> next{0};
  auto worker = [&]() {
    for (;;) {
      long long c = next.fetch_add(1);
      if (c >= chunks) return;
      long long lo = c * kChunk;
      long long count = std::min(kChunk, samples - lo);
      body(c, count);
    }
  };
  if (workers == 1 || chunks == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  int active = static_cast<int>(std::min<long long>(workers, chunks));
  pool.reserve(active);
  for (int w = 0; w < active; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace

StartSpec StartSpec::uniform_pair() {
  StartSpec s;
  s.kind = StartKind::uniform_pair;
  return s;
}

StartSpec StartSpec::q_adjacent_pair() {
  StartSpec s;
  s.kind = StartKind::q_adjacent_pair;
  return s;
}

StartSpec StartSpec::fixed_pair(int x, int y) {
  StartSpec s;
  s.kind = StartKind::fixed_pair;
  s.x = x;
  s.y = y;
  return s;
}

StartSpec StartSpec::s_step(int s_steps) {
  StartSpec s;
  s.kind = StartKind::s_step;
  s.s = s_steps;
  return s;
}

StartSpec StartSpec::independent_steps(int m, int n) {
  StartSpec s;
  s.kind = StartKind::independent_steps;
  s.m = m;
  s.n = n;
  return s;
}

PairLaplaceTable exact_pair_laplace(const KernelMatrix& k, double lambda) {
  if (lambda <= 0.0) throw PreconditionViolation("exact_pair_laplace: need lambda > 0");
  int n = k.n;
  size_t nn = static_cast<size_t>(n) * n;

  // unknowns: the off-diagonal part V of phi = V + I, solving
  //   (2+lambda) V - offdiag(QV + VQ) = offdiag(2Q)
  std::vector<double> qv(nn), vq(nn);
  auto apply = [&](const double* v, double* out) {
    std::fill(qv.begin(), qv.end(), 0.0);
    for (int x = 0; x < n; ++x) {
      double* orow = qv.data() + static_cast<size_t>(x) * n;
      for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
        double w = k.val[p];
        const double* vrow = v + static_cast<size_t>(k.col_idx[p]) * n;
        for (int y = 0; y < n; ++y) orow[y] += w * vrow[y];
      }
    }
    std::fill(vq.begin(), vq.end(), 0.0);
    for (int x = 0; x < n; ++x) {
      const double* vrow = v + static_cast<size_t>(x) * n;
      double* orow = vq.data() + static_cast<size_t>(x) * n;
      for (int z = 0; z < n; ++z) {
        double vz = vrow[z];
        if (vz == 0.0) continue;
        for (int p = k.row_ptr[z]; p < k.row_ptr[z + 1]; ++p)
          orow[k.col_idx[p]] += vz * k.val[p];
      }
    }
    for (size_t i = 0; i < nn; ++i) out[i] = (2.0 + lambda) * v[i] - qv[i] - vq[i];
    for (int x = 0; x < n; ++x) out[static_cast<size_t>(x) * n + x] = 0.0;
  };

  std::vector<double> b(nn, 0.0);
  for (int x = 0; x < n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
      int y = k.col_idx[p];
      if (y != x) b[static_cast<size_t>(x) * n + y] = 2.0 * k.val[p];
    }

  std::vector<double> v(nn, 0.0);
  cg_solve(nn, apply, b.data(), v.data(), 5e-11, 4000);

  PairLaplaceTable table;
  table.n = n;
  table.lambda = lambda;
  table.phi = Mat(n, n);
  table.phi.a.assign(v.begin(), v.end());
  for (int x = 0; x < n; ++x) table.phi.at(x, x) = 1.0;

  // verify every first-epoch equation on phi itself
  Mat qphi, phiq;
  k.left_multiply(table.phi, qphi);
  k.right_multiply(table.phi, phiq);
  double worst = 0.0;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      if (x == y) continue;
      double res = (2.0 + lambda) * table.phi.at(x, y) - qphi.at(x, y) - phiq.at(x, y);
      worst = std::max(worst, std::fabs(res));
    }
  table.max_residual = worst;
  if (worst > 1e-10)
    throw SolveFailure("exact_pair_laplace: equation residual " + std::to_string(worst));
  return table;
}

double exact_first_order_laplace(const KernelMatrix& k, double lambda) {
  PairLaplaceTable table = exact_pair_laplace(k, lambda);
  NeumaierSum acc;
  for (int x = 0; x < k.n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
      acc.add(k.val[p] * table.phi.at(x, k.col_idx[p]));
  return acc.value() / k.n;
}

double meeting_tail(const KernelMatrix& k, int x, int y, double t) {
  check_state(k, x, "meeting_tail");
  check_state(k, y, "meeting_tail");
  if (t < 0.0) throw PreconditionViolation("meeting_tail: need t >= 0");
  if (x == y) return 0.0;
  if (t == 0.0) return 1.0;
  int j_max = poisson_truncation(t);
  std::vector<Mat> sig = sigma_table(k, j_max);
  std::vector<double> pmf = poisson_row(2.0 * t, j_max);
  NeumaierSum acc;
  for (int j = 0; j <= j_max; ++j) acc.add(pmf[j] * sig[j].at(x, y));
  return acc.value();
}

MeetingEstimate simulate_meeting(const KernelMatrix& k, const StartSpec& start, double lambda,
                                 long long samples, uint64_t seed, int workers) {
  if (lambda <= 0.0) throw PreconditionViolation("simulate_meeting: need lambda > 0");
  validate_sim_args(k, start, samples, workers);
  RowSampler rows(k);
  double cap = kSettleExponent / lambda;

  long long chunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::pair<double, double>> partial(chunks);
  run_chunks(samples, workers, [&](long long c, long long count) {
    SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(c)));
    NeumaierSum sum, sumsq;
    for (long long i = 0; i < count; ++i) {
      double m = sample_meeting_time(k, rows, start, rng, cap);
      double w = std::isinf(m) ? 0.0 : std::exp(-lambda * m);
      sum.add(w);
      sumsq.add(w * w);
    }
    partial[c] = {sum.value(), sumsq.value()};
  });

  NeumaierSum s1, s2;
  for (long long c = 0; c < chunks; ++c) {
    s1.add(partial[c].first);
    s2.add(partial[c].second);
  }
  MeetingEstimate est;
  est.samples = samples;
  est.seed = seed;
  est.lambda = lambda;
  est.value = s1.value() / samples;
  double ns = static_cast<double>(samples);
  double var = (s2.value() - s1.value() * s1.value() / ns) / (ns - 1.0);
  est.std_error = var > 0.0 ? std::sqrt(var / ns) : 0.0;
  return est;
}

std::vector<double> simulate_meeting_times(const KernelMatrix& k, const StartSpec& start,
                                           long long samples, uint64_t seed, int workers) {
  validate_sim_args(k, start, samples, workers);
  RowSampler rows(k);
  long long chunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> partial(chunks);
  run_chunks(samples, workers, [&](long long c, long long count) {
    SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(c)));
    std::vector<double>& out = partial[c];
    out.reserve(count);
    for (long long i = 0; i < count; ++i)
      out.push_back(sample_meeting_time(k, rows, start, rng, /*cap=*/0.0));
  });
  std::vector<double> all;
  all.reserve(samples);
  for (auto& chunk : partial) all.insert(all.end(), chunk.begin(), chunk.end());
  std::sort(all.begin(), all.end());
  return all;
}

double ks_two_sample(const std::vector<double>& a_sorted, const std::vector<double>& b_sorted) {
  if (a_sorted.empty() || b_sorted.empty())
    throw PreconditionViolation("ks_two_sample: need non-empty samples");
  size_t na = a_sorted.size(), nb = b_sorted.size();
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < na && j < nb) {
    double v = std::min(a_sorted[i], b_sorted[j]);
    while (i < na && a_sorted[i] <= v) ++i;
    while (j < nb && b_sorted[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double higher_order_residual(const KernelMatrix& k, int m, int n, double t, int quad_points) {
  if (m < 0 || n < 0) throw PreconditionViolation("higher_order_residual: need m, n >= 0");
  if (t < 0.0) throw PreconditionViolation("higher_order_residual: need t >= 0");
  if (quad_points < 32)
    throw PreconditionViolation("higher_order_residual: need quad_points >= 32");

  int nn = k.n;
  int j_max = poisson_truncation(t);
  std::vector<Mat> sig = sigma_table(k, j_max);

  // dense Q^{m+n} and Q^{m+n+1}
  Mat pmn = Mat::identity(nn);
  for (int i = 0; i < m + n; ++i) {
    Mat next;
    k.left_multiply(pmn, next);
    pmn = std::move(next);
  }
  Mat pmn1;
  k.left_multiply(pmn, pmn1);
  double tr_mn = mat_trace(pmn);

  // Poisson coefficient streams of the three tail mixtures
  std::vector<double> c_bridge(j_max + 1), c_pair(j_max + 1), c_diag(j_max + 1);
  for (int j = 0; j <= j_max; ++j) {
    NeumaierSum b1, b2, b3;
    for (int x = 0; x < nn; ++x) {
      const double* srow = sig[j].row(x);
      const double* prow = pmn.row(x);
      const double* prow1 = pmn1.row(x);
      for (int y = 0; y < nn; ++y) {
        b1.add(prow1[y] * srow[y]);
        b2.add(prow[y] * srow[y]);
      }
      double dx = pmn.at(x, x);
      if (dx != 0.0)
        for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
          b3.add(dx * k.val[p] * srow[k.col_idx[p]]);
    }
    c_bridge[j] = b1.value() / nn;
    c_pair[j] = b2.value() / nn;
    c_diag[j] = b3.value() / nn;
  }

  auto mixture = [&](double v, const std::vector<double>& coeff) {
    std::vector<double> pmf = poisson_row(2.0 * v, j_max);
    NeumaierSum acc;
    for (int j = 0; j <= j_max; ++j) acc.add(pmf[j] * coeff[j]);
    return acc.value();
  };

  double right_tail = mixture(t, c_pair);  // P(M_{U_m,V_n} > t)

  // int_0^t 2 e^{-2(t-v)} [bridge(v) - diag(v)] dv by composite Gauss-Legendre
  int panels = (quad_points + 15) / 16;
  double h = t / panels;
  NeumaierSum integral;
  for (int panel = 0; panel < panels; ++panel) {
    double a = panel * h;
    double mid = a + 0.5 * h, half = 0.5 * h;
    for (int q = 0; q < 8; ++q) {
      for (double sgn : {-1.0, 1.0}) {
        double v = mid + sgn * half * kGlNode[q];
        double f = 2.0 * std::exp(-2.0 * (t - v)) * (mixture(v, c_bridge) - mixture(v, c_diag));
        integral.add(half * kGlWeight[q] * f);
      }
    }
  }

  double residual =
      integral.value() - right_tail + std::exp(-2.0 * t) * (1.0 - tr_mn / nn);
  return std::fabs(residual);
}

}  // namespace mlab
