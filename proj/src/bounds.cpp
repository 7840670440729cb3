#include "mlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlab/oracle.hpp"
#include "mlab/voter.hpp"

namespace mlab {

namespace {

void check_gamma(double gamma, const char* where) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw PreconditionViolation(std::string(where) + ": need gamma in [0,1]");
}

}  // namespace

int r_set_size(const KernelMatrix& k, int x, int s, double gamma) {
  check_gamma(gamma, "r_set_size");
  if (s < 0) throw PreconditionViolation("r_set_size: need s >= 0");
  if (x < 0 || x >= k.n) throw PreconditionViolation("r_set_size: state out of range");
  std::vector<double> d = diag_powers(k, s)[s];
  int count = 0;
  for (int y = 0; y < k.n; ++y)
    if (std::fabs(d[x] - d[y]) <= gamma) ++count;
  return count;
}

RSetProfile r_set_profile(const KernelMatrix& k, int s_max, double gamma) {
  check_gamma(gamma, "r_set_profile");
  if (s_max < 0) throw PreconditionViolation("r_set_profile: need s_max >= 0");
  RSetProfile prof;
  prof.n = k.n;
  prof.gamma = gamma;
  prof.counts.assign(s_max + 1, std::vector<int>(k.n, 0));
  auto d = diag_powers(k, s_max);
  for (int s = 0; s <= s_max; ++s) {
    const std::vector<double>& ds = d[s];
    for (int x = 0; x < k.n; ++x) {
      int count = 0;
      for (int y = 0; y < k.n; ++y)
        if (std::fabs(ds[x] - ds[y]) <= gamma) ++count;
      prof.counts[s][x] = count;
    }
  }
  return prof;
}

DeltaResult delta_q_gamma(const KernelMatrix& k, double gamma, int s_max) {
  check_gamma(gamma, "delta_q_gamma");
  if (s_max < 1) throw PreconditionViolation("delta_q_gamma: need s_max >= 1");
  RSetProfile prof = r_set_profile(k, s_max, gamma);
  const Spectrum& sp = k.spectrum_cached();
  double nn = k.n;
  DeltaResult best;
  best.delta = 2.0;  // strictly above both branches' ranges
  best.s_star = 0;
  for (int s = 1; s <= s_max; ++s) {
    int min_count = *std::min_element(prof.counts[s].begin(), prof.counts[s].end());
    double branch_r = (nn - min_count) / nn + gamma;
    double branch_tr = trace_power(sp, s, /*absolute=*/true) / nn;
    double v = std::min(branch_r, branch_tr);
    if (v < best.delta) {
      best.delta = v;
      best.s_star = s;
    }
  }
  return best;
}

double c_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw PreconditionViolation("c_epsilon: need epsilon in (0,1]");
  double root = std::sqrt(2.0) * 32.0 / std::sqrt(1.0 - std::cos(1.0));
  return (2.0 / epsilon + 9.0 + M_PI + root) / M_PI * (4.0 + epsilon) / epsilon;
}

DiagDeviationNorms diag_deviation_norms(const KernelMatrix& k, int s, double gamma) {
  check_gamma(gamma, "diag_deviation_norms");
  if (s < 0) throw PreconditionViolation("diag_deviation_norms: need s >= 0");
  int n = k.n;
  double nn = n;
  std::vector<double> d = diag_powers(k, s)[s];
  std::vector<double> qd(n);
  k.matvec(d.data(), qd.data());
  NeumaierSum tr_acc;
  for (double v : d) tr_acc.add(v);
  double tr = tr_acc.value();

  DiagDeviationNorms out;
  NeumaierSum smoothed, diag;
  for (int x = 0; x < n; ++x) {
    smoothed.add(std::fabs(qd[x] / nn - tr / (nn * nn)));
    diag.add(std::fabs(d[x] / nn - tr / (nn * nn)));
  }
  out.norm_smoothed = smoothed.value();
  out.norm_diag = diag.value();

  int min_count = n;
  for (int x = 0; x < n; ++x) {
    int count = 0;
    for (int y = 0; y < n; ++y)
      if (std::fabs(d[x] - d[y]) <= gamma) ++count;
    min_count = std::min(min_count, count);
  }
  out.bound_r = 4.0 * (nn - min_count) / nn + gamma;
  out.bound_trace =
      2.0 * trace_power(k.spectrum_cached(), s, /*absolute=*/true, /*exclude_unit=*/true) / nn;
  return out;
}

int default_s_max(int n) {
  if (n < 2) throw PreconditionViolation("default_s_max: need n >= 2");
  return static_cast<int>(std::ceil(4.0 * std::log(static_cast<double>(n))));
}

BoundReport theorem1_bound(const KernelMatrix& k, double lambda, double epsilon, int m,
                           double gamma, int s_max, bool with_lhs) {
  double nn = k.n;
  std::string violations;
  auto complain = [&](const std::string& msg) {
    if (!violations.empty()) violations += "; ";
    violations += msg;
  };
  if (!(epsilon > 0.0 && epsilon <= 1.0)) complain("epsilon must lie in (0,1]");
  if (!(lambda > epsilon)) complain("lambda must exceed epsilon");
  if (epsilon > 0.0 && !((lambda - epsilon) * nn - lambda * epsilon > 0.0))
    complain("(lambda-epsilon) N must exceed lambda epsilon");
  if (m < 1) complain("m must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) complain("gamma must lie in [0,1]");
  if (k.n <= 8) complain("state count must exceed 8");
  if (!violations.empty()) throw PreconditionViolation("theorem1_bound: " + violations);

  BoundReport r;
  r.n = k.n;
  r.lambda = lambda;
  r.epsilon = epsilon;
  r.m = m;
  r.gamma = gamma;
  r.s_max = s_max > 0 ? s_max : default_s_max(k.n);

  DeltaResult dr = delta_q_gamma(k, gamma, r.s_max);
  r.delta = dr.delta;
  r.s_star = dr.s_star;
  r.c_eps = c_epsilon(epsilon);

  double mn = static_cast<double>(m) * nn;
  r.term1 = 4.0 * std::pow(1.0 + lambda / nn, -mn);
  r.term2 = std::pow((1.0 + lambda / nn) * (1.0 - epsilon / nn), -(mn + 1.0)) * r.c_eps * lambda *
            (nn - epsilon) / ((lambda - epsilon) * nn - lambda * epsilon);
  r.term3 = 80.0 * r.delta * std::pow(1.0 + 6.0 / nn, mn);
  r.total = r.term1 + r.term2 + r.term3;
  r.vacuous = r.total > 2.0;

  if (with_lhs) {
    r.has_lhs = true;
    r.ratio_value = green_ratio(k.spectrum_cached(), lambda);
    if (k.n <= 200)
      r.series_value = laplace_series_exact(k, lambda, 0.5, 1e-8).value;
    else
      r.series_value = exact_first_order_laplace(k, lambda);
    r.lhs_exact = std::fabs(r.series_value - r.ratio_value);
  }
  return r;
}

}  // namespace mlab
