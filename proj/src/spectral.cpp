#include "mlab/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>

namespace mlab {

namespace detail {
struct SpectralCache {
  std::once_flag once;
  Spectrum spec;
};
}  // namespace detail

const Spectrum& KernelMatrix::spectrum_cached() const {
  if (!cache) cache = std::make_shared<detail::SpectralCache>();
  std::call_once(cache->once, [this] { cache->spec = spectrum(*this); });
  return cache->spec;
}

Spectrum spectrum(const KernelMatrix& k) {
  int n = k.n;
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
  for (int x = 0; x < n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
      a[static_cast<size_t>(x) * n + k.col_idx[p]] = k.val[p];

  std::vector<double> w(n);
  int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'V', 'L', n, a.data(), n, w.data());
  if (info != 0)
    throw EigensolverFailure("dsyevd failed with info=" + std::to_string(info) +
                             " (n=" + std::to_string(n) + ")");

  Spectrum s;
  s.eigenvalues = std::move(w);           // dsyevd returns ascending order
  s.vectors.assign(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int x = 0; x < n; ++x) s.vectors[i][x] = a[static_cast<size_t>(x) * n + i];

  // Residual check on every pair: ||Q v - q v||_2 <= 1e-8.
  std::vector<double> qv(n);
  for (int i = 0; i < n; ++i) {
    k.matvec(s.vectors[i].data(), qv.data());
    double res2 = 0.0;
    for (int x = 0; x < n; ++x) {
      double d = qv[x] - s.eigenvalues[i] * s.vectors[i][x];
      res2 += d * d;
    }
    if (std::sqrt(res2) > 1e-8)
      throw EigensolverFailure("eigenpair residual " + std::to_string(std::sqrt(res2)) +
                               " exceeds 1e-8 at index " + std::to_string(i));
  }
  s.has_unit = std::fabs(s.eigenvalues[n - 1] - 1.0) <= 1e-9;
  return s;
}

double trace_power(const Spectrum& s, int power, bool absolute, bool exclude_unit) {
  if (power < 0) throw PreconditionViolation("trace_power: need s >= 0");
  NeumaierSum acc;
  for (double q : s.eigenvalues) {
    if (exclude_unit && std::fabs(q - 1.0) <= 1e-9) continue;
    double base = absolute ? std::fabs(q) : q;
    acc.add(power == 0 ? 1.0 : std::pow(base, power));
  }
  return acc.value();
}

double TraceSeq::at(int s) const {
  if (s < 0 || s >= static_cast<int>(values.size()))
    throw InsufficientTraces("TraceSeq: request for s=" + std::to_string(s) + " but table holds s <= " +
                             std::to_string(static_cast<int>(values.size()) - 1));
  return values[s];
}

TraceSeq trace_seq(const Spectrum& s, int s_max) {
  if (s_max < 0) throw PreconditionViolation("trace_seq: need s_max >= 0");
  TraceSeq t;
  t.values.resize(s_max + 1);
  // Per-eigenvalue running powers keep the cost at n * s_max multiplies.
  std::vector<double> pw(s.eigenvalues.size(), 1.0);
  for (int sp = 0; sp <= s_max; ++sp) {
    NeumaierSum acc;
    for (size_t i = 0; i < pw.size(); ++i) {
      acc.add(pw[i]);
      pw[i] *= s.eigenvalues[i];
    }
    t.values[sp] = acc.value();
  }
  return t;
}

double green_ratio(const Spectrum& s, double lambda) {
  if (lambda <= 0.0) throw PreconditionViolation("green_ratio: need lambda > 0");
  NeumaierSum num, den;
  for (double q : s.eigenvalues) {
    double g = 1.0 / (lambda + 2.0 - 2.0 * q);
    num.add(q * g);
    den.add(g);
  }
  return num.value() / den.value();
}

double green_ratio_resolvent(const KernelMatrix& k, double lambda, double tol) {
  if (lambda <= 0.0) throw PreconditionViolation("green_ratio_resolvent: need lambda > 0");
  // tr(f(Q)) = sum_y <e_y, f(Q) e_y>; one CG solve per basis vector with
  // A = (lambda + 2) I - 2 Q, then tr(Q A^{-1}) comes from the same solves.
  int n = k.n;
  auto apply = [&](const double* v, double* out) {
    k.matvec(v, out);
    for (int i = 0; i < n; ++i) out[i] = (lambda + 2.0) * v[i] - 2.0 * out[i];
  };
  std::vector<double> e(n, 0.0), g(n), qg(n);
  NeumaierSum num, den;
  for (int y = 0; y < n; ++y) {
    e[y] = 1.0;
    std::fill(g.begin(), g.end(), 0.0);
    cg_solve(n, apply, e.data(), g.data(), tol, 50 * n + 200);
    k.matvec(g.data(), qg.data());
    den.add(g[y]);
    num.add(qg[y]);
    e[y] = 0.0;
  }
  return num.value() / den.value();
}

double hitting_laplace(const KernelMatrix& k, int x, int y, double lambda) {
  if (lambda <= 0.0) throw PreconditionViolation("hitting_laplace: need lambda > 0");
  if (x < 0 || y < 0 || x >= k.n || y >= k.n)
    throw PreconditionViolation("hitting_laplace: state out of range");
  if (x == y) return 1.0;
  // G = (lambda/2 + I - Q)^{-1}; value = G(x,y) / G(y,y). One SPD solve for
  // column y of G.
  int n = k.n;
  auto apply = [&](const double* v, double* out) {
    k.matvec(v, out);
    for (int i = 0; i < n; ++i) out[i] = (lambda / 2.0 + 1.0) * v[i] - out[i];
  };
  std::vector<double> e(n, 0.0), g(n, 0.0);
  e[y] = 1.0;
  cg_solve(n, apply, e.data(), g.data(), 1e-13, 100 * n + 200);
  if (g[y] <= 0.0) throw SolveFailure("hitting_laplace: nonpositive diagonal Green value");
  return g[x] / g[y];
}

CircleTraceExtrema circle_trace_extrema(const Spectrum& s, double epsilon, int grid_points) {
  int n = s.n();
  if (epsilon < 0.0 || epsilon >= n)
    throw PreconditionViolation("circle_trace_extrema: need epsilon in [0, N)");
  if (grid_points < 8) throw PreconditionViolation("circle_trace_extrema: need grid_points >= 8");

  double radius = 1.0 - epsilon / n;
  // For an eigenvalue q = 1 the term (1 - zeta)/(N - zeta N) is identically
  // 1/N; substituting that value removes the 0/0 at zeta = 1 (the eps = 0,
  // angle 0 grid point) and is exact at every other zeta as well.
  auto trace_abs = [&](double theta) {
    std::complex<double> zeta = std::polar(radius, theta);
    std::complex<double> acc = 0.0;
    for (double q : s.eigenvalues) {
      if (std::fabs(q - 1.0) <= 1e-9)
        acc += 1.0 / n;
      else
        acc += (1.0 - zeta) / (static_cast<double>(n) - zeta * (n - 2.0 + 2.0 * q));
    }
    return std::abs(acc) / n;
  };

  CircleTraceExtrema out;
  out.min = std::numeric_limits<double>::infinity();
  out.max = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid_points; ++j) {
    double theta = 2.0 * std::numbers::pi * j / grid_points;
    double v = trace_abs(theta);
    if (v < out.min) {
      out.min = v;
      out.argmin_angle = theta;
    }
    if (v > out.max) {
      out.max = v;
      out.argmax_angle = theta;
    }
  }

  // Endpoint values at zeta = +-(1 - eps/N). At the positive endpoint the
  // unit-eigenvalue term equals 1 for eps > 0 and is read as its limit 1 at
  // eps = 0.
  NeumaierSum mn, mx;
  for (double q : s.eigenvalues) {
    double two_g = 2.0 - 2.0 * q;  // 2(1 - q) >= 0
    double denom_min = two_g + epsilon - (epsilon / n) * two_g;
    // Unit eigenvalue: eps/eps = 1 for eps > 0, and the eps = 0 limit is also
    // read as 1; inserting 1 exactly avoids the ill-conditioned quotient.
    mn.add(std::fabs(q - 1.0) <= 1e-9 ? 1.0 : (denom_min == 0.0 ? 1.0 : epsilon / denom_min));
    mx.add((2.0 - epsilon / n) / (1.0 + radius * (1.0 - 2.0 / n + 2.0 * q / n)));
  }
  out.closed_form_min = mn.value() / (static_cast<double>(n) * n);
  out.closed_form_max = mx.value() / (static_cast<double>(n) * n);
  return out;
}

// Kesten-McKay ------------------------------------------------------------

double kesten_mckay_density(int k, double q) {
  if (k < 2) throw PreconditionViolation("kesten_mckay_density: need k >= 2");
  double edge = 2.0 * std::sqrt(k - 1.0) / k;
  if (std::fabs(q) >= edge) return 0.0;
  double disc = 4.0 * (k - 1.0) - (k * q) * (k * q);
  return std::sqrt(disc) / (2.0 * std::numbers::pi * (1.0 - q * q));
}

namespace {

// 15-point Kronrod / 7-point Gauss pair on [-1, 1].
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
};

template <class F>
Segment gk15(F&& f, double a, double b) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double kron = kWgk[7] * fc, gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    double f1 = f(c - h * kXgk[j]), f2 = f(c + h * kXgk[j]);
    kron += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  Segment s;
  s.a = a;
  s.b = b;
  s.value = kron * h;
  s.error = std::fabs((kron - gauss) * h);
  return s;
}

// Bisection-adaptive quadrature to an absolute tolerance.
template <class F>
double adaptive_quadrature(F&& f, double a, double b, double abs_tol, int max_segments = 2000) {
  std::vector<Segment> segs{gk15(f, a, b)};
  auto total_error = [&] {
    double e = 0.0;
    for (auto& s : segs) e += s.error;
    return e;
  };
  while (total_error() > abs_tol) {
    if (static_cast<int>(segs.size()) >= max_segments)
      throw QuadratureNonconvergence("adaptive quadrature: error " + std::to_string(total_error()) +
                                     " above " + std::to_string(abs_tol) + " after " +
                                     std::to_string(segs.size()) + " segments");
    size_t worst = 0;
    for (size_t i = 1; i < segs.size(); ++i)
      if (segs[i].error > segs[worst].error) worst = i;
    Segment old = segs[worst];
    double mid = 0.5 * (old.a + old.b);
    segs[worst] = gk15(f, old.a, mid);
    segs.push_back(gk15(f, mid, old.b));
  }
  NeumaierSum acc;
  std::sort(segs.begin(), segs.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
  for (auto& s : segs) acc.add(s.value);
  return acc.value();
}

// integral over [-edge, edge] of g(q) f_k(q) dq via q = edge * cos(theta):
// the weight becomes (2(k-1)/(k pi)) sin^2(theta) / (1 - edge^2 cos^2(theta)),
// smooth on [0, pi] for k >= 3 (and constant 1/pi at k = 2).
template <class G>
double km_integral(int k, G&& g, double abs_tol = 1e-10) {
  double edge = 2.0 * std::sqrt(k - 1.0) / k;
  double front = 2.0 * (k - 1.0) / (k * std::numbers::pi);
  auto integrand = [&](double theta) {
    double cq = edge * std::cos(theta);
    double s = std::sin(theta);
    return front * g(cq) * s * s / (1.0 - edge * edge * std::cos(theta) * std::cos(theta));
  };
  return adaptive_quadrature(integrand, 0.0, std::numbers::pi, abs_tol);
}

}  // namespace

double kesten_mckay_moment(int k, int s) {
  if (k < 2) throw PreconditionViolation("kesten_mckay_moment: need k >= 2");
  if (s < 0) throw PreconditionViolation("kesten_mckay_moment: need s >= 0");
  if (s % 2 == 1) return 0.0;  // even density
  return km_integral(k, [s](double q) { return std::pow(q, s); });
}

double tree_green_ratio(int k, double lambda, bool* recurrence_warning) {
  if (k < 2) throw PreconditionViolation("tree_green_ratio: need k >= 2");
  if (lambda <= 0.0) throw PreconditionViolation("tree_green_ratio: need lambda > 0");
  if (recurrence_warning) *recurrence_warning = (k == 2);
  double num = km_integral(k, [lambda](double q) { return q / (lambda + 2.0 - 2.0 * q); });
  double den = km_integral(k, [lambda](double q) { return 1.0 / (lambda + 2.0 - 2.0 * q); });
  return num / den;
}

}  // namespace mlab
