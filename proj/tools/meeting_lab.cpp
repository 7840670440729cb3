// meeting-lab: command-line front end for first-meeting-time Laplace
// transforms of two independent symmetric Markov chains -- kernels, spectra,
// correlation series, error bounds, brute-force oracles, simulation, and the
// finite-size-versus-infinite-tree convergence study. Single values print as
// JSON, sweeps as CSV; every artifact embeds a reproducibility manifest.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlab/bounds.hpp"
#include "mlab/errors.hpp"
#include "mlab/kernel.hpp"
#include "mlab/oracle.hpp"
#include "mlab/rng.hpp"
#include "mlab/spectral.hpp"
#include "mlab/voter.hpp"

using json = nlohmann::ordered_json;
using namespace mlab;

namespace {

constexpr const char* kVersion = "1.0.0";

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionViolation("cannot open file for hashing: " + path);
  uint64_t h = 14695981039346656037ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int env_workers() {
  const char* e = std::getenv("MEETING_LAB_THREADS");
  if (!e) return 1;
  const int v = std::atoi(e);
  return v > 0 ? v : 1;
}

// workers <= 0 on the command line means "use MEETING_LAB_THREADS, default 1".
int resolve_workers(int cli_value) { return cli_value > 0 ? cli_value : env_workers(); }

// Shared per-invocation emission state: output target, format, manifest data.
struct Emitter {
  CLI::App* sub = nullptr;
  std::string format = "json";
  std::string out;
  std::vector<std::pair<std::string, uint64_t>> inputs;  // (path, fnv1a)
  uint64_t seed = 0;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void note_input(const std::string& path) { inputs.emplace_back(path, fnv1a_file(path)); }

  double wall_seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  json manifest() const {
    json m;
    m["command"] = sub->get_name();
    json flags = json::object();
    for (const CLI::Option* o : sub->get_options()) {
      if (o->count() == 0) continue;
      const std::string name = o->get_name();
      if (name.rfind("--", 0) != 0) continue;
      std::string joined;
      for (const std::string& r : o->results()) {
        if (!joined.empty()) joined += ",";
        joined += r;
      }
      flags[name.substr(2)] = joined;
    }
    m["flags"] = flags;
    json ins = json::object();
    for (const auto& [path, h] : inputs) ins[path] = hex64(h);
    m["inputs"] = ins;
    m["seed"] = seed;
    m["version"] = kVersion;
    m["wall_time_s"] = wall_seconds();
    return m;
  }

  void write_text(const std::string& text) const {
    if (out.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(out);
      if (!f) throw PreconditionViolation("cannot open output file: " + out);
      f << text;
    }
  }

  void emit_json(json payload) const {
    payload["manifest"] = manifest();
    write_text(payload.dump(2) + "\n");
  }

  // CSV with the manifest as leading '#' comment lines and a fixed row order.
  void emit_csv(const std::string& header, const std::vector<std::string>& rows) const {
    std::ostringstream os;
    os << "# meeting-lab " << kVersion << "\n";
    os << "# command: " << sub->get_name() << "\n";
    for (const CLI::Option* o : sub->get_options()) {
      if (o->count() == 0) continue;
      const std::string name = o->get_name();
      if (name.rfind("--", 0) != 0) continue;
      std::string joined;
      for (const std::string& r : o->results()) {
        if (!joined.empty()) joined += ",";
        joined += r;
      }
      os << "# flag " << name.substr(2) << "=" << joined << "\n";
    }
    for (const auto& [path, h] : inputs) os << "# input " << path << " fnv1a=" << hex64(h) << "\n";
    os << "# seed: " << seed << "\n";
    os << "# wall_time_s: " << fmt(wall_seconds()) << "\n";
    os << header << "\n";
    for (const std::string& r : rows) os << r << "\n";
    write_text(os.str());
  }
};

// Kernel source flags shared by every kernel-consuming subcommand.
struct KernelSource {
  std::string graph_path, kernel_path;

  void attach(CLI::App* sub) {
    sub->add_option("--graph", graph_path, "edge-list file of a simple connected regular graph");
    sub->add_option("--kernel", kernel_path, "CSV file with a full kernel matrix");
  }

  KernelMatrix load(Emitter& em) const {
    if (graph_path.empty() == kernel_path.empty()) {
      throw PreconditionViolation("provide exactly one of --graph or --kernel");
    }
    if (!graph_path.empty()) {
      em.note_input(graph_path);
      return kernel_from_graph(read_edge_list(graph_path));
    }
    em.note_input(kernel_path);
    return read_kernel_csv(kernel_path);
  }
};

std::string sanitize_cell(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

void write_gnuplot(const std::string& script_path, const std::string& csv_path,
                   const std::string& title, int xcol, int ycol, const std::string& xlabel,
                   const std::string& ylabel, bool logy) {
  if (csv_path.empty()) {
    throw PreconditionViolation("--gnuplot requires --out so the script has a data file to read");
  }
  std::ofstream f(script_path);
  if (!f) throw PreconditionViolation("cannot open gnuplot script file: " + script_path);
  f << "# generated by meeting-lab " << kVersion << "\n"
    << "set datafile separator ','\n"
    << "set datafile commentschars '#'\n"
    << "set xlabel '" << xlabel << "'\n"
    << "set ylabel '" << ylabel << "'\n";
  if (logy) f << "set logscale y\n";
  f << "plot '" << csv_path << "' using " << xcol << ":" << ycol << " with points pt 7 title '"
    << title << "'\n";
}

json bound_report_json(const BoundReport& r) {
  json b;
  b["n"] = r.n;
  b["lambda"] = r.lambda;
  b["epsilon"] = r.epsilon;
  b["m"] = r.m;
  b["gamma"] = r.gamma;
  b["s_max"] = r.s_max;
  b["term1"] = r.term1;
  b["term2"] = r.term2;
  b["term3"] = r.term3;
  b["total"] = r.total;
  b["delta"] = r.delta;
  b["c_eps"] = r.c_eps;
  b["s_star"] = r.s_star;
  b["vacuous"] = r.vacuous;
  if (r.has_lhs) {
    b["lhs_exact"] = r.lhs_exact;
    b["series_value"] = r.series_value;
    b["ratio_value"] = r.ratio_value;
  }
  return b;
}

StartSpec parse_start(const std::string& name, int x, int y, int s, int m, int n) {
  if (name == "uniform") return StartSpec::uniform_pair();
  if (name == "adjacent") return StartSpec::q_adjacent_pair();
  if (name == "fixed") return StartSpec::fixed_pair(x, y);
  if (name == "sstep") return StartSpec::s_step(s);
  if (name == "indep") return StartSpec::independent_steps(m, n);
  throw PreconditionViolation("unknown start kind: " + name +
                              " (expected uniform|adjacent|fixed|sstep|indep)");
}

struct StudyRow {
  int n = 0;
  double lambda = 0.0;
  int replicate = 0;
  uint64_t graph_seed = 0;
  std::string method;
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double tree = std::numeric_limits<double>::quiet_NaN();
  double gap_ratio = std::numeric_limits<double>::quiet_NaN();
  double gap_tree = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meeting-lab: Laplace transforms of first meeting times of two independent "
               "symmetric Markov chains -- exact series, spectral ratios, error bounds, "
               "oracles, and simulation"};
  app.require_subcommand(1);
  std::function<int()> runner;

  // ---- validate ----------------------------------------------------------
  auto* c_validate = app.add_subcommand("validate", "check a kernel for symmetry, zero trace, "
                                                    "stochasticity, and irreducibility");
  {
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_validate);
    c_validate->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_validate->add_option("--out", em->out, "write output to this file instead of stdout");
    c_validate->callback([ks, em, c_validate, &runner] {
      runner = [ks, em, c_validate]() -> int {
        em->sub = c_validate;
        json payload;
        try {
          const KernelMatrix k = ks->load(*em);
          const ValidationReport r = validate_kernel(k);
          payload["accepted"] = r.accepted();
          payload["n"] = k.n;
          payload["symmetric"] = r.symmetric;
          payload["zero_trace"] = r.zero_trace;
          payload["stochastic"] = r.stochastic;
          payload["irreducible"] = r.irreducible;
          payload["n_gt_8"] = r.n_gt_8;
          payload["max_asymmetry"] = r.max_asymmetry;
          payload["max_row_defect"] = r.max_row_defect;
          em->emit_json(payload);
          return r.accepted() ? 0 : 1;
        } catch (const NonRegular& e) {
          payload["accepted"] = false;
          payload["error"] = std::string("NonRegular: ") + e.what();
        } catch (const Disconnected& e) {
          payload["accepted"] = false;
          payload["error"] = std::string("Disconnected: ") + e.what();
        } catch (const LoopEdge& e) {
          payload["accepted"] = false;
          payload["error"] = std::string("LoopEdge: ") + e.what();
        }
        em->emit_json(payload);
        return 1;
      };
    });
  }

  // ---- rrg ---------------------------------------------------------------
  auto* c_rrg = app.add_subcommand("rrg", "sample a uniform simple connected k-regular graph");
  {
    struct A {
      int k = 3, n = 0;
      uint64_t seed = 1;
    };
    auto a = std::make_shared<A>();
    auto em = std::make_shared<Emitter>();
    em->format = "edges";
    c_rrg->add_option("--k", a->k, "degree")->required();
    c_rrg->add_option("--n", a->n, "number of vertices")->required();
    c_rrg->add_option("--seed", a->seed, "RNG seed");
    c_rrg->add_option("--format", em->format, "edges|json")->check(CLI::IsMember({"edges", "json"}));
    c_rrg->add_option("--out", em->out, "write output to this file instead of stdout");
    c_rrg->callback([a, em, c_rrg, &runner] {
      runner = [a, em, c_rrg]() -> int {
        em->sub = c_rrg;
        em->seed = a->seed;
        const Graph g = random_regular_graph(a->k, a->n, a->seed);
        if (em->format == "json") {
          json payload;
          payload["n"] = g.n;
          payload["k"] = a->k;
          payload["edge_count"] = g.edges.size();
          json edges = json::array();
          for (const auto& [u, v] : g.edges) edges.push_back({u, v});
          payload["edges"] = edges;
          em->emit_json(payload);
        } else {
          std::ostringstream os;
          os << "# meeting-lab " << kVersion << " rrg k=" << a->k << " n=" << a->n
             << " seed=" << a->seed << "\n";
          os << g.n << " " << g.edges.size() << "\n";
          for (const auto& [u, v] : g.edges) os << u << " " << v << "\n";
          em->write_text(os.str());
        }
        return 0;
      };
    });
  }

  // ---- spectrum ----------------------------------------------------------
  auto* c_spec = app.add_subcommand("spectrum", "full eigenvalue list of the kernel");
  {
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_spec);
    c_spec->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_spec->add_option("--out", em->out, "write output to this file instead of stdout");
    c_spec->callback([ks, em, c_spec, &runner] {
      runner = [ks, em, c_spec]() -> int {
        em->sub = c_spec;
        const KernelMatrix k = ks->load(*em);
        const Spectrum& sp = k.spectrum_cached();
        if (em->format == "csv") {
          std::vector<std::string> rows;
          for (int i = 0; i < sp.n(); ++i) {
            rows.push_back(std::to_string(i) + "," + fmt(sp.eigenvalues[i]));
          }
          em->emit_csv("index,eigenvalue", rows);
        } else {
          json payload;
          payload["n"] = sp.n();
          payload["has_unit"] = sp.has_unit;
          payload["eigenvalues"] = sp.eigenvalues;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- green-ratio -------------------------------------------------------
  auto* c_green = app.add_subcommand("green-ratio",
                                     "tr(Q/(lambda+2(I-Q))) / tr(1/(lambda+2(I-Q)))");
  {
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    auto lambda = std::make_shared<double>(1.0);
    ks->attach(c_green);
    c_green->add_option("--lambda", *lambda, "transform rate, > 0")->required();
    c_green->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_green->add_option("--out", em->out, "write output to this file instead of stdout");
    c_green->callback([ks, em, lambda, c_green, &runner] {
      runner = [ks, em, lambda, c_green]() -> int {
        em->sub = c_green;
        const KernelMatrix k = ks->load(*em);
        const double v = green_ratio(k.spectrum_cached(), *lambda);
        if (em->format == "csv") {
          em->emit_csv("lambda,value", {fmt(*lambda) + "," + fmt(v)});
        } else {
          json payload;
          payload["value"] = v;
          payload["lambda"] = *lambda;
          payload["n"] = k.n;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- tree-limit --------------------------------------------------------
  auto* c_tree = app.add_subcommand("tree-limit",
                                    "infinite k-regular tree analogue of the green ratio");
  {
    struct A {
      int k = 3;
      double lambda = 1.0;
    };
    auto a = std::make_shared<A>();
    auto em = std::make_shared<Emitter>();
    c_tree->add_option("--k", a->k, "tree degree, >= 2")->required();
    c_tree->add_option("--lambda", a->lambda, "transform rate, > 0")->required();
    c_tree->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_tree->add_option("--out", em->out, "write output to this file instead of stdout");
    c_tree->callback([a, em, c_tree, &runner] {
      runner = [a, em, c_tree]() -> int {
        em->sub = c_tree;
        bool warn = false;
        const double v = tree_green_ratio(a->k, a->lambda, &warn);
        if (em->format == "csv") {
          em->emit_csv("k,lambda,value", {std::to_string(a->k) + "," + fmt(a->lambda) + "," + fmt(v)});
        } else {
          json payload;
          payload["value"] = v;
          payload["k"] = a->k;
          payload["lambda"] = a->lambda;
          payload["recurrence_warning"] = warn;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- alpha-table -------------------------------------------------------
  auto* c_alpha = app.add_subcommand("alpha-table",
                                     "coefficients of L0^n(J) = J + sum_s alpha(n,s) Q^s");
  {
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    auto n_max = std::make_shared<int>(40);
    em->format = "csv";
    ks->attach(c_alpha);
    c_alpha->add_option("--n-max", *n_max, "largest iterate");
    c_alpha->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_alpha->add_option("--out", em->out, "write output to this file instead of stdout");
    c_alpha->callback([ks, em, n_max, c_alpha, &runner] {
      runner = [ks, em, n_max, c_alpha]() -> int {
        em->sub = c_alpha;
        const KernelMatrix k = ks->load(*em);
        const AlphaTable t = alpha_table(trace_seq(k.spectrum_cached(), *n_max), *n_max);
        if (em->format == "csv") {
          std::vector<std::string> rows;
          for (int n = 0; n <= t.n_max; ++n) {
            for (int s = 0; s <= n; ++s) {
              rows.push_back(std::to_string(n) + "," + std::to_string(s) + "," + fmt(t.at(n, s)));
            }
          }
          em->emit_csv("n,s,alpha", rows);
        } else {
          json payload;
          payload["n_max"] = t.n_max;
          json rows = json::array();
          for (int n = 0; n <= t.n_max; ++n) {
            json row = json::array();
            for (int s = 0; s <= n; ++s) row.push_back(t.at(n, s));
            rows.push_back(row);
          }
          payload["alpha"] = rows;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- laplace-exact -----------------------------------------------------
  auto* c_lexact = app.add_subcommand("laplace-exact",
                                      "E[e^{-lambda M_{U,V}}] by exact correlation iteration");
  {
    struct A {
      double lambda = 1.0, u = 0.5, tol = 1e-8;
    };
    auto a = std::make_shared<A>();
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_lexact);
    c_lexact->add_option("--lambda", a->lambda, "transform rate, > 0")->required();
    c_lexact->add_option("--u", a->u, "initial density in (0,1); the value is u-independent");
    c_lexact->add_option("--tol", a->tol, "series truncation tolerance");
    c_lexact->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_lexact->add_option("--out", em->out, "write output to this file instead of stdout");
    c_lexact->callback([a, ks, em, c_lexact, &runner] {
      runner = [a, ks, em, c_lexact]() -> int {
        em->sub = c_lexact;
        const KernelMatrix k = ks->load(*em);
        const SeriesResult r = laplace_series_exact(k, a->lambda, a->u, a->tol);
        if (em->format == "csv") {
          em->emit_csv("lambda,value,truncation_index,tail_bound",
                       {fmt(a->lambda) + "," + fmt(r.value) + "," +
                        std::to_string(r.truncation_index) + "," + fmt(r.tail_bound)});
        } else {
          json payload;
          payload["value"] = r.value;
          payload["lambda"] = a->lambda;
          payload["u"] = a->u;
          payload["tol"] = a->tol;
          payload["truncation_index"] = r.truncation_index;
          payload["tail_bound"] = r.tail_bound;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- laplace-approx ----------------------------------------------------
  auto* c_lapprox = app.add_subcommand("laplace-approx",
                                       "approximate transform from the homogeneous iteration");
  {
    struct A {
      double lambda = 1.0, u = 0.5, tol = 1e-8;
      std::string mode = "trace";
    };
    auto a = std::make_shared<A>();
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_lapprox);
    c_lapprox->add_option("--lambda", a->lambda, "transform rate, > 0")->required();
    c_lapprox->add_option("--u", a->u, "initial density in (0,1)");
    c_lapprox->add_option("--tol", a->tol, "series truncation tolerance");
    c_lapprox->add_option("--mode", a->mode, "trace = closed-form ratio, alpha = summed series")
        ->check(CLI::IsMember({"trace", "alpha"}));
    c_lapprox->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_lapprox->add_option("--out", em->out, "write output to this file instead of stdout");
    c_lapprox->callback([a, ks, em, c_lapprox, &runner] {
      runner = [a, ks, em, c_lapprox]() -> int {
        em->sub = c_lapprox;
        const KernelMatrix k = ks->load(*em);
        const ApproxMode mode =
            a->mode == "trace" ? ApproxMode::trace_ratio : ApproxMode::alpha_series;
        const SeriesResult r = laplace_series_approx(k.spectrum_cached(), a->lambda, a->u, mode, a->tol);
        if (em->format == "csv") {
          em->emit_csv("lambda,value,truncation_index,tail_bound",
                       {fmt(a->lambda) + "," + fmt(r.value) + "," +
                        std::to_string(r.truncation_index) + "," + fmt(r.tail_bound)});
        } else {
          json payload;
          payload["value"] = r.value;
          payload["lambda"] = a->lambda;
          payload["u"] = a->u;
          payload["mode"] = a->mode;
          payload["truncation_index"] = r.truncation_index;
          payload["tail_bound"] = r.tail_bound;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- bound -------------------------------------------------------------
  auto* c_bound = app.add_subcommand("bound", "three-term error bound report at one parameter point");
  {
    struct A {
      double lambda = 1.0, epsilon = 0.5, gamma = 0.0;
      int m = 1, s_max = 0;
      bool with_lhs = false;
    };
    auto a = std::make_shared<A>();
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_bound);
    c_bound->add_option("--lambda", a->lambda, "transform rate, > epsilon")->required();
    c_bound->add_option("--epsilon", a->epsilon, "contour margin in (0,1]");
    c_bound->add_option("--m", a->m, "sweep count, >= 1");
    c_bound->add_option("--gamma", a->gamma, "return-probability agreement slack in [0,1]");
    c_bound->add_option("--s-max", a->s_max, "truncation of the Delta minimization; 0 = default");
    c_bound->add_flag("--with-lhs", a->with_lhs, "also compute the exact transform and the gap");
    c_bound->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_bound->add_option("--out", em->out, "write output to this file instead of stdout");
    c_bound->callback([a, ks, em, c_bound, &runner] {
      runner = [a, ks, em, c_bound]() -> int {
        em->sub = c_bound;
        const KernelMatrix k = ks->load(*em);
        const BoundReport r =
            theorem1_bound(k, a->lambda, a->epsilon, a->m, a->gamma, a->s_max, a->with_lhs);
        if (em->format == "csv") {
          em->emit_csv(
              "lambda,epsilon,m,gamma,s_max,term1,term2,term3,total,delta,s_star,vacuous",
              {fmt(r.lambda) + "," + fmt(r.epsilon) + "," + std::to_string(r.m) + "," +
               fmt(r.gamma) + "," + std::to_string(r.s_max) + "," + fmt(r.term1) + "," +
               fmt(r.term2) + "," + fmt(r.term3) + "," + fmt(r.total) + "," + fmt(r.delta) + "," +
               std::to_string(r.s_star) + "," + (r.vacuous ? "1" : "0")});
        } else {
          em->emit_json(bound_report_json(r));
        }
        return 0;
      };
    });
  }

  // ---- bound-scan --------------------------------------------------------
  auto* c_scan = app.add_subcommand(
      "bound-scan",
      "bound report over a parameter grid (CSV); cells violating the bound hypotheses are skipped");
  {
    struct A {
      std::vector<double> lambdas{0.5, 1.0, 2.0, 5.0};
      std::vector<double> epsilons{0.25, 0.5};
      std::vector<int> ms{1, 2};
      std::vector<double> gammas{0.0, 0.01};
      int s_max = 0;
      std::string gnuplot;
    };
    auto a = std::make_shared<A>();
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    em->format = "csv";
    ks->attach(c_scan);
    c_scan->add_option("--lambda", a->lambdas, "transform rates (repeatable)");
    c_scan->add_option("--epsilon", a->epsilons, "contour margins (repeatable)");
    c_scan->add_option("--m", a->ms, "sweep counts (repeatable)");
    c_scan->add_option("--gamma", a->gammas, "agreement slacks (repeatable)");
    c_scan->add_option("--s-max", a->s_max, "truncation of the Delta minimization; 0 = default");
    c_scan->add_option("--gnuplot", a->gnuplot, "also write a gnuplot script to this path");
    c_scan->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_scan->add_option("--out", em->out, "write output to this file instead of stdout");
    c_scan->callback([a, ks, em, c_scan, &runner] {
      runner = [a, ks, em, c_scan]() -> int {
        em->sub = c_scan;
        const KernelMatrix k = ks->load(*em);
        std::sort(a->lambdas.begin(), a->lambdas.end());
        std::sort(a->epsilons.begin(), a->epsilons.end());
        std::sort(a->ms.begin(), a->ms.end());
        std::sort(a->gammas.begin(), a->gammas.end());
        std::vector<BoundReport> reports;
        int skipped = 0;
        for (double lambda : a->lambdas)
          for (double eps : a->epsilons)
            for (int m : a->ms)
              for (double gamma : a->gammas) {
                // Same hypotheses theorem1_bound enforces; a survey skips the
                // invalid cells instead of dying on the first one.
                if (!(lambda > eps) || (lambda - eps) * k.n - lambda * eps <= 0.0) {
                  ++skipped;
                  continue;
                }
                reports.push_back(theorem1_bound(k, lambda, eps, m, gamma, a->s_max));
              }
        if (reports.empty())
          throw PreconditionViolation(
              "bound-scan: every grid cell violates the bound hypotheses "
              "(needs lambda > epsilon and (lambda - epsilon) N > lambda epsilon)");
        if (em->format == "json") {
          json payload;
          json rows = json::array();
          for (const BoundReport& r : reports) rows.push_back(bound_report_json(r));
          payload["rows"] = rows;
          payload["skipped_cells"] = skipped;
          em->emit_json(payload);
        } else {
          std::vector<std::string> rows;
          for (const BoundReport& r : reports) {
            rows.push_back(fmt(r.lambda) + "," + fmt(r.epsilon) + "," + std::to_string(r.m) + "," +
                           fmt(r.gamma) + "," + std::to_string(r.s_max) + "," + fmt(r.term1) +
                           "," + fmt(r.term2) + "," + fmt(r.term3) + "," + fmt(r.total) + "," +
                           fmt(r.delta) + "," + std::to_string(r.s_star) + "," +
                           (r.vacuous ? "1" : "0"));
          }
          em->emit_csv("lambda,epsilon,m,gamma,s_max,term1,term2,term3,total,delta,s_star,vacuous",
                       rows);
        }
        if (!a->gnuplot.empty()) {
          write_gnuplot(a->gnuplot, em->out, "bound total", 1, 9, "lambda", "total", true);
        }
        return 0;
      };
    });
  }

  // ---- oracle ------------------------------------------------------------
  auto* c_oracle = app.add_subcommand("oracle",
                                      "first-order transform from the pair-system solve");
  {
    auto lambda = std::make_shared<double>(1.0);
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_oracle);
    c_oracle->add_option("--lambda", *lambda, "transform rate, > 0")->required();
    c_oracle->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_oracle->add_option("--out", em->out, "write output to this file instead of stdout");
    c_oracle->callback([lambda, ks, em, c_oracle, &runner] {
      runner = [lambda, ks, em, c_oracle]() -> int {
        em->sub = c_oracle;
        const KernelMatrix k = ks->load(*em);
        const PairLaplaceTable t = exact_pair_laplace(k, *lambda);
        NeumaierSum acc;
        for (int x = 0; x < k.n; ++x) {
          for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) {
            acc.add(k.val[p] * t.phi.at(x, k.col_idx[p]));
          }
        }
        const double v = acc.value() / k.n;
        if (em->format == "csv") {
          em->emit_csv("lambda,value,max_residual",
                       {fmt(*lambda) + "," + fmt(v) + "," + fmt(t.max_residual)});
        } else {
          json payload;
          payload["value"] = v;
          payload["lambda"] = *lambda;
          payload["n"] = k.n;
          payload["max_residual"] = t.max_residual;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- simulate ----------------------------------------------------------
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo estimate of E[e^{-lambda M}]");
  {
    struct A {
      double lambda = 1.0;
      long long samples = 100000;
      uint64_t seed = 1;
      int workers = 0;
      std::string start = "adjacent";
      int x = 0, y = 0, s = 1, m = 0, n_steps = 0;
    };
    auto a = std::make_shared<A>();
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_sim);
    c_sim->add_option("--lambda", a->lambda, "transform rate, > 0")->required();
    c_sim->add_option("--samples", a->samples, "number of meeting times to draw");
    c_sim->add_option("--seed", a->seed, "RNG seed; result is a pure function of it");
    c_sim->add_option("--workers", a->workers, "worker threads; 0 = MEETING_LAB_THREADS or 1");
    c_sim->add_option("--start", a->start, "uniform|adjacent|fixed|sstep|indep");
    c_sim->add_option("--x", a->x, "first state for --start fixed");
    c_sim->add_option("--y", a->y, "second state for --start fixed");
    c_sim->add_option("--s", a->s, "step count for --start sstep");
    c_sim->add_option("--m", a->m, "first offset for --start indep");
    c_sim->add_option("--n-steps", a->n_steps, "second offset for --start indep");
    c_sim->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_sim->add_option("--out", em->out, "write output to this file instead of stdout");
    c_sim->callback([a, ks, em, c_sim, &runner] {
      runner = [a, ks, em, c_sim]() -> int {
        em->sub = c_sim;
        em->seed = a->seed;
        const KernelMatrix k = ks->load(*em);
        const StartSpec start = parse_start(a->start, a->x, a->y, a->s, a->m, a->n_steps);
        const MeetingEstimate est =
            simulate_meeting(k, start, a->lambda, a->samples, a->seed, resolve_workers(a->workers));
        if (em->format == "csv") {
          em->emit_csv("lambda,value,std_error,samples,seed",
                       {fmt(est.lambda) + "," + fmt(est.value) + "," + fmt(est.std_error) + "," +
                        std::to_string(est.samples) + "," + std::to_string(est.seed)});
        } else {
          json payload;
          payload["value"] = est.value;
          payload["std_error"] = est.std_error;
          payload["samples"] = est.samples;
          payload["seed"] = est.seed;
          payload["lambda"] = est.lambda;
          payload["start"] = a->start;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- higher-order ------------------------------------------------------
  auto* c_higher = app.add_subcommand("higher-order",
                                      "residual of the meeting-time shift identity");
  {
    struct A {
      int m = 0, n_steps = 0, quad_points = 128;
      double t = 1.0;
    };
    auto a = std::make_shared<A>();
    auto ks = std::make_shared<KernelSource>();
    auto em = std::make_shared<Emitter>();
    ks->attach(c_higher);
    c_higher->add_option("--m", a->m, "first chain offset, >= 0");
    c_higher->add_option("--n-steps", a->n_steps, "second chain offset, >= 0");
    c_higher->add_option("--t", a->t, "time horizon, >= 0")->required();
    c_higher->add_option("--quad-points", a->quad_points, "quadrature nodes, >= 32");
    c_higher->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_higher->add_option("--out", em->out, "write output to this file instead of stdout");
    c_higher->callback([a, ks, em, c_higher, &runner] {
      runner = [a, ks, em, c_higher]() -> int {
        em->sub = c_higher;
        const KernelMatrix k = ks->load(*em);
        const double r = higher_order_residual(k, a->m, a->n_steps, a->t, a->quad_points);
        if (em->format == "csv") {
          em->emit_csv("m,n,t,quad_points,residual",
                       {std::to_string(a->m) + "," + std::to_string(a->n_steps) + "," + fmt(a->t) +
                        "," + std::to_string(a->quad_points) + "," + fmt(r)});
        } else {
          json payload;
          payload["residual"] = r;
          payload["m"] = a->m;
          payload["n"] = a->n_steps;
          payload["t"] = a->t;
          payload["quad_points"] = a->quad_points;
          em->emit_json(payload);
        }
        return 0;
      };
    });
  }

  // ---- convergence-study -------------------------------------------------
  auto* c_study = app.add_subcommand(
      "convergence-study", "finite-size transforms against the infinite-tree limit (CSV)");
  {
    struct A {
      int k = 3;
      std::vector<int> n_list;
      std::vector<double> lambdas{1.0};
      int graphs_per_n = 5;
      uint64_t seed = 1;
      long long samples = 1000000;
      int workers = 0;
      std::string gnuplot;
    };
    auto a = std::make_shared<A>();
    auto em = std::make_shared<Emitter>();
    em->format = "csv";
    c_study->add_option("--k", a->k, "graph degree, >= 3");
    c_study->add_option("--n", a->n_list, "graph sizes (repeatable)")->required();
    c_study->add_option("--lambda", a->lambdas, "transform rates (repeatable)");
    c_study->add_option("--graphs-per-n", a->graphs_per_n, "replicate graphs per size");
    c_study->add_option("--seed", a->seed, "master seed; per-graph seeds derive from it");
    c_study->add_option("--samples", a->samples, "Monte Carlo samples when simulation is used");
    c_study->add_option("--workers", a->workers, "worker threads; 0 = MEETING_LAB_THREADS or 1");
    c_study->add_option("--gnuplot", a->gnuplot, "also write a gnuplot script to this path");
    c_study->add_option("--format", em->format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    c_study->add_option("--out", em->out, "write output to this file instead of stdout");
    c_study->callback([a, em, c_study, &runner] {
      runner = [a, em, c_study]() -> int {
        em->sub = c_study;
        em->seed = a->seed;
        if (a->k < 3) throw PreconditionViolation("convergence-study: need k >= 3");
        if (a->graphs_per_n < 1) throw PreconditionViolation("convergence-study: need graphs-per-n >= 1");
        std::sort(a->n_list.begin(), a->n_list.end());
        std::sort(a->lambdas.begin(), a->lambdas.end());
        std::map<double, double> tree_values;
        for (double lambda : a->lambdas) tree_values[lambda] = tree_green_ratio(a->k, lambda);

        std::vector<StudyRow> rows;
        for (int n : a->n_list) {
          for (int rep = 0; rep < a->graphs_per_n; ++rep) {
            const uint64_t gseed = mix_seed(mix_seed(a->seed, static_cast<uint64_t>(n)),
                                            static_cast<uint64_t>(rep));
            KernelMatrix k;
            std::string build_error;
            try {
              k = kernel_from_graph(random_regular_graph(a->k, n, gseed));
            } catch (const std::exception& e) {
              build_error = e.what();
            }
            for (double lambda : a->lambdas) {
              StudyRow row;
              row.n = n;
              row.lambda = lambda;
              row.replicate = rep;
              row.graph_seed = gseed;
              row.tree = tree_values[lambda];
              if (!build_error.empty()) {
                row.method = "none";
                row.error = sanitize_cell(build_error);
                rows.push_back(row);
                continue;
              }
              try {
                if (n <= 200) {
                  row.method = "series";
                  row.value = laplace_series_exact(k, lambda, 0.5, 1e-8).value;
                  row.std_error = 0.0;
                } else if (n <= 4000) {
                  row.method = "pair-solve";
                  row.value = exact_first_order_laplace(k, lambda);
                  row.std_error = 0.0;
                } else {
                  row.method = "simulate";
                  const MeetingEstimate est =
                      simulate_meeting(k, StartSpec::q_adjacent_pair(), lambda, a->samples,
                                       mix_seed(gseed, 0x5117), resolve_workers(a->workers));
                  row.value = est.value;
                  row.std_error = est.std_error;
                }
                row.ratio = green_ratio(k.spectrum_cached(), lambda);
                row.gap_ratio = std::abs(row.value - row.ratio);
                row.gap_tree = std::abs(row.value - row.tree);
              } catch (const std::exception& e) {
                row.error = sanitize_cell(e.what());
              }
              rows.push_back(row);
            }
          }
        }
        // Fixed output order regardless of how work was scheduled.
        std::stable_sort(rows.begin(), rows.end(), [](const StudyRow& a_, const StudyRow& b_) {
          if (a_.n != b_.n) return a_.n < b_.n;
          if (a_.lambda != b_.lambda) return a_.lambda < b_.lambda;
          return a_.replicate < b_.replicate;
        });
        if (em->format == "json") {
          json payload;
          json jrows = json::array();
          for (const StudyRow& r : rows) {
            json jr;
            jr["n"] = r.n;
            jr["lambda"] = r.lambda;
            jr["replicate"] = r.replicate;
            jr["graph_seed"] = r.graph_seed;
            jr["method"] = r.method;
            jr["value"] = r.value;
            jr["std_error"] = r.std_error;
            jr["green_ratio"] = r.ratio;
            jr["tree_ratio"] = r.tree;
            jr["gap_ratio"] = r.gap_ratio;
            jr["gap_tree"] = r.gap_tree;
            jr["error"] = r.error;
            jrows.push_back(jr);
          }
          payload["rows"] = jrows;
          em->emit_json(payload);
        } else {
          std::vector<std::string> lines;
          for (const StudyRow& r : rows) {
            lines.push_back(std::to_string(r.n) + "," + fmt(r.lambda) + "," +
                            std::to_string(r.replicate) + "," + std::to_string(r.graph_seed) +
                            "," + r.method + "," + fmt(r.value) + "," + fmt(r.std_error) + "," +
                            fmt(r.ratio) + "," + fmt(r.tree) + "," + fmt(r.gap_ratio) + "," +
                            fmt(r.gap_tree) + "," + r.error);
          }
          em->emit_csv(
              "n,lambda,replicate,graph_seed,method,value,std_error,green_ratio,tree_ratio,"
              "gap_ratio,gap_tree,error",
              lines);
        }
        if (!a->gnuplot.empty()) {
          write_gnuplot(a->gnuplot, em->out, "gap to tree limit", 1, 11, "n", "|value - tree|",
                        true);
        }
        return 0;
      };
    });
  }

  // ---- dispatch ----------------------------------------------------------
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    return runner ? runner() : 1;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  }
}
