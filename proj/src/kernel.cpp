#include "mlab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "mlab/rng.hpp"

namespace mlab {

namespace {

void build_csr(KernelMatrix& k, const std::vector<std::vector<std::pair<int, double>>>& rows) {
  k.row_ptr.assign(k.n + 1, 0);
  for (int x = 0; x < k.n; ++x) k.row_ptr[x + 1] = k.row_ptr[x] + static_cast<int>(rows[x].size());
  k.col_idx.resize(k.row_ptr[k.n]);
  k.val.resize(k.row_ptr[k.n]);
  for (int x = 0; x < k.n; ++x) {
    int p = k.row_ptr[x];
    for (auto& [y, v] : rows[x]) {
      k.col_idx[p] = y;
      k.val[p] = v;
      ++p;
    }
  }
}

bool connected_from_rows(int n, const std::vector<std::vector<std::pair<int, double>>>& rows) {
  if (n == 0) return false;
  std::vector<char> seen(n, 0);
  std::queue<int> bfs;
  bfs.push(0);
  seen[0] = 1;
  int count = 1;
  while (!bfs.empty()) {
    int x = bfs.front();
    bfs.pop();
    for (auto& [y, v] : rows[x]) {
      if (v != 0.0 && !seen[y]) {
        seen[y] = 1;
        ++count;
        bfs.push(y);
      }
    }
  }
  return count == n;
}

std::vector<std::vector<std::pair<int, double>>> rows_from_kernel(const KernelMatrix& k) {
  std::vector<std::vector<std::pair<int, double>>> rows(k.n);
  for (int x = 0; x < k.n; ++x)
    for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p) rows[x].push_back({k.col_idx[p], k.val[p]});
  return rows;
}

}  // namespace

double KernelMatrix::q(int x, int y) const {
  if (dense_store) return entries[static_cast<size_t>(x) * n + y];
  int lo = row_ptr[x], hi = row_ptr[x + 1];
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (col_idx[mid] < y)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < row_ptr[x + 1] && col_idx[lo] == y) return val[lo];
  return 0.0;
}

void KernelMatrix::matvec(const double* v, double* out) const {
  for (int x = 0; x < n; ++x) {
    double acc = 0.0;
    for (int p = row_ptr[x]; p < row_ptr[x + 1]; ++p) acc += val[p] * v[col_idx[p]];
    out[x] = acc;
  }
}

void KernelMatrix::left_multiply(const Mat& a, Mat& out) const {
  if (a.rows != n || a.cols != n) throw DimensionMismatch("left_multiply: matrix size mismatch");
  out.rows = out.cols = n;
  out.a.assign(static_cast<size_t>(n) * n, 0.0);
  for (int x = 0; x < n; ++x) {
    double* orow = out.row(x);
    for (int p = row_ptr[x]; p < row_ptr[x + 1]; ++p) {
      double w = val[p];
      const double* arow = a.row(col_idx[p]);
      for (int y = 0; y < n; ++y) orow[y] += w * arow[y];
    }
  }
}

void KernelMatrix::right_multiply(const Mat& a, Mat& out) const {
  if (a.rows != n || a.cols != n) throw DimensionMismatch("right_multiply: matrix size mismatch");
  out.rows = out.cols = n;
  out.a.assign(static_cast<size_t>(n) * n, 0.0);
  // (a Q)(x,y) = sum_z a(x,z) Q(z,y); walk Q by rows (symmetric, so Q(z,y) runs over row z)
  for (int x = 0; x < n; ++x) {
    const double* arow = a.row(x);
    double* orow = out.row(x);
    for (int z = 0; z < n; ++z) {
      double w = arow[z];
      if (w == 0.0) continue;
      for (int p = row_ptr[z]; p < row_ptr[z + 1]; ++p) orow[col_idx[p]] += w * val[p];
    }
  }
}

KernelMatrix kernel_from_entries(int n, std::vector<double> entries) {
  if (n <= 0 || entries.size() != static_cast<size_t>(n) * n)
    throw DimensionMismatch("kernel_from_entries: need n*n entries");
  KernelMatrix k;
  k.n = n;
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      double v = entries[static_cast<size_t>(x) * n + y];
      if (v != 0.0) rows[x].push_back({y, v});
    }
  build_csr(k, rows);
  k.dense_store = n <= KernelMatrix::kDenseLimit;
  if (k.dense_store)
    k.entries = std::move(entries);
  else
    k.entries.clear();
  return k;
}

KernelMatrix kernel_from_edge_list(const std::vector<std::pair<int, int>>& edges, int n) {
  if (n <= 1) throw PreconditionViolation("kernel_from_edge_list: need n > 1");
  std::vector<std::set<int>> adj(n);
  for (auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw PreconditionViolation("kernel_from_edge_list: vertex out of range");
    if (u == v) throw LoopEdge("kernel_from_edge_list: loop at vertex " + std::to_string(u));
    if (adj[u].count(v))
      throw PreconditionViolation("kernel_from_edge_list: duplicate edge " + std::to_string(u) +
                                  "-" + std::to_string(v));
    adj[u].insert(v);
    adj[v].insert(u);
  }
  size_t deg0 = adj[0].size();
  for (int x = 0; x < n; ++x)
    if (adj[x].size() != deg0)
      throw NonRegular("kernel_from_edge_list: degree " + std::to_string(adj[x].size()) +
                       " at vertex " + std::to_string(x) + " differs from " + std::to_string(deg0));
  if (deg0 == 0) throw Disconnected("kernel_from_edge_list: empty graph");

  double w = 1.0 / static_cast<double>(deg0);
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (int x = 0; x < n; ++x)
    for (int y : adj[x]) rows[x].push_back({y, w});
  if (!connected_from_rows(n, rows)) throw Disconnected("kernel_from_edge_list: graph not connected");

  KernelMatrix k;
  k.n = n;
  build_csr(k, rows);
  k.dense_store = n <= KernelMatrix::kDenseLimit;
  if (k.dense_store) {
    k.entries.assign(static_cast<size_t>(n) * n, 0.0);
    for (int x = 0; x < n; ++x)
      for (int p = k.row_ptr[x]; p < k.row_ptr[x + 1]; ++p)
        k.entries[static_cast<size_t>(x) * n + k.col_idx[p]] = k.val[p];
  }
  return k;
}

KernelMatrix kernel_from_graph(const Graph& g) { return kernel_from_edge_list(g.edges, g.n); }

KernelMatrix named_kernel(const std::string& family, int n) {
  if (family != "complete" && family != "cycle")
    throw UnknownFamily("named_kernel: unknown family '" + family + "'");
  if (n <= 2) throw PreconditionViolation("named_kernel: need n > 2");
  std::vector<std::pair<int, int>> edges;
  if (family == "complete") {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) edges.push_back({u, v});
  } else {
    for (int u = 0; u < n; ++u) edges.push_back({std::min(u, (u + 1) % n), std::max(u, (u + 1) % n)});
  }
  return kernel_from_edge_list(edges, n);
}

Graph random_regular_graph(int k, int n, uint64_t seed, int max_attempts) {
  if (k < 2) throw PreconditionViolation("random_regular_graph: need k >= 2");
  if (n <= k) throw PreconditionViolation("random_regular_graph: need n > k");
  if ((static_cast<long long>(n) * k) % 2 != 0)
    throw PreconditionViolation("random_regular_graph: n*k must be even");

  SplitMix64 rng(mix_seed(seed, 0x5247524Eull));  // one stream per call, fixed tag
  int stubs = n * k;
  std::vector<int> stub(stubs);
  for (int i = 0; i < stubs; ++i) stub[i] = i / k;

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    // Fisher-Yates over the stub array gives a uniform perfect matching of
    // consecutive pairs; all draws come from the explicit stream above.
    for (int i = stubs - 1; i > 0; --i) {
      int j = static_cast<int>(rng.next_below(static_cast<uint32_t>(i + 1)));
      std::swap(stub[i], stub[j]);
    }
    bool simple = true;
    std::vector<std::set<int>> adj(n);
    for (int i = 0; i < stubs && simple; i += 2) {
      int u = stub[i], v = stub[i + 1];
      if (u == v || adj[u].count(v)) {
        simple = false;
        break;
      }
      adj[u].insert(v);
      adj[v].insert(u);
    }
    if (!simple) continue;

    std::vector<char> seen(n, 0);
    std::queue<int> bfs;
    bfs.push(0);
    seen[0] = 1;
    int count = 1;
    while (!bfs.empty()) {
      int x = bfs.front();
      bfs.pop();
      for (int y : adj[x])
        if (!seen[y]) {
          seen[y] = 1;
          ++count;
          bfs.push(y);
        }
    }
    if (count != n) continue;

    Graph g;
    g.n = n;
    for (int u = 0; u < n; ++u)
      for (int v : adj[u])
        if (u < v) g.edges.push_back({u, v});
    std::sort(g.edges.begin(), g.edges.end());
    return g;
  }
  throw RejectionBudgetExceeded("random_regular_graph: no simple connected pairing in " +
                                std::to_string(max_attempts) + " attempts (k=" + std::to_string(k) +
                                ", n=" + std::to_string(n) + ")");
}

ValidationReport validate_kernel(const KernelMatrix& k) {
  ValidationReport r;
  r.n_gt_8 = k.n > 8;
  auto rows = rows_from_kernel(k);

  double max_asym = 0.0, max_defect = 0.0, max_diag = 0.0;
  bool in_range = true;
  for (int x = 0; x < k.n; ++x) {
    NeumaierSum rowsum;
    for (auto& [y, v] : rows[x]) {
      rowsum.add(v);
      if (v < 0.0 || v > 1.0) in_range = false;
      max_asym = std::max(max_asym, std::fabs(v - k.q(y, x)));
      if (y == x) max_diag = std::max(max_diag, std::fabs(v));
    }
    max_defect = std::max(max_defect, std::fabs(rowsum.value() - 1.0));
  }
  r.max_asymmetry = max_asym;
  r.max_row_defect = max_defect;
  r.symmetric = max_asym <= 1e-12;
  r.zero_trace = max_diag <= 1e-12;
  r.stochastic = in_range && max_defect <= 1e-12;
  r.irreducible = connected_from_rows(k.n, rows);
  return r;
}

std::vector<std::vector<double>> diag_powers(const KernelMatrix& k, int s_max) {
  if (s_max < 0) throw PreconditionViolation("diag_powers: need s_max >= 0");
  std::vector<std::vector<double>> out(s_max + 1, std::vector<double>(k.n));
  for (int x = 0; x < k.n; ++x) out[0][x] = 1.0;
  if (s_max == 0) return out;

  // P <- Q^s by repeated multiplication against the support; two ping-pong
  // buffers, n^2 doubles each.
  Mat p(k.n, k.n), next(k.n, k.n);
  for (int x = 0; x < k.n; ++x)
    for (int pi = k.row_ptr[x]; pi < k.row_ptr[x + 1]; ++pi) p.at(x, k.col_idx[pi]) = k.val[pi];
  for (int x = 0; x < k.n; ++x) out[1][x] = p.at(x, x);
  for (int s = 2; s <= s_max; ++s) {
    k.left_multiply(p, next);
    std::swap(p, next);
    for (int x = 0; x < k.n; ++x) out[s][x] = p.at(x, x);
  }
  return out;
}

// File IO ----------------------------------------------------------------

namespace {

std::vector<std::string> data_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionViolation("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    bool blank = line.find_first_not_of(" \t\r\n") == std::string::npos;
    if (!blank) lines.push_back(line);
  }
  return lines;
}

}  // namespace

Graph read_edge_list(const std::string& path) {
  auto lines = data_lines(path);
  if (lines.empty()) throw PreconditionViolation("edge list file is empty: " + path);
  Graph g;
  size_t m = 0;
  {
    std::istringstream head(lines[0]);
    if (!(head >> g.n >> m)) throw PreconditionViolation("bad edge list header in " + path);
  }
  if (lines.size() - 1 != m)
    throw PreconditionViolation("edge list " + path + " declares " + std::to_string(m) +
                                " edges, found " + std::to_string(lines.size() - 1));
  for (size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    int u, v;
    if (!(row >> u >> v)) throw PreconditionViolation("bad edge line in " + path + ": " + lines[i]);
    g.edges.push_back({std::min(u, v), std::max(u, v)});
  }
  return g;
}

void write_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PreconditionViolation("cannot write file: " + path);
  out << g.n << " " << g.edges.size() << "\n";
  for (auto& [u, v] : g.edges) out << u << " " << v << "\n";
}

KernelMatrix read_kernel_csv(const std::string& path) {
  auto lines = data_lines(path);
  int n = static_cast<int>(lines.size());
  if (n == 0) throw PreconditionViolation("kernel csv is empty: " + path);
  std::vector<double> entries(static_cast<size_t>(n) * n);
  for (int x = 0; x < n; ++x) {
    std::istringstream row(lines[x]);
    std::string cell;
    for (int y = 0; y < n; ++y) {
      if (!std::getline(row, cell, ','))
        throw PreconditionViolation("kernel csv row " + std::to_string(x) + " has fewer than " +
                                    std::to_string(n) + " columns in " + path);
      entries[static_cast<size_t>(x) * n + y] = std::stod(cell);
    }
    if (std::getline(row, cell, ','))
      throw PreconditionViolation("kernel csv row " + std::to_string(x) + " has extra columns in " +
                                  path);
  }
  return kernel_from_entries(n, std::move(entries));
}

}  // namespace mlab
