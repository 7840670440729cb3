#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mlab/errors.hpp"
#include "mlab/linalg.hpp"

namespace mlab {

struct Spectrum;  // spectral.hpp

struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // unordered pairs, stored u < v
};

struct ValidationReport {
  bool symmetric = false;
  bool zero_trace = false;
  bool stochastic = false;
  bool irreducible = false;
  bool n_gt_8 = false;  // advisory only
  double max_asymmetry = 0.0;
  double max_row_defect = 0.0;

  bool accepted() const { return symmetric && zero_trace && stochastic && irreducible; }
};

namespace detail {
struct SpectralCache;  // lazily holds the eigendecomposition, shared on copy
}

// Symmetric zero-trace stochastic kernel Q on states 0..n-1.
// Dense entry storage up to kDenseLimit states; the CSR view of the nonzero
// support is always built and is what every matvec-style loop walks.
struct KernelMatrix {
  static constexpr int kDenseLimit = 512;

  int n = 0;
  bool dense_store = true;
  std::vector<double> entries;  // n*n row-major; empty when !dense_store

  std::vector<int> row_ptr;  // CSR over nonzeros, rows sorted by column
  std::vector<int> col_idx;
  std::vector<double> val;

  mutable std::shared_ptr<detail::SpectralCache> cache;

  double q(int x, int y) const;
  int nnz() const { return static_cast<int>(col_idx.size()); }
  int row_degree(int x) const { return row_ptr[x + 1] - row_ptr[x]; }

  // y = Q v
  void matvec(const double* v, double* out) const;
  // B = Q A and B = A Q for dense row-major A (n x n)
  void left_multiply(const Mat& a, Mat& out) const;   // out = Q a
  void right_multiply(const Mat& a, Mat& out) const;  // out = a Q

  const Spectrum& spectrum_cached() const;
};

// Builders ---------------------------------------------------------------

// Random-walk kernel Q(x,y) = 1/k on a simple connected regular graph.
KernelMatrix kernel_from_edge_list(const std::vector<std::pair<int, int>>& edges, int n);
KernelMatrix kernel_from_graph(const Graph& g);

// Direct kernel from a full matrix (row-major n*n). No validation here.
KernelMatrix kernel_from_entries(int n, std::vector<double> entries);

// family: "complete" or "cycle"; n > 2
KernelMatrix named_kernel(const std::string& family, int n);

// Configuration model conditioned on simple + connected, uniform over simple
// connected k-regular graphs. Deterministic in seed.
Graph random_regular_graph(int k, int n, uint64_t seed, int max_attempts = 10000);

ValidationReport validate_kernel(const KernelMatrix& k);

// diag(Q^s) for s = 0..s_max by repeated support multiplication; no
// eigendecomposition involved.
std::vector<std::vector<double>> diag_powers(const KernelMatrix& k, int s_max);

// File formats -----------------------------------------------------------
// Edge list: first non-comment line "n m", then m lines "u v" (0-indexed).
// '#' starts a comment. Kernel CSV: n rows of n comma-separated decimals.

Graph read_edge_list(const std::string& path);
void write_edge_list(const Graph& g, const std::string& path);
KernelMatrix read_kernel_csv(const std::string& path);

}  // namespace mlab
