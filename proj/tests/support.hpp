#pragma once

#include "doctest.h"
#include "mlab/kernel.hpp"

#include <string>
#include <vector>

namespace fixtures {

// 3-regular graph on 10 vertices with a triangle {0,1,2} and a triangle-free
// vertex 9; diag(Q^3) is non-constant (2/27 at vertex 0, 0 at vertex 9), so
// the graph is not walk-regular at s = 3.
inline mlab::Graph mixed10() {
  mlab::Graph g;
  g.n = 10;
  g.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 4}, {2, 5}, {3, 6}, {3, 7},
             {4, 6}, {4, 8}, {5, 8}, {5, 9}, {6, 9}, {7, 8}, {7, 9}};
  return g;
}

// Weighted symmetric stochastic kernel on 6 states with zero diagonal;
// diag(Q^2) is non-constant (0.68 at state 0, 0.38 at state 2), so it is not
// walk-regular already at s = 2.
inline mlab::KernelMatrix w6() {
  const double e[36] = {
      0.0, 0.8, 0.2, 0.0, 0.0, 0.0,  //
      0.8, 0.0, 0.0, 0.2, 0.0, 0.0,  //
      0.2, 0.0, 0.0, 0.5, 0.3, 0.0,  //
      0.0, 0.2, 0.5, 0.0, 0.0, 0.3,  //
      0.0, 0.0, 0.3, 0.0, 0.0, 0.7,  //
      0.0, 0.0, 0.0, 0.3, 0.7, 0.0,
  };
  return mlab::kernel_from_entries(6, std::vector<double>(e, e + 36));
}

// Star on 5 vertices: connected but not regular; builder must reject it.
inline std::vector<std::pair<int, int>> star5_edges() {
  return {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
}

}  // namespace fixtures
