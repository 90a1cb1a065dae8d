#ifndef INCAP_HIERARCHY_HPP
#define INCAP_HIERARCHY_HPP

#include <Eigen/Dense>
#include <vector>

#include "incap/site_graph.hpp"

namespace incap {

// Three-level metastable decomposition of the condensing sites.
//   level2: components of the walk restricted to s_star (first-scale limit),
//   level3: level2 blocks additionally joined when they sit at graph
//           distance exactly two through a non-condensing site.
// Blocks are ordered by their minimal site index; block members are sorted.
struct MetastableHierarchy {
  std::vector<int> s_star;
  std::vector<int> s_zero;
  std::vector<std::vector<int>> level2;
  std::vector<std::vector<int>> level3;
  std::vector<int> level2_of;  // -1 for non-condensing sites
  std::vector<int> level3_of;
  Eigen::MatrixXd rij;   // second-scale resistance per level2 block pair, +inf allowed
  Eigen::MatrixXd r2nd;  // r2nd(i,j) = 1 / (|block_i| * rij(i,j)), 0 when rij = +inf
  double m_star = 0.0;       // max measure over s_zero (0 when s_zero empty)
  double m_star_star = 0.0;  // min measure over s_zero
  std::vector<int> near_degenerate;  // sites with measure within [1e-12, 1e-6) of the max

  int kappa2() const { return static_cast<int>(level2.size()); }
  int kappa3() const { return static_cast<int>(level3.size()); }
};

MetastableHierarchy metastable_hierarchy(const SiteGraph& g);

// Second-scale resistance between two disjoint site blocks: the [0,1]
// quadrature of the reciprocal aggregated two-step conductance. Returns +inf
// when no site connects the blocks in two steps.
double compute_rij(const SiteGraph& g, const std::vector<int>& block_i,
                   const std::vector<int>& block_j, double abs_tol = 1e-10);

}  // namespace incap

#endif
