#ifndef INCAP_CONTRACTION_HPP
#define INCAP_CONTRACTION_HPP

#include <vector>

#include "incap/site_graph.hpp"

namespace incap {

// Geometry between a condensing pair (x, y) at graph distance >= 3, with the
// neighborhoods of x and y contracted away. `interior` holds the remaining
// non-condensing sites, split into connected components (ordered by smallest
// member). Anchor sites are interior sites adjacent to a contracted
// neighborhood; sx/sy aggregate the contracted multi-edge conductances
// sum_a c_av / (1 - m_a) over a in the respective neighborhood.
struct ContractedGraph {
  int x = -1, y = -1;
  std::vector<int> nx, ny;        // neighborhoods of x and y (sorted)
  std::vector<int> interior;      // sites outside {x,y} and both neighborhoods
  bool xy_linked = false;         // some a in nx adjacent to some b in ny
  std::vector<std::vector<int>> components;
  std::vector<int> component_of;  // per site, -1 outside interior
  std::vector<int> anchors_x, anchors_y;  // interior sites adjacent to nx / ny
  std::vector<double> sx, sy;             // per site, 0 outside interior

  std::vector<int> anchors(int component) const;  // union of x/y anchors in one component
};

// Throws AssumptionViolated when x, y are not condensing sites at graph
// distance >= 3 (same third-scale block reachable in <= 2 steps).
ContractedGraph contract_graph(const SiteGraph& g, int x, int y);

}  // namespace incap

#endif
