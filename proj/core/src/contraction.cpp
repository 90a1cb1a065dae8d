#include "incap/contraction.hpp"

#include <algorithm>

#include "incap/errors.hpp"

namespace incap {

std::vector<int> ContractedGraph::anchors(int component) const {
  std::vector<int> out;
  for (int v : components[component])
    if (sx[v] > 0.0 || sy[v] > 0.0) out.push_back(v);
  return out;
}

ContractedGraph contract_graph(const SiteGraph& g, int x, int y) {
  if (x == y) throw AssumptionViolated("condensing pair must be two distinct sites");
  if (g.measure(x) < 1.0 - 1e-12 || g.measure(y) < 1.0 - 1e-12)
    throw AssumptionViolated("both endpoints must carry the maximal measure");
  for (int v = 0; v < g.size(); ++v)
    if (v != x && v != y && g.measure(v) >= 1.0 - 1e-12)
      throw AssumptionViolated(
          "a third condensing site (" + g.names[v] +
          ") would sit inside the contraction; the construction needs exactly two");
  int dist = g.distance(x, y);
  if (dist <= 2)
    throw AssumptionViolated("pair is at graph distance " + std::to_string(dist) +
                             "; the contraction needs distance >= 3");

  ContractedGraph c;
  c.x = x;
  c.y = y;
  c.nx = g.neighbors(x);
  c.ny = g.neighbors(y);

  int n = g.size();
  std::vector<char> in_nx(n, 0), in_ny(n, 0);
  for (int a : c.nx) in_nx[a] = 1;
  for (int b : c.ny) in_ny[b] = 1;
  for (int a : c.nx)
    for (int b : c.ny)
      if (g.edge(a, b)) c.xy_linked = true;

  for (int v = 0; v < n; ++v)
    if (v != x && v != y && !in_nx[v] && !in_ny[v]) c.interior.push_back(v);

  c.sx.assign(n, 0.0);
  c.sy.assign(n, 0.0);
  for (int v : c.interior) {
    for (int a : c.nx)
      if (g.edge(a, v)) c.sx[v] += g.conductance(a, v) / (1.0 - g.measure(a));
    for (int b : c.ny)
      if (g.edge(b, v)) c.sy[v] += g.conductance(b, v) / (1.0 - g.measure(b));
    if (c.sx[v] > 0.0) c.anchors_x.push_back(v);
    if (c.sy[v] > 0.0) c.anchors_y.push_back(v);
  }

  // Connected components of the interior under the original edges.
  c.component_of.assign(n, -1);
  std::vector<char> seen(n, 0);
  for (int start : c.interior) {
    if (seen[start]) continue;
    std::vector<int> block, stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      block.push_back(v);
      for (int w : c.interior)
        if (!seen[w] && g.edge(v, w)) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    std::sort(block.begin(), block.end());
    c.components.push_back(std::move(block));
  }
  std::sort(c.components.begin(), c.components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (int j = 0; j < static_cast<int>(c.components.size()); ++j)
    for (int v : c.components[j]) c.component_of[v] = j;
  return c;
}

}  // namespace incap
