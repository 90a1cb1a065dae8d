#include "incap/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "incap/errors.hpp"
#include "incap/numeric.hpp"

namespace incap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Connected components of an undirected adjacency relation on `members`,
// ordered by minimal member; members sorted.
std::vector<std::vector<int>> components_of(const std::vector<int>& members,
                                            const std::function<bool(int, int)>& adjacent) {
  std::vector<std::vector<int>> blocks;
  std::vector<char> seen(members.size(), 0);
  for (size_t s = 0; s < members.size(); ++s) {
    if (seen[s]) continue;
    std::vector<int> block;
    std::vector<size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      size_t v = stack.back();
      stack.pop_back();
      block.push_back(members[v]);
      for (size_t w = 0; w < members.size(); ++w)
        if (!seen[w] && adjacent(members[v], members[w])) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    std::sort(block.begin(), block.end());
    blocks.push_back(std::move(block));
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return blocks;
}

}  // namespace

double compute_rij(const SiteGraph& g, const std::vector<int>& block_i,
                   const std::vector<int>& block_j, double abs_tol) {
  // Collect connecting triples (x, a, y) with positive rates on both legs.
  struct Triple {
    double inv_rxa, inv_rya, one_minus_ma;
  };
  std::vector<Triple> triples;
  for (int x : block_i)
    for (int y : block_j)
      for (int a = 0; a < g.size(); ++a) {
        if (g.measure(a) >= 1.0 - 1e-12) continue;  // a must be non-condensing
        if (g.rates(x, a) > 0.0 && g.rates(y, a) > 0.0)
          triples.push_back({1.0 / g.rates(x, a), 1.0 / g.rates(y, a), 1.0 - g.measure(a)});
      }
  if (triples.empty()) return kInf;

  auto integrand = [&](double t) {
    double agg = 0.0;
    for (const auto& tr : triples)
      agg += 1.0 / (tr.one_minus_ma * ((1.0 - t) * tr.inv_rxa + t * tr.inv_rya));
    return 1.0 / agg;
  };
  return adaptive_simpson(integrand, 0.0, 1.0, abs_tol, 40);
}

MetastableHierarchy metastable_hierarchy(const SiteGraph& g) {
  MetastableHierarchy h;
  int n = g.size();
  for (int i = 0; i < n; ++i) {
    if (g.measure(i) >= 1.0 - 1e-12)
      h.s_star.push_back(i);
    else {
      h.s_zero.push_back(i);
      if (g.measure(i) >= 1.0 - 1e-6) h.near_degenerate.push_back(i);
    }
  }
  if (!h.s_zero.empty()) {
    h.m_star = 0.0;
    h.m_star_star = 1.0;
    for (int a : h.s_zero) {
      h.m_star = std::max(h.m_star, g.measure(a));
      h.m_star_star = std::min(h.m_star_star, g.measure(a));
    }
  }

  h.level2 = components_of(h.s_star, [&](int v, int w) { return g.edge(v, w); });
  int k2 = h.kappa2();

  h.rij = Eigen::MatrixXd::Constant(k2, k2, kInf);
  h.r2nd = Eigen::MatrixXd::Zero(k2, k2);
  for (int i = 0; i < k2; ++i) {
    h.rij(i, i) = kInf;
    for (int j = i + 1; j < k2; ++j) {
      double r = compute_rij(g, h.level2[i], h.level2[j]);
      h.rij(i, j) = r;
      h.rij(j, i) = r;
      if (std::isfinite(r)) {
        h.r2nd(i, j) = 1.0 / (static_cast<double>(h.level2[i].size()) * r);
        h.r2nd(j, i) = 1.0 / (static_cast<double>(h.level2[j].size()) * r);
      }
    }
  }

  // Level 3: merge level2 blocks with finite pair resistance, transitively.
  std::vector<int> block_ids(k2);
  std::iota(block_ids.begin(), block_ids.end(), 0);
  auto merged = components_of(block_ids, [&](int i, int j) { return std::isfinite(h.rij(i, j)); });
  for (const auto& group : merged) {
    std::vector<int> sites;
    for (int b : group) sites.insert(sites.end(), h.level2[b].begin(), h.level2[b].end());
    std::sort(sites.begin(), sites.end());
    h.level3.push_back(std::move(sites));
  }
  std::sort(h.level3.begin(), h.level3.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  h.level2_of.assign(n, -1);
  h.level3_of.assign(n, -1);
  for (int b = 0; b < k2; ++b)
    for (int v : h.level2[b]) h.level2_of[v] = b;
  for (int b = 0; b < h.kappa3(); ++b)
    for (int v : h.level3[b]) h.level3_of[v] = b;
  return h;
}

}  // namespace incap
