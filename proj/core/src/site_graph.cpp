#include "incap/site_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "incap/errors.hpp"
#include "incap/numeric.hpp"

namespace incap {

int SiteGraph::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (names[i] == name) return i;
  throw ParseError("unknown site name: " + name);
}

std::vector<int> SiteGraph::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < size(); ++j)
    if (j != i && edge(i, j)) out.push_back(j);
  return out;
}

int SiteGraph::distance(int i, int j) const {
  if (i == j) return 0;
  std::vector<int> dist(size(), -1);
  std::deque<int> queue{i};
  dist[i] = 0;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        if (w == j) return dist[w];
        queue.push_back(w);
      }
    }
  }
  return -1;  // unreachable; cannot happen on a validated graph
}

namespace {

bool strongly_connected(const Eigen::MatrixXd& rates) {
  int n = static_cast<int>(rates.rows());
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (int w = 0; w < n; ++w) {
        double r = forward ? rates(v, w) : rates(w, v);
        if (r > 0.0 && !seen[w]) {
          seen[w] = 1;
          ++count;
          queue.push_back(w);
        }
      }
    }
    return count == n;
  };
  return reach(true) && reach(false);
}

Eigen::VectorXd solve_stationary(const Eigen::MatrixXd& rates) {
  // pi Q = 0 with Q(i,j) = r(i,j), Q(i,i) = -sum_j r(i,j); replace the last
  // equation by the normalization row. Site counts are small, so a dense
  // solve is exact enough.
  int n = static_cast<int>(rates.rows());
  Eigen::MatrixXd q = rates;
  for (int i = 0; i < n; ++i) q(i, i) = -rates.row(i).sum();
  Eigen::MatrixXd a = q.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);
  return pi;
}

}  // namespace

SiteGraph build_site_graph(
    const std::vector<std::string>& sites, const std::vector<RateTriple>& rates,
    const std::optional<std::vector<std::pair<std::string, double>>>& measure) {
  if (sites.empty()) throw ParseError("site list is empty");
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(sites.size()); ++i) {
    if (!index.emplace(sites[i], i).second) throw ParseError("duplicate site name: " + sites[i]);
  }
  int n = static_cast<int>(sites.size());

  SiteGraph g;
  g.names = sites;
  g.rates = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [from, to, r] : rates) {
    auto fi = index.find(from);
    auto ti = index.find(to);
    if (fi == index.end()) throw ParseError("rate references unknown site: " + from);
    if (ti == index.end()) throw ParseError("rate references unknown site: " + to);
    if (fi->second == ti->second) throw ParseError("self-rate on site: " + from);
    if (r < 0.0) throw ParseError("negative rate on edge " + from + "->" + to);
    g.rates(fi->second, ti->second) = r;
  }

  // Reversibility forces symmetric support; check before connectivity so the
  // error message points at the actual defect.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((g.rates(i, j) > 0.0) != (g.rates(j, i) > 0.0))
        throw NotReversible("one-directional rate between " + sites[i] + " and " + sites[j]);

  if (!strongly_connected(g.rates))
    throw NotIrreducible("positive-rate graph is not strongly connected");

  if (measure) {
    Eigen::VectorXd m = Eigen::VectorXd::Constant(n, -1.0);
    for (const auto& [name, value] : *measure) {
      auto it = index.find(name);
      if (it == index.end()) throw ParseError("measure references unknown site: " + name);
      if (value <= 0.0) throw ParseError("non-positive measure at site " + name);
      m(it->second) = value;
    }
    if ((m.array() <= 0.0).any()) throw ParseError("measure missing for some sites");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double lhs = m(i) * g.rates(i, j), rhs = m(j) * g.rates(j, i);
        if (rel_diff(lhs, rhs) > 1e-10)
          throw NotReversible("detailed balance fails on edge " + sites[i] + "--" + sites[j]);
      }
    g.measure = m / m.maxCoeff();
  } else {
    Eigen::VectorXd pi = solve_stationary(g.rates);
    if ((pi.array() <= 0.0).any())
      throw NotIrreducible("stationary solve produced a non-positive weight");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rel_diff(pi(i) * g.rates(i, j), pi(j) * g.rates(j, i)) > 1e-10)
          throw NotReversible("rates are not reversible (detailed balance fails on " + sites[i] +
                              "--" + sites[j] + ")");
    g.measure = pi / pi.maxCoeff();
  }

  g.conductance = g.measure.asDiagonal() * g.rates;
  // Symmetrize exactly so downstream identities see c_xy == c_yx bit for bit.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double c = 0.5 * (g.conductance(i, j) + g.conductance(j, i));
      g.conductance(i, j) = c;
      g.conductance(j, i) = c;
    }
  return g;
}

double balance_residual(const SiteGraph& g) {
  int n = g.size();
  double worst = 0.0;
  for (int y = 0; y < n; ++y) {
    double net = 0.0;
    for (int x = 0; x < n; ++x) net += g.measure(x) * g.rates(x, y) - g.measure(y) * g.rates(y, x);
    worst = std::max(worst, std::abs(net));
  }
  return worst;
}

}  // namespace incap
