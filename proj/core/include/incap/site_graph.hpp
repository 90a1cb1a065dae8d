#ifndef INCAP_SITE_GRAPH_HPP
#define INCAP_SITE_GRAPH_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace incap {

// Finite reversible random-walk geometry: sites, jump rates r(x,y) and the
// max-normalized stationary measure m of the single-particle walk.
// Immutable after construction.
struct SiteGraph {
  std::vector<std::string> names;
  Eigen::MatrixXd rates;        // r(i,j) >= 0, zero diagonal
  Eigen::VectorXd measure;      // m_i in (0,1], max_i m_i == 1
  Eigen::MatrixXd conductance;  // c(i,j) = m_i r(i,j) = c(j,i)

  int size() const { return static_cast<int>(names.size()); }
  bool edge(int i, int j) const { return rates(i, j) > 0.0; }
  int index_of(const std::string& name) const;  // throws ParseError when unknown

  // BFS graph distance on the undirected positive-rate graph.
  int distance(int i, int j) const;
  std::vector<int> neighbors(int i) const;
};

using RateTriple = std::tuple<std::string, std::string, double>;

// Builds the geometry from named rates. When `measure` is absent the
// stationary measure of the walk is computed by a direct linear solve of the
// balance equations; when present it is validated against detailed balance
// (1e-10 relative). Throws NotIrreducible / NotReversible.
SiteGraph build_site_graph(const std::vector<std::string>& sites,
                           const std::vector<RateTriple>& rates,
                           const std::optional<std::vector<std::pair<std::string, double>>>&
                               measure = std::nullopt);

// Largest stationarity defect sum_x [m_x r(x,y) - m_y r(y,x)] over sites,
// exposed as a diagnostic.
double balance_residual(const SiteGraph& g);

}  // namespace incap

#endif
