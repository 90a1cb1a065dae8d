#ifndef INCAP_TEST_FLOW_HPP
#define INCAP_TEST_FLOW_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "incap/config_space.hpp"
#include "incap/contraction.hpp"
#include "incap/ladder.hpp"
#include "incap/measure.hpp"

namespace incap {

// Antisymmetric flow on particle configurations, keyed by the source
// occupation and the jumping particle's (from, to) sites. Works on raw
// occupation vectors so flows can be assembled without enumerating the space.
class ConfigFlow {
 public:
  explicit ConfigFlow(int n_sites) : n_sites_(n_sites) {}

  void add(const Occupation& source, int from, int to, double value);
  double get(const Occupation& source, int from, int to) const;
  void merge(const ConfigFlow& other);
  std::size_t edge_count() const { return values_.size(); }
  double max_abs() const;

  // fn(source, from, to, value); each undirected edge visited once.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    Occupation occ(n_sites_);
    for (const auto& [key, value] : values_) {
      decode(key, occ);
      fn(occ, static_cast<int>(static_cast<unsigned char>(key[2 * n_sites_])),
         static_cast<int>(static_cast<unsigned char>(key[2 * n_sites_ + 1])), value);
    }
  }

  // Net outflow per touched configuration (all other configurations have
  // zero divergence trivially).
  std::vector<std::pair<Occupation, double>> divergences() const;

 private:
  std::string encode(const Occupation& occ, int from, int to) const;
  void decode(const std::string& key, Occupation& occ) const;
  int n_sites_;
  std::unordered_map<std::string, double> values_;
};

struct TestFlow {
  ConfigFlow flow;
  int depth = 0;
  std::vector<int> site_path;  // x ... y used by the edge corrections
  double source_value = 0.0;   // divergence at the all-at-x configuration
};

// Unit-leakage test flow at truncation `sol.depth`; needs N >= 4 depth - 1 so
// the bulk, correction and edge zones fit. Interior divergence vanishes
// identically (up to roundoff) by construction.
TestFlow build_test_flow(const SiteGraph& g, const ContractedGraph& c,
                         const ResolventSolution& sol, int n_particles);

double flow_norm_sq(const ConfigSpace& cs, const MeasureTable& mt, const ConfigFlow& flow);

struct FlowBound {
  double norm_sq = 0.0;
  double bound = 0.0;  // (source value)^2 / norm^2, a capacity lower bound
};

FlowBound flow_norm_and_bound(const ConfigSpace& cs, const MeasureTable& mt,
                              const TestFlow& flow);

struct DivergenceScan {
  double worst_interior = 0.0;  // absolute, relative to max |flow|
  Occupation worst_config;
  double source = 0.0, sink = 0.0;
};

DivergenceScan scan_divergence(const ConfigFlow& flow, const Occupation& source,
                               const Occupation& sink);

// Consecutive-particle unit flows used for crude lower bounds and for
// redirecting leftover divergence in point-to-set estimates.
ConfigFlow path_flow_direct(const SiteGraph& g, int x, int y, int n_particles);
ConfigFlow path_flow_via(const SiteGraph& g, int x, int mid, int y, int n_particles);

// Adds consecutive-particle flows from the designated source so that the
// divergence at every other listed configuration-site cancels; the flow then
// runs from the source alone. Sites must be reachable in at most two steps.
void redirect_divergence(ConfigFlow& flow, const SiteGraph& g, int n_particles, int x,
                         const std::vector<int>& others);

}  // namespace incap

#endif
