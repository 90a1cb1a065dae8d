#ifndef INCAP_CONFIG_SPACE_HPP
#define INCAP_CONFIG_SPACE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "incap/site_graph.hpp"

namespace incap {

using Index = std::int64_t;
using Occupation = std::vector<int>;  // particle count per site, sums to N

// Enumerated N-particle configuration space over a site geometry, indexed in
// colexicographic order of the occupation vector. Moves are generated on the
// fly from the geometry; an explicit adjacency table can be materialized for
// simulation-heavy workloads.
class ConfigSpace {
 public:
  struct Move {
    Index target;
    double rate;
    int from, to;  // sites of the jumping particle
  };

  static ConfigSpace enumerate(const SiteGraph& g, int n_particles, double d_n,
                               Index memory_budget = 5'000'000);

  const SiteGraph& graph() const { return *graph_; }
  int n_particles() const { return n_; }
  double d_n() const { return d_; }
  Index size() const { return size_; }

  Index rank(const Occupation& occ) const;
  Occupation unrank(Index idx) const;
  void unrank_into(Index idx, Occupation& occ) const;

  // Jump rate from occupation `occ` for the particle move from->to:
  // occ[from] * (d_N + occ[to]) * r(from, to).
  double move_rate(const Occupation& occ, int from, int to) const;

  // Visits every positive-rate move out of the configuration.
  template <typename Fn>
  void for_each_move(const Occupation& occ, Fn&& fn) const {
    Occupation target = occ;
    for (const auto& [from, to, r] : directed_edges_) {
      if (occ[from] == 0) continue;
      double rate = static_cast<double>(occ[from]) * (d_ + occ[to]) * r;
      target[from] -= 1;
      target[to] += 1;
      fn(Move{rank(target), rate, from, to}, target);
      target[from] += 1;
      target[to] -= 1;
    }
  }

  const std::vector<std::tuple<int, int, double>>& directed_edges() const {
    return directed_edges_;
  }

 private:
  const SiteGraph* graph_ = nullptr;
  int n_ = 0;
  double d_ = 0.0;
  Index size_ = 0;
  std::vector<std::tuple<int, int, double>> directed_edges_;  // (from, to, r)
  std::vector<std::vector<std::uint64_t>> binom_;             // suffix-sum ranking table
};

// C(n+k-1, k-1) as a checked 64-bit value; throws SpaceTooLarge past 2^62.
std::uint64_t composition_count(int n, int k);

}  // namespace incap

#endif
