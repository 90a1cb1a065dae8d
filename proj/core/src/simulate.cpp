#include "incap/simulate.hpp"

#include <cmath>

#include "incap/errors.hpp"
#include "incap/potential.hpp"
#include "incap/sandwich.hpp"

namespace incap {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Per-replica deterministic stream; scheduling-independent by construction.
struct Stream {
  std::uint64_t s;
  explicit Stream(std::uint64_t seed, std::uint64_t replica)
      : s(splitmix64(splitmix64(seed) ^ splitmix64(replica * 0x9e3779b97f4a7c15ull + 1))) {}
  std::uint64_t next() {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }  // [0, 1)
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
};

struct Walker {
  const ConfigSpace& cs;
  const SiteGraph& g;
  Occupation occ;
  double time = 0.0;
  std::uint64_t events = 0;

  Walker(const ConfigSpace& cs, Index start) : cs(cs), g(cs.graph()), occ(cs.unrank(start)) {}

  // One exact-clock step; returns false when no move is possible (cannot
  // happen on an irreducible geometry with N >= 1).
  bool step(Stream& rng, std::uint64_t max_events) {
    const auto& edges = cs.directed_edges();
    double total = 0.0;
    for (const auto& [from, to, r] : edges)
      if (occ[from] > 0) total += occ[from] * (cs.d_n() + occ[to]) * r;
    if (total <= 0.0) return false;
    time += rng.exponential(total);
    double u = rng.uniform() * total;
    double running = 0.0;
    int pick = -1;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto& [from, to, r] = edges[e];
      if (occ[from] == 0) continue;
      pick = static_cast<int>(e);  // roundoff fallback: last eligible move
      running += occ[from] * (cs.d_n() + occ[to]) * r;
      if (u < running) break;
    }
    occ[std::get<0>(edges[pick])] -= 1;
    occ[std::get<1>(edges[pick])] += 1;
    if (++events > max_events) throw EventCapExceeded("event cap exceeded in simulation");
    return true;
  }
};

}  // namespace

HittingSample simulate_until(const ConfigSpace& cs, Index start, const std::vector<Index>& targets,
                             const SimConfig& cfg) {
  if (targets.empty()) throw Error("target set is empty");
  if (cfg.replicas < 1) throw Error("replica count must be >= 1");
  std::vector<Occupation> target_occ;
  target_occ.reserve(targets.size());
  for (Index t : targets) target_occ.push_back(cs.unrank(t));
  auto hit = [&](const Occupation& occ) {
    for (const auto& t : target_occ)
      if (t == occ) return true;
    return false;
  };

  HittingSample sample;
  sample.times.reserve(cfg.replicas);
  for (int r = 0; r < cfg.replicas; ++r) {
    Stream rng(cfg.seed, static_cast<std::uint64_t>(r));
    Walker walker(cs, start);
    while (!hit(walker.occ)) {
      if (!walker.step(rng, cfg.max_events)) break;
    }
    sample.times.push_back(walker.time);
  }

  double sum = 0.0;
  for (double t : sample.times) sum += t;
  sample.mean = sum / cfg.replicas;
  if (cfg.replicas > 1) {
    double ss = 0.0;
    for (double t : sample.times) ss += (t - sample.mean) * (t - sample.mean);
    sample.stderr_ = std::sqrt(ss / (cfg.replicas - 1)) / std::sqrt(double(cfg.replicas));
  }
  return sample;
}

MagicComparison empirical_vs_magic(const ConfigSpace& cs, const MeasureTable& mt, Index start,
                                   const std::vector<Index>& targets, const SimConfig& cfg) {
  MagicComparison cmp;
  ReversibleChain chain = chain_from(cs, mt);
  std::vector<int> b;
  for (Index t : targets) b.push_back(static_cast<int>(t));
  cmp.exact = mean_hitting_time(chain, static_cast<int>(start), b);

  HittingSample sample = simulate_until(cs, start, targets, cfg);
  cmp.sim_mean = sample.mean;
  cmp.sim_stderr = sample.stderr_;
  cmp.pass = std::abs(cmp.sim_mean - cmp.exact) <= 3.0 * cmp.sim_stderr;
  return cmp;
}

CensusResult timescale_census(const ConfigSpace& cs, const MetastableHierarchy& h, Index start,
                              double probe_time, double occupation_window, const SimConfig& cfg) {
  CensusResult census;
  auto condensed_site = [&](const Occupation& occ) {
    for (int xs : h.s_star)
      if (occ[xs] == cs.n_particles()) return xs;
    return -1;
  };

  double horizon = std::max(probe_time, std::max(occupation_window, 0.0));
  double outside_total = 0.0;
  std::map<int, int> counts;
  for (int r = 0; r < cfg.replicas; ++r) {
    Stream rng(cfg.seed, static_cast<std::uint64_t>(r));
    Walker walker(cs, start);
    bool recorded = false;
    double outside = 0.0;
    while (walker.time < horizon) {
      double before = walker.time;
      Occupation snapshot = walker.occ;
      if (!walker.step(rng, cfg.max_events)) {
        walker.time = horizon;
      }
      double after = std::min(walker.time, horizon);
      if (!recorded && walker.time >= probe_time) {
        counts[condensed_site(snapshot)] += 1;
        recorded = true;
      }
      if (occupation_window > 0.0 && condensed_site(snapshot) < 0) {
        double lo = std::min(before, occupation_window);
        double hi = std::min(after, occupation_window);
        outside += std::max(0.0, hi - lo);
      }
    }
    if (!recorded) counts[condensed_site(walker.occ)] += 1;
    outside_total += outside;
  }
  for (const auto& [site, n] : counts)
    census.projected[site] = static_cast<double>(n) / cfg.replicas;
  if (occupation_window > 0.0)
    census.outside_fraction = outside_total / (occupation_window * cfg.replicas);
  return census;
}

}  // namespace incap
