#ifndef INCAP_SIMULATE_HPP
#define INCAP_SIMULATE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "incap/config_space.hpp"
#include "incap/hierarchy.hpp"
#include "incap/measure.hpp"

namespace incap {

struct SimConfig {
  std::uint64_t seed = 20240101;
  int replicas = 1;
  std::uint64_t max_events = 1'000'000'000;  // per replica
};

struct HittingSample {
  std::vector<double> times;  // per replica, in model time units
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std over sqrt(replicas)
  std::optional<double> exact_reference;
};

// Exact-clock continuous-time simulation until the target set is hit.
// Replica r draws from an independent stream keyed by (seed, r), so results
// do not depend on scheduling. Throws EventCapExceeded.
HittingSample simulate_until(const ConfigSpace& cs, Index start,
                             const std::vector<Index>& targets, const SimConfig& cfg);

struct MagicComparison {
  double sim_mean = 0.0, sim_stderr = 0.0, exact = 0.0;
  bool pass = false;  // |mean - exact| <= 3 stderr
};

// Empirical mean hitting time against the exact capacity identity.
MagicComparison empirical_vs_magic(const ConfigSpace& cs, const MeasureTable& mt, Index start,
                                   const std::vector<Index>& targets, const SimConfig& cfg);

struct CensusResult {
  // Law of the projected state at the probe time: keys are condensing sites,
  // -1 collects everything not fully condensed.
  std::map<int, double> projected;
  // Fraction of [0, window] spent outside the condensed states (averaged over
  // replicas); negative when no window was requested.
  double outside_fraction = -1.0;
};

CensusResult timescale_census(const ConfigSpace& cs, const MetastableHierarchy& h, Index start,
                              double probe_time, double occupation_window, const SimConfig& cfg);

}  // namespace incap

#endif
