#ifndef INCAP_MEASURE_HPP
#define INCAP_MEASURE_HPP

#include <map>
#include <vector>

#include "incap/config_space.hpp"
#include "incap/hierarchy.hpp"

namespace incap {

// Log-domain product stationary measure of the particle system. Raw weights
// underflow (site factors decay geometrically in the particle count), so
// everything is kept as logarithms until a normalized probability is needed.
struct MeasureTable {
  std::vector<double> log_w;        // log w(n) for n in [0, N]
  std::vector<double> log_weights;  // per configuration, unnormalized
  double log_z = 0.0;

  double log_prob(Index idx) const { return log_weights[idx] - log_z; }
  double prob(Index idx) const;
};

MeasureTable stationary_measure(const ConfigSpace& cs);

// log w(n) = lgamma(d+n) - lgamma(n+1) - lgamma(d), standalone for oracles.
double log_occupation_weight(double d_n, int n);

// Unnormalized log weight of an arbitrary occupation vector (no enumeration).
double log_weight_of(const SiteGraph& g, double d_n, const Occupation& occ);

struct CondensationProfile {
  std::map<int, double> mass;  // condensed-state probability per condensing site
  double remainder = 0.0;      // probability outside all condensed states
};

CondensationProfile condensation_profile(const ConfigSpace& cs, const MeasureTable& mt,
                                         const MetastableHierarchy& h);

// Largest log-domain detailed-balance defect over `samples` random positive-
// rate edges; used as a self-check after construction.
double reversibility_residual(const ConfigSpace& cs, const MeasureTable& mt,
                              int samples = 1000, unsigned long long seed = 12345);

}  // namespace incap

#endif
