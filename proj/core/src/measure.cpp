#include "incap/measure.hpp"

#include <cmath>
#include <random>

#include "incap/numeric.hpp"

namespace incap {

double log_occupation_weight(double d_n, int n) {
  return std::lgamma(d_n + n) - std::lgamma(double(n) + 1.0) - std::lgamma(d_n);
}

double log_weight_of(const SiteGraph& g, double d_n, const Occupation& occ) {
  double lw = 0.0;
  for (int v = 0; v < g.size(); ++v) {
    if (occ[v] == 0) continue;
    lw += log_occupation_weight(d_n, occ[v]) + occ[v] * std::log(g.measure(v));
  }
  return lw;
}

double MeasureTable::prob(Index idx) const { return std::exp(log_prob(idx)); }

MeasureTable stationary_measure(const ConfigSpace& cs) {
  MeasureTable mt;
  int n = cs.n_particles();
  mt.log_w.resize(n + 1);
  for (int k = 0; k <= n; ++k) mt.log_w[k] = log_occupation_weight(cs.d_n(), k);

  const SiteGraph& g = cs.graph();
  std::vector<double> log_m(g.size());
  for (int v = 0; v < g.size(); ++v) log_m[v] = std::log(g.measure(v));

  mt.log_weights.resize(cs.size());
  LogSumAccumulator z;
  Occupation occ;
  for (Index i = 0; i < cs.size(); ++i) {
    cs.unrank_into(i, occ);
    double lw = 0.0;
    for (int v = 0; v < g.size(); ++v)
      if (occ[v] > 0) lw += mt.log_w[occ[v]] + occ[v] * log_m[v];
    mt.log_weights[i] = lw;
    z.add(lw);
  }
  mt.log_z = z.value();
  return mt;
}

CondensationProfile condensation_profile(const ConfigSpace& cs, const MeasureTable& mt,
                                         const MetastableHierarchy& h) {
  CondensationProfile profile;
  double total = 0.0;
  Occupation occ(cs.graph().size(), 0);
  for (int x : h.s_star) {
    std::fill(occ.begin(), occ.end(), 0);
    occ[x] = cs.n_particles();
    double p = mt.prob(cs.rank(occ));
    profile.mass[x] = p;
    total += p;
  }
  profile.remainder = 1.0 - total;
  return profile;
}

double reversibility_residual(const ConfigSpace& cs, const MeasureTable& mt, int samples,
                              unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, cs.size() - 1);
  double worst = 0.0;
  Occupation occ;
  for (int s = 0; s < samples; ++s) {
    Index i = pick(rng);
    cs.unrank_into(i, occ);
    cs.for_each_move(occ, [&](const ConfigSpace::Move& mv, const Occupation& target) {
      double forward = mt.log_weights[i] + std::log(mv.rate);
      double back = mt.log_weights[mv.target] + std::log(cs.move_rate(target, mv.to, mv.from));
      double scale = std::max(std::abs(forward), std::abs(back));
      worst = std::max(worst, std::abs(forward - back) / std::max(1.0, scale));
    });
  }
  return worst;
}

}  // namespace incap
