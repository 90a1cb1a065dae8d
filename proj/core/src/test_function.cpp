#include "incap/test_function.hpp"

#include <cmath>

#include "incap/errors.hpp"
#include "incap/numeric.hpp"

namespace incap {

int pick_interface_width(int n_particles, double d_n) {
  int cap = 2 * ((n_particles - 2) / 4);  // largest even width with a non-empty profile
  if (cap < 2) throw Error("particle count too small for the interpolation profile (N < 6)");
  double lg = d_n < 1.0 ? std::log(1.0 / d_n) : 0.0;
  int raw = 2 * static_cast<int>(std::floor(std::sqrt(n_particles * lg)));
  return std::min(std::max(raw, 2), cap);
}

TestFunction::TestFunction(const SiteGraph& g, const ContractedGraph& c,
                           const ResolventSolution& sol, int n_particles, double d_n,
                           int n_prime_override)
    : g_(&g), c_(&c), sol_(&sol), n_(n_particles) {
  if (sol.depth < n_particles)
    throw Error("resolvent depth must cover every slice level up to N");
  n_prime_ = n_prime_override > 0 ? n_prime_override : pick_interface_width(n_particles, d_n);
  if (n_prime_ % 2 != 0 || n_prime_ < 2 || n_prime_ + 1 > n_ - n_prime_)
    throw Error("interface width must be even with a non-empty profile window");
  profile_.assign(n_ + 1, 0.0);
  for (int t = n_prime_ + 1; t <= n_ - n_prime_; ++t)
    profile_[t] = profile_[t - 1] + static_cast<double>(n_ - t) * t;
  for (int t = n_ - n_prime_ + 1; t <= n_; ++t) profile_[t] = profile_[t - 1];
  normalizer_ = profile_[n_ - n_prime_];

  in_nx_.assign(g.size(), 0);
  far_.assign(g.size(), 0);
  for (int a : c.nx) in_nx_[a] = 1;
  for (int v : c.interior) far_[v] = 1;
}

int TestFunction::aggregated_near_x(const Occupation& occ) const {
  int bx = occ[c_->x];
  for (int a : c_->nx) bx += occ[a];
  return bx;
}

double TestFunction::operator()(const Occupation& occ) const {
  int bx = aggregated_near_x(occ);
  if (bx >= n_ - n_prime_ + 1) return 1.0;
  if (bx <= n_prime_ - 1) return 0.0;

  int far_count = 0, fa = -1, fb = -1;
  for (int v = 0; v < g_->size(); ++v) {
    if (!far_[v] || occ[v] == 0) continue;
    if (far_count == 0)
      fa = v;
    else if (far_count == 1)
      fb = v;
    ++far_count;
  }

  double correction = 0.0;
  if (far_count == 1) {
    correction = sol_->component_of(fa, *c_).ghat_single(fa, occ[fa]);
  } else if (far_count == 2 && c_->component_of[fa] == c_->component_of[fb] &&
             g_->edge(fa, fb)) {
    correction =
        sol_->component_of(fa, *c_).ghat_split(fa, fb, occ[fa], occ[fa] + occ[fb]);
  }
  // Three or more occupied far sites (or a disconnected far pair) fall back to
  // the pure profile of the aggregated count.
  return (profile_[bx] + static_cast<double>(n_ - bx) * bx * correction) / normalizer_;
}

DirichletBreakdown dirichlet_of_test_function(const ConfigSpace& cs, const MeasureTable& mt,
                                              const TestFunction& f) {
  const SiteGraph& g = cs.graph();
  // Site classes for bucketting edges.
  std::vector<int> cls(g.size(), 0);  // 0 condensing, 1 near-x, 2 near-y, 3 far
  struct Buckets {
    LogSumAccumulator t1, t2, t3, t4, t5, t6, mixing, remainder, total;
  } acc;

  // Cache values and per-state F, then stream over directed edges; each
  // unordered pair is visited twice, so halve at the end.
  std::vector<double> values(cs.size());
  Occupation occ;
  for (Index i = 0; i < cs.size(); ++i) {
    cs.unrank_into(i, occ);
    values[i] = f(occ);
  }

  // Classification masks come from the contracted geometry used by f.
  // Rebuild them locally from measure and adjacency.
  {
    int x = -1, y = -1;
    double best = -1.0;
    for (int v = 0; v < g.size(); ++v)
      if (g.measure(v) >= 1.0 - 1e-12) {
        if (x < 0)
          x = v;
        else
          y = v;
        best = std::max(best, g.measure(v));
      }
    for (int v = 0; v < g.size(); ++v) {
      if (g.measure(v) >= 1.0 - 1e-12) continue;
      bool nx = g.edge(x, v), ny = y >= 0 && g.edge(y, v);
      cls[v] = nx ? 1 : (ny ? 2 : 3);
    }
  }

  // Fitted constant in the edge-difference bound |dF| <= C/(N lambda^s);
  // any legal lambda works, so use the geometry default.
  double log_lambda_fit = std::log(default_lambda(g));
  double worst_fit = 0.0;

  Occupation target;
  for (Index i = 0; i < cs.size(); ++i) {
    cs.unrank_into(i, occ);
    int s0_here = 0;
    for (int v = 0; v < g.size(); ++v)
      if (cls[v] != 0 && occ[v] > 0) ++s0_here;
    cs.for_each_move(occ, [&](const ConfigSpace::Move& mv, const Occupation& tgt) {
      double df = values[mv.target] - values[i];
      if (df == 0.0) {
        // still classify zero edges for the fitted constant (contribution 0)
        return;
      }
      double log_term = mt.log_weights[i] - mt.log_z + std::log(mv.rate) +
                        2.0 * std::log(std::abs(df));
      acc.total.add(log_term);

      int s0_union = 0, nx_cnt = 0, ny_cnt = 0, far_cnt = 0, s0_there = 0;
      for (int v = 0; v < g.size(); ++v) {
        if (cls[v] == 0) continue;
        bool occupied_union = occ[v] > 0 || tgt[v] > 0;
        if (tgt[v] > 0) ++s0_there;
        if (!occupied_union) continue;
        ++s0_union;
        if (cls[v] == 1) ++nx_cnt;
        if (cls[v] == 2) ++ny_cnt;
        if (cls[v] == 3) ++far_cnt;
      }
      if (s0_here >= 3 || s0_there >= 3)
        acc.remainder.add(log_term);
      else if (s0_union >= 3)
        acc.mixing.add(log_term);
      else if (far_cnt == 0) {
        if (ny_cnt == 0)
          acc.t1.add(log_term);
        else if (nx_cnt == 0)
          acc.t2.add(log_term);
        else
          acc.t3.add(log_term);
      } else if (far_cnt == 1 && nx_cnt >= 1)
        acc.t4.add(log_term);
      else if (far_cnt == 1 && ny_cnt >= 1)
        acc.t5.add(log_term);
      else
        acc.t6.add(log_term);

      int s_here = 0, s_there = 0;
      for (int v = 0; v < g.size(); ++v)
        if (cls[v] != 0) {
          s_here += occ[v];
          s_there += tgt[v];
        }
      double fit =
          std::abs(df) * cs.n_particles() * std::exp(std::max(s_here, s_there) * log_lambda_fit);
      worst_fit = std::max(worst_fit, fit);
    });
  }

  auto half = [](const LogSumAccumulator& a) {
    double lv = a.value();
    return std::isfinite(lv) ? 0.5 * std::exp(lv) : 0.0;
  };
  DirichletBreakdown out;
  out.total = half(acc.total);
  out.t1 = half(acc.t1);
  out.t2 = half(acc.t2);
  out.t3 = half(acc.t3);
  out.t4 = half(acc.t4);
  out.t5 = half(acc.t5);
  out.t6 = half(acc.t6);
  out.mixing = half(acc.mixing);
  out.remainder = half(acc.remainder);
  out.diff_bound_constant = worst_fit;
  return out;
}

}  // namespace incap
