#include "incap/config_space.hpp"

#include <limits>

#include "incap/errors.hpp"

namespace incap {

namespace {
constexpr std::uint64_t kCap = std::uint64_t(1) << 62;

// C(a, j) table column for fixed j, saturating at kCap.
std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a + b;
  return (s < a || s >= kCap) ? kCap : s;
}
}  // namespace

std::uint64_t composition_count(int n, int k) {
  // C(n+k-1, k-1) by the additive recurrence, saturating.
  if (k <= 0) return 0;
  std::vector<std::uint64_t> row(static_cast<size_t>(n) + 1, 1);  // k = 1
  for (int parts = 2; parts <= k; ++parts)
    for (int t = 1; t <= n; ++t) row[t] = sat_add(row[t], row[t - 1]);
  if (row[n] >= kCap) throw SpaceTooLarge("configuration count exceeds 2^62", row[n]);
  return row[n];
}

ConfigSpace ConfigSpace::enumerate(const SiteGraph& g, int n_particles, double d_n,
                                   Index memory_budget) {
  if (n_particles < 1) throw Error("particle count must be >= 1");
  if (!(d_n > 0.0)) throw Error("diffusion parameter must be > 0");
  std::uint64_t count = composition_count(n_particles, g.size());
  if (count > static_cast<std::uint64_t>(memory_budget))
    throw SpaceTooLarge("configuration space has " + std::to_string(count) +
                            " states, over the budget of " + std::to_string(memory_budget),
                        count);

  ConfigSpace cs;
  cs.graph_ = &g;
  cs.n_ = n_particles;
  cs.d_ = d_n;
  cs.size_ = static_cast<Index>(count);
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j)
      if (i != j && g.rates(i, j) > 0.0) cs.directed_edges_.emplace_back(i, j, g.rates(i, j));

  // binom_[j][a] = C(a, j) for a in [0, N + S], j in [0, S-1].
  int s = g.size();
  int amax = n_particles + s + 1;
  cs.binom_.assign(s, std::vector<std::uint64_t>(static_cast<size_t>(amax) + 1, 0));
  for (int a = 0; a <= amax; ++a) cs.binom_[0][a] = 1;
  for (int j = 1; j < s; ++j)
    for (int a = 1; a <= amax; ++a)
      cs.binom_[j][a] = sat_add(cs.binom_[j][a - 1], cs.binom_[j - 1][a - 1]);
  return cs;
}

Index ConfigSpace::rank(const Occupation& occ) const {
  // Colex rank via prefix sums: sum_j [C(T_j + j, j) - C(T_{j-1} + j, j)].
  int s = graph_->size();
  std::uint64_t r = 0;
  int prefix = occ[0];
  for (int j = 1; j < s; ++j) {
    int tj = prefix + occ[j];
    r += binom_[j][tj + j] - binom_[j][prefix + j];
    prefix = tj;
  }
  return static_cast<Index>(r);
}

void ConfigSpace::unrank_into(Index idx, Occupation& occ) const {
  int s = graph_->size();
  occ.assign(s, 0);
  std::uint64_t rem = static_cast<std::uint64_t>(idx);
  int tj = n_;
  for (int j = s - 1; j >= 1; --j) {
    // Smallest prefix sum T in [0, tj] with C(tj + j, j) - C(T + j, j) <= rem.
    std::uint64_t top = binom_[j][tj + j];
    int lo = 0, hi = tj;
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (top - binom_[j][mid + j] <= rem)
        hi = mid;
      else
        lo = mid + 1;
    }
    occ[j] = tj - lo;
    rem -= top - binom_[j][lo + j];
    tj = lo;
  }
  occ[0] = tj;
}

Occupation ConfigSpace::unrank(Index idx) const {
  Occupation occ;
  unrank_into(idx, occ);
  return occ;
}

double ConfigSpace::move_rate(const Occupation& occ, int from, int to) const {
  return static_cast<double>(occ[from]) * (d_ + occ[to]) * graph_->rates(from, to);
}

}  // namespace incap
