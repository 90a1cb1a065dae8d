#include <doctest.h>

#include <cmath>

#include "incap/errors.hpp"
#include "incap/simulate.hpp"
#include "test_helpers.hpp"

using namespace incap;

TEST_CASE("starting on the target gives zero hitting time") {
  SiteGraph g = testing::two_site();
  ConfigSpace cs = ConfigSpace::enumerate(g, 3, 0.2);
  Occupation ax{3, 0};
  SimConfig cfg;
  cfg.replicas = 4;
  HittingSample s = simulate_until(cs, cs.rank(ax), {cs.rank(ax)}, cfg);
  for (double t : s.times) CHECK(t == 0.0);
}

TEST_CASE("single particle on two sites: exponential clock with rate d r") {
  SiteGraph g = testing::two_site();
  double d = 0.25;
  ConfigSpace cs = ConfigSpace::enumerate(g, 1, d);
  Occupation ax{1, 0}, ay{0, 1};
  SimConfig cfg;
  cfg.replicas = 2000;
  cfg.seed = 99;
  HittingSample s = simulate_until(cs, cs.rank(ax), {cs.rank(ay)}, cfg);
  double exact = 1.0 / (d * 1.0);
  CHECK(std::abs(s.mean - exact) <= 3.0 * s.stderr_);

  // bit-for-bit determinism under a fixed seed
  HittingSample again = simulate_until(cs, cs.rank(ax), {cs.rank(ay)}, cfg);
  REQUIRE(again.times.size() == s.times.size());
  for (size_t i = 0; i < s.times.size(); ++i) CHECK(again.times[i] == s.times[i]);
}

TEST_CASE("standard error shrinks like the square root of the replica count") {
  SiteGraph g = testing::two_site();
  ConfigSpace cs = ConfigSpace::enumerate(g, 2, 0.3);
  Occupation ax{2, 0}, ay{0, 2};
  SimConfig small, large;
  small.replicas = 200;
  large.replicas = 3200;
  small.seed = large.seed = 7;
  HittingSample a = simulate_until(cs, cs.rank(ax), {cs.rank(ay)}, small);
  HittingSample b = simulate_until(cs, cs.rank(ax), {cs.rank(ay)}, large);
  double ratio = b.stderr_ / a.stderr_;  // expect ~ 1/4
  CHECK(ratio > 0.125);
  CHECK(ratio < 0.5);
}

TEST_CASE("empirical means match the capacity identity on three geometries") {
  SimConfig cfg;
  cfg.replicas = 600;
  cfg.seed = 2024;
  struct Plan {
    SiteGraph graph;
    int n;
  };
  std::vector<Plan> plans;
  plans.push_back({testing::two_site(), 20});
  plans.push_back({testing::path3(), 10});
  plans.push_back({testing::path5(), 5});
  for (auto& plan : plans) {
    cfg.seed += 1;
    const SiteGraph& g = plan.graph;
    ConfigSpace cs = ConfigSpace::enumerate(g, plan.n, 0.3);
    MeasureTable mt = stationary_measure(cs);
    Occupation ax(g.size(), 0), ay(g.size(), 0);
    ax[0] = plan.n;
    ay[g.size() - 1] = plan.n;
    MagicComparison cmp =
        empirical_vs_magic(cs, mt, cs.rank(ax), {cs.rank(ay)}, cfg);
    CHECK(cmp.pass);
  }
}

TEST_CASE("event cap aborts runaway simulations") {
  SiteGraph g = testing::path5();
  ConfigSpace cs = ConfigSpace::enumerate(g, 10, 0.05);
  Occupation ax(5, 0), ay(5, 0);
  ax[0] = 10;
  ay[4] = 10;
  SimConfig cfg;
  cfg.replicas = 1;
  cfg.max_events = 10;  // a theta2-scale transition needs far more
  CHECK_THROWS_AS(simulate_until(cs, cs.rank(ax), {cs.rank(ay)}, cfg), EventCapExceeded);
}

TEST_CASE("time-scale census: short times stay put, long times equilibrate") {
  // Condensing regime: d small, and d decays along any N comparison.
  SiteGraph g = testing::path3();
  int n = 8;
  double d = 0.05;
  ConfigSpace cs = ConfigSpace::enumerate(g, n, d);
  MetastableHierarchy h = metastable_hierarchy(g);
  Occupation ax(3, 0);
  ax[0] = n;
  SimConfig cfg;
  cfg.replicas = 400;
  cfg.seed = 5;

  double theta1 = 1.0 / d, theta2 = n / (d * d);
  CensusResult early = timescale_census(cs, h, cs.rank(ax), 0.01 * theta1, 0.0, cfg);
  CHECK(early.projected.count(0));
  CHECK(early.projected.at(0) > 0.7);  // still condensed at the start site

  // theta2 << alpha << theta3: close to uniform over the level-3 block {x, y}
  CensusResult late = timescale_census(cs, h, cs.rank(ax), 30.0 * theta2, 0.0, cfg);
  double px = late.projected.count(0) ? late.projected.at(0) : 0.0;
  double py = late.projected.count(2) ? late.projected.at(2) : 0.0;
  CHECK(px > 0.3);
  CHECK(py > 0.3);

  // occupation outside the condensed pair is small and shrinks along a
  // decaying-d sweep (the negligibility needs d log N -> 0)
  ConfigSpace cs1 = ConfigSpace::enumerate(g, n, 0.1);
  CensusResult o1 = timescale_census(cs1, h, cs1.rank(ax), n / 0.01, n / 0.01, cfg);
  ConfigSpace cs2 = ConfigSpace::enumerate(g, 2 * n, 0.04);
  Occupation ax2(3, 0);
  ax2[0] = 2 * n;
  CensusResult o2 = timescale_census(cs2, h, cs2.rank(ax2), 2 * n / (0.04 * 0.04),
                                     2 * n / (0.04 * 0.04), cfg);
  CHECK(o1.outside_fraction < 0.35);
  CHECK(o2.outside_fraction < o1.outside_fraction);
}

TEST_CASE("beyond the third scale the condensate forgets its block") {
  // On the five-site path the blocks only communicate on the third scale;
  // far past it the location is near-uniform over both condensing sites.
  SiteGraph g = testing::path5();
  int n = 10;
  double d = 0.3;
  ConfigSpace cs = ConfigSpace::enumerate(g, n, d);
  MetastableHierarchy h = metastable_hierarchy(g);
  REQUIRE(h.kappa3() == 2);
  Occupation ax(5, 0);
  ax[0] = n;
  SimConfig cfg;
  cfg.replicas = 200;
  cfg.seed = 99;
  double theta3 = double(n) * n / (d * d * d);
  CensusResult census = timescale_census(cs, h, cs.rank(ax), 5.0 * theta3, 0.0, cfg);
  double px = census.projected.count(0) ? census.projected.at(0) : 0.0;
  double py = census.projected.count(4) ? census.projected.at(4) : 0.0;
  // The claim is about the law within the condensed pair: having started in
  // the x block, the walk has fully forgotten it.
  CHECK(px > 0.03);
  CHECK(py > 0.03);
  CHECK(std::abs(px - py) <= 0.15);
}

TEST_CASE("equilibrium sanity: projected law at long times matches the measure") {
  // chi-squared over the 3-way projection (condensed at x / at y / elsewhere)
  SiteGraph g = testing::two_site();
  int n = 2;
  double d = 0.4;
  ConfigSpace cs = ConfigSpace::enumerate(g, n, d);
  MeasureTable mt = stationary_measure(cs);
  MetastableHierarchy h = metastable_hierarchy(g);
  Occupation ax{2, 0};
  SimConfig cfg;
  cfg.replicas = 600;
  cfg.seed = 31;
  CensusResult census = timescale_census(cs, h, cs.rank(ax), 500.0, 0.0, cfg);
  double expected[3] = {mt.prob(cs.rank({2, 0})), mt.prob(cs.rank({0, 2})),
                        mt.prob(cs.rank({1, 1}))};
  double observed[3] = {census.projected.count(0) ? census.projected.at(0) : 0.0,
                        census.projected.count(1) ? census.projected.at(1) : 0.0,
                        census.projected.count(-1) ? census.projected.at(-1) : 0.0};
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    double e = expected[i] * cfg.replicas, o = observed[i] * cfg.replicas;
    chi2 += (o - e) * (o - e) / e;
  }
  CHECK(chi2 < 13.8);  // 2 dof, far tail
}
