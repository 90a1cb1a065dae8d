#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "incap/hierarchy.hpp"
#include "test_helpers.hpp"

using namespace incap;

namespace {

// Fixed-grid composite Simpson as an independent quadrature oracle.
double simpson_oracle(const std::function<double(double)>& f, int panels) {
  double h = 1.0 / panels, sum = f(0.0) + f(1.0);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("five-site path: two condensing sites, separate blocks at both levels") {
  SiteGraph g = testing::path5();
  MetastableHierarchy h = metastable_hierarchy(g);
  CHECK(h.s_star == std::vector<int>{0, 4});
  CHECK(h.kappa2() == 2);
  CHECK(h.kappa3() == 2);  // distance 4: no two-step connection
  CHECK(h.rij(0, 1) == std::numeric_limits<double>::infinity());
  CHECK(h.r2nd(0, 1) == 0.0);
  CHECK(h.m_star == doctest::Approx(0.5));
  CHECK(h.m_star_star == doctest::Approx(0.5));
}

TEST_CASE("three-site path: blocks merge at the second scale") {
  SiteGraph g = testing::path3();
  MetastableHierarchy h = metastable_hierarchy(g);
  CHECK(h.kappa2() == 2);
  CHECK(h.kappa3() == 1);
  // Single triple with unit legs: resistance (1-m_a)/rho = 0.5.
  CHECK(h.rij(0, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(h.r2nd(0, 1) == doctest::Approx(1.0 / (1.0 * 0.5)).epsilon(1e-10));
}

TEST_CASE("connected condensing pair is a single level-2 block") {
  SiteGraph g = testing::two_site();
  MetastableHierarchy h = metastable_hierarchy(g);
  CHECK(h.kappa2() == 1);
  CHECK(h.kappa3() == 1);
  CHECK(h.s_zero.empty());
  CHECK(h.m_star == 0.0);
}

TEST_CASE("two parallel triples halve the resistance") {
  // x and y joined through two equivalent shallow sites.
  SiteGraph g = build_site_graph({"x", "a", "b", "y"}, {{"x", "a", 1.0},
                                                        {"a", "x", 2.0},
                                                        {"a", "y", 2.0},
                                                        {"y", "a", 1.0},
                                                        {"x", "b", 1.0},
                                                        {"b", "x", 2.0},
                                                        {"b", "y", 2.0},
                                                        {"y", "b", 1.0}});
  MetastableHierarchy h = metastable_hierarchy(g);
  REQUIRE(h.kappa2() == 2);
  CHECK(h.rij(0, 1) == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("asymmetric-leg resistance matches a brute-force quadrature") {
  SiteGraph g = build_site_graph({"x", "a", "y"},
                                 {{"x", "a", 1.0}, {"a", "x", 4.0}, {"a", "y", 8.0}, {"y", "a", 2.0}});
  // m_a = 1/4, m_y = 1: both endpoints condense, legs 1 and 2.
  MetastableHierarchy h = metastable_hierarchy(g);
  REQUIRE(h.kappa2() == 2);
  double ma = g.measure(1);
  double rxa = 1.0, rya = 2.0;
  auto integrand = [&](double t) {
    return (1.0 - ma) * ((1.0 - t) / rxa + t / rya);
  };
  double brute = simpson_oracle(integrand, 1 << 16);
  CHECK(h.rij(0, 1) == doctest::Approx(brute).epsilon(1e-9));
  // Symmetry: integrating from the other block reverses the legs only.
  CHECK(compute_rij(g, h.level2[0], h.level2[1]) ==
        doctest::Approx(compute_rij(g, h.level2[1], h.level2[0])).epsilon(1e-10));
}

TEST_CASE("no connecting triple means infinite resistance") {
  SiteGraph g = testing::path5();
  MetastableHierarchy h = metastable_hierarchy(g);
  CHECK(compute_rij(g, {0}, {4}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("coarse rates divide by the source block size") {
  // Block {x, w} of size two against the singleton {z}.
  SiteGraph g = build_site_graph({"x", "w", "a", "z"},
                                 {{"x", "w", 1.0}, {"w", "x", 1.0}, {"w", "a", 1.0},
                                  {"a", "w", 2.0}, {"a", "z", 2.0}, {"z", "a", 1.0}});
  MetastableHierarchy h = metastable_hierarchy(g);
  REQUIRE(h.kappa2() == 2);
  REQUIRE(h.level2[0].size() == 2);
  double r = h.rij(0, 1);
  CHECK(std::isfinite(r));
  CHECK(h.r2nd(0, 1) == doctest::Approx(1.0 / (2.0 * r)).epsilon(1e-12));
  CHECK(h.r2nd(1, 0) == doctest::Approx(1.0 / r).epsilon(1e-12));
}

TEST_CASE("nearly maximal measures are flagged, not silently decided") {
  std::vector<std::pair<std::string, double>> measure{{"x", 1.0}, {"a", 1.0 - 1e-8}};
  SiteGraph g = build_site_graph(
      {"x", "a"}, {{"x", "a", 1.0}, {"a", "x", 1.0 / (1.0 - 1e-8)}}, measure);
  MetastableHierarchy h = metastable_hierarchy(g);
  CHECK(h.s_star == std::vector<int>{0});
  CHECK(h.near_degenerate == std::vector<int>{1});
}

TEST_CASE("level-3 merge agrees with the finiteness pattern of the resistances") {
  // Three blocks: 0-1 at distance 2, 1-2 at distance 2, 0-2 at distance 4:
  // all three merge transitively at level 3.
  SiteGraph g = build_site_graph({"x", "a", "y", "b", "z"}, {{"x", "a", 1.0},
                                                             {"a", "x", 2.0},
                                                             {"a", "y", 2.0},
                                                             {"y", "a", 1.0},
                                                             {"y", "b", 1.0},
                                                             {"b", "y", 2.0},
                                                             {"b", "z", 2.0},
                                                             {"z", "b", 1.0}});
  MetastableHierarchy h = metastable_hierarchy(g);
  REQUIRE(h.kappa2() == 3);
  CHECK(std::isfinite(h.rij(0, 1)));
  CHECK(std::isfinite(h.rij(1, 2)));
  CHECK(!std::isfinite(h.rij(0, 2)));
  CHECK(h.kappa3() == 1);
}
