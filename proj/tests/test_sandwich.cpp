#include <doctest.h>

#include "incap/errors.hpp"
#include "incap/sandwich.hpp"
#include "test_helpers.hpp"

using namespace incap;

TEST_CASE("sandwich at desk scale: strict ordering with diagnostics attached") {
  SiteGraph g = testing::path5();
  CapacitySandwich sw = capacity_sandwich(g, 16, 0.05);
  CHECK(sw.ordered());
  CHECK(sw.lower > 0.0);
  CHECK(sw.lower < sw.exact);
  CHECK(sw.exact < sw.upper);
  CHECK(sw.k_reference == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sw.solver_residual <= 1e-11);
  CHECK(sw.flow_interior_divergence <= 1e-12);
  CHECK(sw.breakdown.t1 == 0.0);
  CHECK(sw.exact_scaled == doctest::Approx(sw.exact * 16.0 * 16.0 / (0.05 * 0.05 * 0.05)));
}

TEST_CASE("sandwich requires two condensing sites in separate blocks") {
  CHECK_THROWS_AS(capacity_sandwich(testing::path3(), 12, 0.05), AssumptionViolated);
  CHECK_THROWS_AS(capacity_sandwich(testing::two_site(), 12, 0.05), AssumptionViolated);
}

TEST_CASE("scaled exact capacity moves toward the sharp constant") {
  SiteGraph g = testing::path5();
  SandwichOptions opt;
  opt.k_reference = 3.0;  // skip the K stage, pinned by the ladder tests
  double prev_gap = 1e100;
  for (int n : {12, 20, 28}) {
    CapacitySandwich sw = capacity_sandwich(g, n, 0.05, opt);
    CHECK(sw.ordered());
    double gap = std::abs(sw.exact_scaled - sw.k_reference);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("memory budget propagates") {
  SandwichOptions opt;
  opt.memory_budget = 100;
  CHECK_THROWS_AS(capacity_sandwich(testing::path5(), 16, 0.05, opt), SpaceTooLarge);
}

TEST_CASE("branching geometry sandwich holds as well") {
  SiteGraph g = testing::theta();
  CapacitySandwich sw = capacity_sandwich(g, 14, 0.06);
  CHECK(sw.ordered());
  CHECK(sw.lower > 0.0);
}

namespace {

// Distance-3 path: the neighborhoods touch, the interior is empty and the
// whole constant comes from the direct coupling term.
SiteGraph path4() {
  return build_site_graph({"x", "a", "b", "y"},
                          {{"x", "a", 1.0},
                           {"a", "x", 2.0},
                           {"a", "b", 1.0},
                           {"b", "a", 1.0},
                           {"b", "y", 2.0},
                           {"y", "b", 1.0}});
}

// Five-site path plus a chord between the two neighborhoods: direct
// coupling, x-side and y-side anchor columns all carry weight.
SiteGraph path5_chord() {
  return build_site_graph({"x", "a", "b", "c", "y"},
                          {{"x", "a", 0.5},
                           {"a", "x", 1.0},
                           {"a", "b", 0.5},
                           {"b", "a", 0.5},
                           {"b", "c", 0.5},
                           {"c", "b", 0.5},
                           {"c", "y", 1.0},
                           {"y", "c", 0.5},
                           {"a", "c", 0.6},
                           {"c", "a", 0.6}},
                          std::vector<std::pair<std::string, double>>{
                              {"x", 1.0}, {"a", 0.5}, {"b", 0.5}, {"c", 0.5}, {"y", 1.0}});
}

// Two disjoint interior routes: the ladder splits into two components.
SiteGraph two_routes() {
  auto edge = [](std::vector<RateTriple>& rates, const char* i, const char* j, double c,
                 double mi, double mj) {
    rates.push_back({i, j, c / mi});
    rates.push_back({j, i, c / mj});
  };
  std::vector<RateTriple> rates;
  edge(rates, "x", "a1", 0.5, 1.0, 0.5);
  edge(rates, "a1", "u", 0.25, 0.5, 0.5);
  edge(rates, "u", "c1", 0.25, 0.5, 0.5);
  edge(rates, "c1", "y", 0.5, 0.5, 1.0);
  edge(rates, "x", "a2", 0.5, 1.0, 0.5);
  edge(rates, "a2", "v", 0.25, 0.5, 0.5);
  edge(rates, "v", "c2", 0.25, 0.5, 0.5);
  edge(rates, "c2", "y", 0.5, 0.5, 1.0);
  return build_site_graph({"x", "a1", "u", "c1", "a2", "v", "c2", "y"}, rates);
}

}  // namespace

TEST_CASE("sharp constants match hand-derived closed forms") {
  // Whenever an anchor column has equal x- and y-side weights and measure
  // one half, the profile recursion linearizes to g_l = l/2 and the x-side
  // sum telescopes to the anchor weight itself. The inverse sixfold constant
  // is then the direct-coupling term plus the total x-side anchor weight.
  struct Expect {
    SiteGraph graph;
    double inverse_sixfold;
  };
  std::vector<Expect> table;
  // direct coupling only: c_ab / ((1-m_a)(1-m_b)) = 0.5 / 0.25
  table.push_back({path4(), 2.0});
  // chord 0.3/0.25 plus a unit-weight anchor column halved: 1.2 + 0.5
  table.push_back({path5_chord(), 1.7});
  // two single-site components, each contributing one half
  table.push_back({two_routes(), 1.0});
  // the plain path: one anchor of unit weight
  table.push_back({testing::path5(), 1.0});
  for (auto& e : table) {
    MetastableHierarchy h = metastable_hierarchy(e.graph);
    ContractedGraph c = contract_graph(e.graph, h.s_star.front(), h.s_star.back());
    KConstant k = compute_k_constant(e.graph, c, KOptions{});
    CHECK(k.full_inverse == doctest::Approx(e.inverse_sixfold).epsilon(1e-10));
    CHECK(k.value == doctest::Approx(1.0 / (6.0 * e.inverse_sixfold)).epsilon(1e-10));
  }
}

TEST_CASE("geometry zoo: every bulk-flow type and component layout") {
  struct Zoo {
    const char* name;
    SiteGraph graph;
    int n;
  };
  std::vector<Zoo> zoo;
  zoo.push_back({"path4 (direct coupling only)", path4(), 15});
  zoo.push_back({"path5 with chord", path5_chord(), 15});
  zoo.push_back({"two interior routes", two_routes(), 14});
  for (auto& z : zoo) {
    CAPTURE(z.name);
    MetastableHierarchy h = metastable_hierarchy(z.graph);
    REQUIRE(h.s_star.size() == 2);
    ContractedGraph c = contract_graph(z.graph, h.s_star[0], h.s_star[1]);
    KOptions ko;
    KConstant k = compute_k_constant(z.graph, c, ko);
    CHECK(k.spread <= 1e-8);
    CHECK(k.value > 0.0);

    CapacitySandwich sw = capacity_sandwich(z.graph, z.n, 0.05);
    CHECK(sw.ordered());
    CHECK(sw.lower > 0.0);
    CHECK(sw.flow_interior_divergence <= 1e-12);
  }
  // the two-route interior really is two ladder components
  SiteGraph tr = two_routes();
  ContractedGraph c = contract_graph(tr, 0, 7);
  CHECK(c.components.size() == 2);
}
