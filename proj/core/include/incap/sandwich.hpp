#ifndef INCAP_SANDWICH_HPP
#define INCAP_SANDWICH_HPP

#include <string>

#include "incap/config_space.hpp"
#include "incap/hierarchy.hpp"
#include "incap/measure.hpp"
#include "incap/potential.hpp"
#include "incap/test_function.hpp"
#include "incap/test_flow.hpp"

namespace incap {

// Exact finite-N capacity between the two condensed states pinched between
// the variational upper bound (test function) and lower bound (test flow).
struct CapacitySandwich {
  int n_particles = 0;
  double d_n = 0.0;
  double lambda = 0.0;
  int depth_flow = 0, depth_function = 0;
  int interface_width = 0;

  double lower = 0.0, exact = 0.0, upper = 0.0;  // raw capacities
  double lower_scaled = 0.0, exact_scaled = 0.0, upper_scaled = 0.0;  // x N^2/d^3
  double k_reference = 0.0;  // 1/(2K), the scaled limit

  double solver_residual = 0.0;
  int solver_iterations = 0;
  std::string solver_method;
  double flow_value = 0.0, flow_norm = 0.0, flow_interior_divergence = 0.0;
  DirichletBreakdown breakdown;

  bool ordered(double slack = 1e-9) const {
    return lower <= exact * (1.0 + slack) && exact <= upper * (1.0 + slack);
  }
};

struct SandwichOptions {
  double lambda = -1.0;       // < 0: default for the geometry
  int flow_depth = -1;        // < 0: best of a short depth menu
  int interface_width = -1;   // < 0: best of a short width menu
  Index memory_budget = 5'000'000;
  double k_reference = -1.0;  // pass a precomputed 1/(2K) to skip that stage
};

// Orchestrates enumerate -> measure -> exact capacity -> test function ->
// test flow for the unique condensing pair. Throws AssumptionViolated when
// the geometry does not have exactly two condensing sites in distinct
// third-scale blocks.
CapacitySandwich capacity_sandwich(const SiteGraph& g, int n_particles, double d_n,
                                   const SandwichOptions& opt = {});

// Chain form of the particle system for the potential-theory engine.
ReversibleChain chain_from(const ConfigSpace& cs, const MeasureTable& mt);

}  // namespace incap

#endif
