#include "incap/sandwich.hpp"

#include <cmath>

#include "incap/errors.hpp"
#include "incap/ladder.hpp"

namespace incap {

ReversibleChain chain_from(const ConfigSpace& cs, const MeasureTable& mt) {
  std::vector<Eigen::Triplet<double>> sym;
  Occupation occ;
  for (Index i = 0; i < cs.size(); ++i) {
    cs.unrank_into(i, occ);
    double log_mu = mt.log_prob(i);
    cs.for_each_move(occ, [&](const ConfigSpace::Move& mv, const Occupation&) {
      if (mv.target <= i) return;  // one canonical evaluation per unordered pair
      double c = std::exp(log_mu + std::log(mv.rate));
      sym.emplace_back(static_cast<int>(i), static_cast<int>(mv.target), c);
      sym.emplace_back(static_cast<int>(mv.target), static_cast<int>(i), c);
    });
  }
  Eigen::VectorXd pi(cs.size());
  for (Index i = 0; i < cs.size(); ++i) pi(i) = mt.prob(i);
  return ReversibleChain::from_conductances(pi, sym);
}

CapacitySandwich capacity_sandwich(const SiteGraph& g, int n_particles, double d_n,
                                   const SandwichOptions& opt) {
  MetastableHierarchy h = metastable_hierarchy(g);
  if (h.s_star.size() != 2 || h.kappa3() != 2)
    throw AssumptionViolated("sandwich needs exactly two condensing sites in separate "
                             "third-scale blocks (|S*|=" +
                             std::to_string(h.s_star.size()) +
                             ", kappa3=" + std::to_string(h.kappa3()) + ")");
  int x = h.s_star[0], y = h.s_star[1];
  ContractedGraph contracted = contract_graph(g, x, y);

  CapacitySandwich sw;
  sw.n_particles = n_particles;
  sw.d_n = d_n;
  sw.lambda = opt.lambda > 0.0 ? opt.lambda : default_lambda(g);

  if (opt.k_reference > 0.0) {
    sw.k_reference = opt.k_reference;
  } else {
    KOptions ko;
    ko.lambda = sw.lambda;
    KConstant k = compute_k_constant(g, contracted, ko);
    sw.k_reference = 1.0 / (2.0 * k.value);
  }

  ConfigSpace cs = ConfigSpace::enumerate(g, n_particles, d_n, opt.memory_budget);
  MeasureTable mt = stationary_measure(cs);
  ReversibleChain chain = chain_from(cs, mt);

  Occupation all_x(g.size(), 0), all_y(g.size(), 0);
  all_x[x] = n_particles;
  all_y[y] = n_particles;
  int ix = static_cast<int>(cs.rank(all_x)), iy = static_cast<int>(cs.rank(all_y));

  // Upper bound: Dirichlet form of the test function, built from a resolvent
  // deep enough to cover every slice level reachable at this N. Any feasible
  // interface width gives a valid bound; the square-root growth rule leaves a
  // profile window of a handful of points at desk N and inflates the bound
  // several-fold, so take the best of a short menu instead.
  int depth_f = std::max(n_particles, 2);
  ResolventSolution sol_f = solve_resolvent(g, contracted, depth_f, sw.lambda);
  sw.depth_function = depth_f;
  std::vector<int> widths;
  if (opt.interface_width > 0) {
    widths.push_back(opt.interface_width);
  } else {
    for (int w : {2, 4, 8})
      if (w + 1 <= n_particles - w) widths.push_back(w);
  }
  sw.upper = 0.0;
  Eigen::VectorXd best_f_values;
  Occupation occ;
  for (int w : widths) {
    TestFunction f(g, contracted, sol_f, n_particles, d_n, w);
    DirichletBreakdown br = dirichlet_of_test_function(cs, mt, f);
    if (sw.upper == 0.0 || br.total < sw.upper) {
      sw.upper = br.total;
      sw.breakdown = br;
      sw.interface_width = w;
      best_f_values.resize(cs.size());
      for (Index i = 0; i < cs.size(); ++i) {
        cs.unrank_into(i, occ);
        best_f_values(i) = f(occ);
      }
    }
  }

  // The winning test function approximates the equilibrium potential, so it
  // warm-starts the exact solve; the aggregated near-x count is the reaction
  // coordinate whose level sets span the slow modes.
  std::vector<int> labels(cs.size());
  {
    std::vector<char> near_x(g.size(), 0);
    near_x[x] = 1;
    for (int a : contracted.nx) near_x[a] = 1;
    for (Index i = 0; i < cs.size(); ++i) {
      cs.unrank_into(i, occ);
      int bx = 0;
      for (int v = 0; v < g.size(); ++v)
        if (near_x[v]) bx += occ[v];
      labels[i] = bx;
    }
  }
  PotentialSolution exact = equilibrium_potential(chain, {ix}, {iy}, &best_f_values, &labels);
  sw.exact = exact.cap;
  sw.solver_residual = exact.residual;
  sw.solver_iterations = exact.iterations;
  sw.solver_method = exact.method;

  // Lower bound: Thomson value of the truncated test flow. Every valid flow
  // bounds the capacity from below, and the truncation depth trades leakage
  // (wants depth large) against the correction-flow norms, which carry
  // m^-depth factors at finite N (wants depth small). Scan a short ladder of
  // depths and keep the best bound, unless the caller pinned one.
  std::vector<int> depths;
  if (opt.flow_depth > 0) {
    depths.push_back(opt.flow_depth);
  } else {
    for (int depth : {2, 3, 4, 5, 6})
      if (4 * depth - 1 <= n_particles) depths.push_back(depth);
  }
  if (depths.empty())
    throw AssumptionViolated("particle count too small for any test flow (N < 7)");
  for (int depth : depths) {
    ResolventSolution sol_psi = solve_resolvent(g, contracted, depth, sw.lambda);
    TestFlow psi = build_test_flow(g, contracted, sol_psi, n_particles);
    double norm = flow_norm_sq(cs, mt, psi.flow);
    double bound = norm > 0.0 ? psi.source_value * psi.source_value / norm : 0.0;
    if (bound > sw.lower) {
      DivergenceScan scan = scan_divergence(psi.flow, all_x, all_y);
      sw.lower = bound;
      sw.depth_flow = depth;
      sw.flow_value = psi.source_value;
      sw.flow_norm = norm;
      sw.flow_interior_divergence = scan.worst_interior;
    }
  }

  double scale = static_cast<double>(n_particles) * n_particles / (d_n * d_n * d_n);
  sw.lower_scaled = sw.lower * scale;
  sw.exact_scaled = sw.exact * scale;
  sw.upper_scaled = sw.upper * scale;
  return sw;
}

}  // namespace incap
