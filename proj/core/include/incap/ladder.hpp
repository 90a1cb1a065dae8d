#ifndef INCAP_LADDER_HPP
#define INCAP_LADDER_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "incap/contraction.hpp"
#include "incap/potential.hpp"
#include "incap/site_graph.hpp"

namespace incap {

// Explicit slice chain: configurations of `level` particles on a connected
// component with at most two occupied sites, split states only along edges
// (states on non-edges would be unreachable). Rates are symmetric, so the
// stationary law is uniform. Intended for small levels; production code uses
// the log-domain reduction inside the resolvent solver.
struct TwoSiteSliceChain {
  struct State {
    int v, w, k;  // w < 0: all particles at v; else k at v, level-k at w (v < w)
  };
  int level = 0;
  std::vector<int> sites;  // component sites, sorted
  std::vector<State> states;
  ReversibleChain chain;

  int singleton_index(int site) const;
  // k particles at site_v, level-k at site_w; k==level or k==0 resolve to singletons.
  int split_index(int site_v, int site_w, int k) const;
};

TwoSiteSliceChain build_slice(const SiteGraph& g, const std::vector<int>& component, int level);

// Symmetric trace rates between the anchor singletons of an explicit slice.
Eigen::MatrixXd slice_trace(const TwoSiteSliceChain& slice, const std::vector<int>& anchors);

// One ladder component: a column of levels per anchor site, the solved
// resolvent profile, per-level trace tables (log domain) and the harmonic
// extensions of the rescaled profile onto each slice.
struct LadderComponent {
  std::vector<int> sites;
  std::vector<int> anchors;                // sites coupled to a contracted neighborhood
  std::vector<std::pair<int, int>> lines;  // adjacent site pairs (v < w) inside the component
  int depth = 0;
  double lambda = 0.0;

  // Rows are levels 0..depth+1 (rows 0 and depth+1 identically zero), columns
  // follow `anchors`.
  Eigen::MatrixXd g0;  // resolvent solution, uniformly bounded
  Eigen::MatrixXd g;   // rescaled profile lambda^-level * g0
  std::vector<Eigen::MatrixXd> rhat_log;  // level 1..depth: log trace rates, -inf for 0
  std::vector<Eigen::MatrixXd> f_log, h_log;  // level 1..depth stored as 1 x anchors rows

  // Harmonic extension of the rescaled profile on each slice, level 1..depth.
  std::vector<std::vector<double>> ext_singleton;            // [level-1][site slot]
  std::vector<std::vector<std::vector<double>>> ext_pair;    // [level-1][line][k-1], k at line.first

  int site_slot(int site) const;
  int anchor_slot(int site) const;
  int line_slot(int v, int w) const;  // -1 when not an edge
  double g_at(int site, int level) const;  // anchor columns; 0 outside [1, depth]
  double rhat(int level, int a_site, int b_site) const;
  double ghat_single(int site, int level) const;
  double ghat_split(int site_a, int site_b, int k_at_a, int level) const;
};

struct ResolventSolution {
  double lambda = 0.0;
  int depth = 0;
  double residual = 0.0;  // worst row-equilibrated linear-system residual
  std::vector<LadderComponent> components;

  const LadderComponent& component_of(int site, const ContractedGraph& c) const;
};

// Solves the truncated ladder resolvent equation on every component. The
// system is strictly diagonally dominant (the positive multiplier is added to
// the Laplacian diagonal), assembled row-equilibrated in log domain so deep
// levels stay well scaled. Throws BadLambda outside (sqrt(m_star), 1).
ResolventSolution solve_resolvent(const SiteGraph& g, const ContractedGraph& c, int depth,
                                  double lambda, bool with_extensions = true);

double default_lambda(const SiteGraph& g);  // midpoint of the legal interval

struct KConstant {
  double value = 0.0;  // from the full quadratic-sum definition
  double lambda = 0.0;
  int depth = 0;
  double full_inverse = 0.0;       // the four-sum value of 1/(6 K)
  double simplified_x = 0.0;       // single-sum form through the x-side anchors
  double simplified_y = 0.0;       // single-sum form through the y-side anchors
  double spread = 0.0;             // max relative disagreement of the three forms
};

// Evaluates the sharp third-scale constant from a solved resolvent. Infinite
// level sums are truncated by the geometric summand bound (m_star/lambda^2)^l.
KConstant compute_k_constant(const SiteGraph& g, const ContractedGraph& c,
                             const ResolventSolution& sol);

struct KOptions {
  double lambda = -1.0;    // < 0: use default_lambda
  int initial_depth = 80;  // doubled until the value settles
  int max_depth = 640;
  double depth_tol = 1e-8;   // relative change between successive depths
  double spread_tol = 1e-4;  // throws Diverged above this
};

KConstant compute_k_constant(const SiteGraph& g, const ContractedGraph& c, KOptions opt = {});

struct IdentityReport {
  double balance_residual = 0.0;  // per-level column balance, worst relative
  double cross_residual = 0.0;    // x-side vs y-side per-level identity, worst relative
};

IdentityReport verify_g_identities(const SiteGraph& g, const ContractedGraph& c,
                                   const ResolventSolution& sol);

}  // namespace incap

#endif
