#ifndef INCAP_POTENTIAL_HPP
#define INCAP_POTENTIAL_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace incap {

// Finite irreducible reversible chain in conductance form: pi(v) R(v,w) is
// stored as a symmetric sparse matrix. Immutable once built; all solver
// entry points are reentrant.
struct ReversibleChain {
  Eigen::VectorXd pi;                   // stationary probabilities
  Eigen::SparseMatrix<double> conduct;  // c(v,w) = pi(v) R(v,w), symmetric

  int n() const { return static_cast<int>(pi.size()); }
  double rate(int v, int w) const { return conduct.coeff(v, w) / pi(v); }

  // Validates detailed balance (1e-12 relative) and symmetrizes exactly.
  static ReversibleChain from_rates(const Eigen::VectorXd& pi,
                                    const std::vector<Eigen::Triplet<double>>& rates);
  static ReversibleChain from_conductances(const Eigen::VectorXd& pi,
                                           const std::vector<Eigen::Triplet<double>>& sym);
};

double dirichlet_form(const ReversibleChain& chain, const Eigen::VectorXd& f);
// <f, -Lf>_pi evaluated through the generator; equals the Dirichlet form.
double generator_pairing(const ReversibleChain& chain, const Eigen::VectorXd& f);

struct PotentialSolution {
  Eigen::VectorXd h;     // equilibrium potential, 1 on A, 0 on B
  double cap = 0.0;      // Dirichlet form of h
  double residual = 0.0; // ||M h - rhs|| / ||rhs|| on the interior system
  double local_imbalance = 0.0;  // worst per-state flux defect over local conductance
  int iterations = 0;    // 0 for direct solves
  std::string method;    // "ldlt" or "cg"
};

// Direct sparse factorization when the interior is small, conjugate gradient
// on the symmetrized Laplacian otherwise (relative residual 1e-11). A guess
// over all states warm-starts the iterative path; per-state coarse labels
// (a reaction coordinate) add an exact coarse correction to the
// preconditioner, which collapses the metastable near-kernel.
PotentialSolution equilibrium_potential(const ReversibleChain& chain, const std::vector<int>& A,
                                        const std::vector<int>& B,
                                        const Eigen::VectorXd* guess = nullptr,
                                        const std::vector<int>* coarse_labels = nullptr);
double capacity(const ReversibleChain& chain, const std::vector<int>& A,
                const std::vector<int>& B);

// Antisymmetric edge function, stored once per unordered pair.
class FlowField {
 public:
  void add(int from, int to, double value);
  double get(int from, int to) const;
  std::unordered_map<int, double> divergence() const;
  double max_abs() const;
  bool empty() const { return values_.empty(); }

  // Raw directed entries; duplicates accumulate, and a pair supplied in both
  // orientations must be antisymmetric or NotAFlow is thrown.
  static FlowField from_raw_entries(const std::vector<std::tuple<int, int, double>>& entries);

  template <typename Fn>
  void for_each(Fn&& fn) const {  // fn(from, to, value) once per unordered pair
    for (const auto& [key, value] : values_)
      fn(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu), value);
  }

 private:
  // key packs (lo, hi) with lo < hi; value is the flow lo -> hi.
  std::unordered_map<std::uint64_t, double> values_;
};

double flow_divergence(const FlowField& flow, int v);
double flow_norm_sq(const ReversibleChain& chain, const FlowField& flow);
inline double flow_norm(const ReversibleChain& chain, const FlowField& flow) {
  return std::sqrt(flow_norm_sq(chain, flow));
}
// Checks zero interior divergence (1e-12 * max|flow|), support on positive-
// rate edges, and matching source/sink values; returns the flow value.
double validate_flow(const ReversibleChain& chain, const FlowField& flow,
                     const std::vector<int>& A, const std::vector<int>& B);
double thomson_bound(const ReversibleChain& chain, const FlowField& flow,
                     const std::vector<int>& A, const std::vector<int>& B);
// c(v,w) (h(v) - h(w)): the optimizer of the Thomson principle.
FlowField harmonic_flow(const ReversibleChain& chain, const Eigen::VectorXd& h);

// Chain watched on the subset W (states reindexed in the order given);
// excursions outside W are absorbed into effective rates.
ReversibleChain trace_chain(const ReversibleChain& chain, const std::vector<int>& W);

// Mean hitting time of B from v, computed by the capacity identity and
// cross-checked against the direct linear solve (1e-8 relative).
double mean_hitting_time(const ReversibleChain& chain, int v, const std::vector<int>& B);

// Expected terminal boundary value: equals g on W, harmonic elsewhere.
Eigen::VectorXd harmonic_extension(const ReversibleChain& chain, const std::vector<int>& W,
                                   const Eigen::VectorXd& g_on_w);

}  // namespace incap

#endif
