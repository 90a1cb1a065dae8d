#include "incap/potential.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

#include "incap/errors.hpp"
#include "incap/numeric.hpp"

namespace incap {

namespace {

std::uint64_t edge_key(int lo, int hi) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(lo)) << 32) |
         static_cast<std::uint32_t>(hi);
}

// Incomplete Cholesky augmented with an exact coarse solve over caller-
// supplied state groups (additive two-level preconditioner). Metastable
// chains have their slow modes spanned by functions of a reaction coordinate;
// projecting it out leaves the fast within-group spectrum to the IC sweep.
class CoarseCorrectedIC {
 public:
  CoarseCorrectedIC() = default;

  void set_groups(const std::vector<int>* groups) { groups_ = groups; }
  Eigen::ComputationInfo info() const { return info_; }

  template <typename MatType>
  CoarseCorrectedIC& analyzePattern(const MatType&) {
    return *this;
  }

  template <typename MatType>
  CoarseCorrectedIC& factorize(const MatType& mat) {
    ic_ok_ = false;
    ic_.compute(mat);
    if (ic_.info() == Eigen::Success) {
      ic_ok_ = true;
    } else {
      inv_diag_.resize(mat.rows());
      for (int k = 0; k < mat.outerSize(); ++k) {
        double d = 1e-300;
        for (typename MatType::InnerIterator it(mat, k); it; ++it)
          if (it.row() == it.col()) d = std::max(d, it.value());
        inv_diag_(k) = 1.0 / d;
      }
    }
    if (groups_ && !groups_->empty()) {
      int n_groups = 0;
      for (int gid : *groups_) n_groups = std::max(n_groups, gid + 1);
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_groups, n_groups);
      for (int k = 0; k < mat.outerSize(); ++k)
        for (typename MatType::InnerIterator it(mat, k); it; ++it)
          t((*groups_)[it.row()], (*groups_)[it.col()]) += it.value();
      // Groups can be empty (zero rows); regularize them away.
      for (int i = 0; i < n_groups; ++i)
        if (t(i, i) == 0.0) t(i, i) = 1.0;
      coarse_ = t.ldlt();
      has_coarse_ = true;
    }
    info_ = Eigen::Success;
    return *this;
  }

  template <typename MatType>
  CoarseCorrectedIC& compute(const MatType& mat) {
    return factorize(mat);
  }

  template <typename Rhs>
  Eigen::VectorXd solve(const Rhs& b) const {
    Eigen::VectorXd z = ic_ok_ ? Eigen::VectorXd(ic_.solve(b))
                               : Eigen::VectorXd(inv_diag_.asDiagonal() * b);
    if (has_coarse_) {
      Eigen::VectorXd rc = Eigen::VectorXd::Zero(coarse_.rows());
      for (int i = 0; i < b.size(); ++i) rc((*groups_)[i]) += b(i);
      Eigen::VectorXd zc = coarse_.solve(rc);
      for (int i = 0; i < b.size(); ++i) z(i) += zc((*groups_)[i]);
    }
    return z;
  }

 private:
  Eigen::IncompleteCholesky<double> ic_;
  Eigen::VectorXd inv_diag_;
  Eigen::LDLT<Eigen::MatrixXd> coarse_;
  const std::vector<int>* groups_ = nullptr;
  bool ic_ok_ = false, has_coarse_ = false;
  Eigen::ComputationInfo info_ = Eigen::NumericalIssue;
};

// Interior Dirichlet solve: M h_int = rhs with M = D - C restricted to the
// interior. Direct factorization below the threshold, preconditioned CG above.
struct InteriorSolver {
  using RowMajorSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  std::vector<int> interior;        // chain index per interior slot
  std::vector<int> slot;            // interior slot per chain index, -1 on boundary
  RowMajorSparse m;                 // SPD; row-major so the matvec threads
  std::string method;
  int iterations = 0;

  InteriorSolver(const ReversibleChain& chain, const std::vector<char>& boundary) {
    int n = chain.n();
    slot.assign(n, -1);
    for (int v = 0; v < n; ++v)
      if (!boundary[v]) {
        slot[v] = static_cast<int>(interior.size());
        interior.push_back(v);
      }
    int ni = static_cast<int>(interior.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(chain.conduct.nonZeros());
    std::vector<double> diag(ni, 0.0);
    for (int k = 0; k < chain.conduct.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, k); it; ++it) {
        int v = static_cast<int>(it.row()), w = static_cast<int>(it.col());
        if (slot[v] < 0) continue;
        diag[slot[v]] += it.value();
        if (slot[w] >= 0) trips.emplace_back(slot[v], slot[w], -it.value());
      }
    for (int i = 0; i < ni; ++i) trips.emplace_back(i, i, diag[i]);
    m.resize(ni, ni);
    m.setFromTriplets(trips.begin(), trips.end());
  }

  double last_residual = 0.0;
  std::vector<int> coarse_groups;  // per interior slot; empty: no coarse space

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd* guess = nullptr) {
    Eigen::VectorXd x = solve_impl(rhs, guess);
    double scale = rhs.norm();
    last_residual = scale > 0.0 ? (m * x - rhs).norm() / scale : 0.0;
    return x;
  }

  Eigen::VectorXd solve_impl(const Eigen::VectorXd& rhs, const Eigen::VectorXd* guess) {
    if (m.rows() == 0) return Eigen::VectorXd();
    if (m.rows() <= 20000) {
      method = "ldlt";
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
      if (ldlt.info() != Eigen::Success)
        throw SingularSystem("direct factorization of the interior Laplacian failed");
      return ldlt.solve(rhs);
    }
    method = coarse_groups.empty() ? "cg-ic" : "cg-ic-coarse";
    Eigen::ConjugateGradient<RowMajorSparse, Eigen::Lower | Eigen::Upper, CoarseCorrectedIC> cg;
    cg.preconditioner().set_groups(coarse_groups.empty() ? nullptr : &coarse_groups);
    cg.setTolerance(1e-11);
    cg.setMaxIterations(400000);
    cg.compute(m);
    if (cg.info() == Eigen::Success) {
      Eigen::VectorXd h = guess ? cg.solveWithGuess(rhs, *guess) : Eigen::VectorXd(cg.solve(rhs));
      if (cg.info() == Eigen::Success) {
        iterations = static_cast<int>(cg.iterations());
        return h;
      }
    }
    method = "cg-jacobi";
    Eigen::ConjugateGradient<RowMajorSparse, Eigen::Lower | Eigen::Upper> cg2;
    cg2.setTolerance(1e-11);
    cg2.setMaxIterations(1000000);
    cg2.compute(m);
    Eigen::VectorXd h = guess ? cg2.solveWithGuess(rhs, *guess) : Eigen::VectorXd(cg2.solve(rhs));
    if (cg2.info() != Eigen::Success && cg2.error() > 1e-9)
      throw SingularSystem("conjugate gradient failed to reach the target residual");
    iterations = static_cast<int>(cg2.iterations());
    return h;
  }
};

}  // namespace

ReversibleChain ReversibleChain::from_rates(const Eigen::VectorXd& pi,
                                            const std::vector<Eigen::Triplet<double>>& rates) {
  std::vector<Eigen::Triplet<double>> sym;
  sym.reserve(rates.size());
  for (const auto& t : rates)
    sym.emplace_back(t.row(), t.col(), pi(t.row()) * t.value());
  return from_conductances(pi, sym);
}

ReversibleChain ReversibleChain::from_conductances(
    const Eigen::VectorXd& pi, const std::vector<Eigen::Triplet<double>>& sym) {
  ReversibleChain chain;
  chain.pi = pi;
  chain.conduct.resize(pi.size(), pi.size());
  chain.conduct.setFromTriplets(sym.begin(), sym.end());
  Eigen::SparseMatrix<double> t = chain.conduct.transpose();
  for (int k = 0; k < chain.conduct.outerSize(); ++k) {
    Eigen::SparseMatrix<double>::InnerIterator a(chain.conduct, k);
    Eigen::SparseMatrix<double>::InnerIterator b(t, k);
    for (; a && b; ++a, ++b) {
      if (a.row() != b.row() || rel_diff(a.value(), b.value()) > 1e-12)
        throw NotReversible("conductance matrix is not symmetric");
      double avg = 0.5 * (a.value() + b.value());
      a.valueRef() = avg;
    }
    if (a || b) throw NotReversible("conductance sparsity pattern is not symmetric");
  }
  return chain;
}

double dirichlet_form(const ReversibleChain& chain, const Eigen::VectorXd& f) {
  KahanAccumulator acc;
  for (int k = 0; k < chain.conduct.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, k); it; ++it) {
      double d = f(it.row()) - f(it.col());
      acc.add(0.5 * it.value() * d * d);
    }
  return acc.value();
}

double generator_pairing(const ReversibleChain& chain, const Eigen::VectorXd& f) {
  KahanAccumulator acc;
  for (int k = 0; k < chain.conduct.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, k); it; ++it)
      acc.add(-f(it.row()) * it.value() * (f(it.col()) - f(it.row())));
  return acc.value();
}

PotentialSolution equilibrium_potential(const ReversibleChain& chain, const std::vector<int>& A,
                                        const std::vector<int>& B, const Eigen::VectorXd* guess,
                                        const std::vector<int>* coarse_labels) {
  if (A.empty() || B.empty()) throw Error("equilibrium potential needs non-empty A and B");
  int n = chain.n();
  std::vector<char> boundary(n, 0), in_a(n, 0);
  for (int v : A) {
    boundary[v] = 1;
    in_a[v] = 1;
  }
  for (int v : B) {
    if (in_a[v]) throw Error("A and B overlap");
    boundary[v] = 1;
  }

  InteriorSolver solver(chain, boundary);
  if (coarse_labels && !coarse_labels->empty()) {
    solver.coarse_groups.resize(solver.interior.size());
    for (size_t i = 0; i < solver.interior.size(); ++i)
      solver.coarse_groups[i] = (*coarse_labels)[solver.interior[i]];
  }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  for (int v : A) h(v) = 1.0;
  if (!solver.interior.empty()) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(solver.interior.size());
    for (int a : A)
      for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, a); it; ++it)
        if (solver.slot[it.row()] >= 0) rhs(solver.slot[it.row()]) += it.value();
    Eigen::VectorXd hi;
    if (guess) {
      Eigen::VectorXd g0(solver.interior.size());
      for (size_t i = 0; i < solver.interior.size(); ++i) g0(i) = (*guess)(solver.interior[i]);
      hi = solver.solve(rhs, &g0);
    } else {
      hi = solver.solve(rhs);
    }
    for (size_t i = 0; i < solver.interior.size(); ++i) h(solver.interior[i]) = hi(i);
  }

  PotentialSolution sol;
  sol.h = h;
  sol.cap = dirichlet_form(chain, h);
  sol.method = solver.method;
  sol.iterations = solver.iterations;
  sol.residual = solver.last_residual;
  double worst = 0.0;
  for (int v : solver.interior) {
    double flux = 0.0, scale = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, v); it; ++it) {
      flux += it.value() * (h(it.row()) - h(v));
      scale += it.value();
    }
    if (scale > 0.0) worst = std::max(worst, std::abs(flux) / scale);
  }
  sol.local_imbalance = worst;
  return sol;
}

double capacity(const ReversibleChain& chain, const std::vector<int>& A,
                const std::vector<int>& B) {
  return equilibrium_potential(chain, A, B).cap;
}

void FlowField::add(int from, int to, double value) {
  if (value == 0.0) return;
  if (from < to)
    values_[edge_key(from, to)] += value;
  else
    values_[edge_key(to, from)] -= value;
}

double FlowField::get(int from, int to) const {
  auto it = from < to ? values_.find(edge_key(from, to)) : values_.find(edge_key(to, from));
  if (it == values_.end()) return 0.0;
  return from < to ? it->second : -it->second;
}

FlowField FlowField::from_raw_entries(const std::vector<std::tuple<int, int, double>>& entries) {
  std::unordered_map<std::uint64_t, double> forward, backward;
  for (const auto& [from, to, value] : entries) {
    if (from < to)
      forward[edge_key(from, to)] += value;
    else
      backward[edge_key(to, from)] += value;
  }
  for (const auto& [key, value] : backward) {
    auto it = forward.find(key);
    double fwd = it == forward.end() ? 0.0 : it->second;
    if (it != forward.end() && rel_diff(fwd, -value) > 1e-12 && fwd != -value)
      throw NotAFlow("directed entries are not antisymmetric", static_cast<int>(key >> 32));
    if (it == forward.end()) forward[key] = -value;
  }
  FlowField f;
  for (const auto& [key, value] : forward)
    f.add(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu), value);
  return f;
}

std::unordered_map<int, double> FlowField::divergence() const {
  std::unordered_map<int, double> div;
  for_each([&](int from, int to, double value) {
    div[from] += value;
    div[to] -= value;
  });
  return div;
}

double FlowField::max_abs() const {
  double m = 0.0;
  for (const auto& [key, value] : values_) m = std::max(m, std::abs(value));
  return m;
}

double flow_divergence(const FlowField& flow, int v) {
  double d = 0.0;
  flow.for_each([&](int from, int to, double value) {
    if (from == v) d += value;
    if (to == v) d -= value;
  });
  return d;
}

double flow_norm_sq(const ReversibleChain& chain, const FlowField& flow) {
  KahanAccumulator acc;
  flow.for_each([&](int from, int to, double value) {
    double c = chain.conduct.coeff(from, to);
    acc.add(value * value / c);  // inf when supported off an edge; validate catches it
  });
  return acc.value();
}

double validate_flow(const ReversibleChain& chain, const FlowField& flow,
                     const std::vector<int>& A, const std::vector<int>& B) {
  double tol = 1e-12 * std::max(flow.max_abs(), 1e-300);
  bool bad_support = false;
  int bad_vertex = -1;
  flow.for_each([&](int from, int to, double value) {
    if (value != 0.0 && chain.conduct.coeff(from, to) <= 0.0) {
      bad_support = true;
      bad_vertex = from;
    }
  });
  if (bad_support) throw NotAFlow("flow supported on a zero-rate edge", bad_vertex);

  std::vector<char> in_a(chain.n(), 0), in_b(chain.n(), 0);
  for (int v : A) in_a[v] = 1;
  for (int v : B) in_b[v] = 1;
  auto div = flow.divergence();
  double source = 0.0, sink = 0.0, worst = 0.0;
  int worst_vertex = -1;
  for (const auto& [v, d] : div) {
    if (in_a[v])
      source += d;
    else if (in_b[v])
      sink += d;
    else if (std::abs(d) > worst) {
      worst = std::abs(d);
      worst_vertex = v;
    }
  }
  if (worst > tol) throw NotAFlow("non-zero divergence at an interior vertex", worst_vertex);
  if (std::abs(source + sink) > 1e-9 * std::max(std::abs(source), 1e-300))
    throw NotAFlow("source and sink values do not cancel", -1);
  return source;
}

double thomson_bound(const ReversibleChain& chain, const FlowField& flow,
                     const std::vector<int>& A, const std::vector<int>& B) {
  double gamma = validate_flow(chain, flow, A, B);
  double norm_sq = flow_norm_sq(chain, flow);
  if (norm_sq == 0.0) return 0.0;
  return gamma * gamma / norm_sq;
}

FlowField harmonic_flow(const ReversibleChain& chain, const Eigen::VectorXd& h) {
  FlowField f;
  for (int k = 0; k < chain.conduct.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, k); it; ++it)
      if (it.row() < it.col())
        f.add(static_cast<int>(it.row()), static_cast<int>(it.col()),
              it.value() * (h(it.row()) - h(it.col())));
  return f;
}

ReversibleChain trace_chain(const ReversibleChain& chain, const std::vector<int>& W) {
  int n = chain.n();
  int nw = static_cast<int>(W.size());
  if (nw == 0 || nw > n) throw Error("trace set must be a non-empty subset");
  std::vector<int> wslot(n, -1);
  for (int i = 0; i < nw; ++i) wslot[W[i]] = i;

  double pw = 0.0;
  Eigen::VectorXd pi_w(nw);
  for (int i = 0; i < nw; ++i) {
    pi_w(i) = chain.pi(W[i]);
    pw += pi_w(i);
  }
  pi_w /= pw;

  Eigen::MatrixXd rw = Eigen::MatrixXd::Zero(nw, nw);
  for (int i = 0; i < nw; ++i)
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, W[i]); it; ++it)
      if (wslot[it.row()] >= 0) rw(i, wslot[it.row()]) += it.value() / chain.pi(W[i]);

  if (nw < n) {
    std::vector<char> boundary(n, 0);
    for (int v : W) boundary[v] = 1;
    InteriorSolver solver(chain, boundary);
    // Hitting-location probabilities: one factorization, one solve per target.
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool direct = solver.m.rows() <= 20000;
    if (direct) {
      ldlt.compute(solver.m);
      if (ldlt.info() != Eigen::Success)
        throw SingularSystem("trace interior factorization failed");
    }
    for (int j = 0; j < nw; ++j) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(solver.m.rows());
      for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, W[j]); it; ++it)
        if (solver.slot[it.row()] >= 0) rhs(solver.slot[it.row()]) += it.value();
      Eigen::VectorXd p = direct ? Eigen::VectorXd(ldlt.solve(rhs)) : solver.solve(rhs);
      for (int i = 0; i < nw; ++i) {
        double extra = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, W[i]); it; ++it)
          if (solver.slot[it.row()] >= 0)
            extra += it.value() / chain.pi(W[i]) * p(solver.slot[it.row()]);
        rw(i, j) += extra;
      }
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < nw; ++i) {
    double total_out = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, W[i]); it; ++it)
      total_out += it.value() / chain.pi(W[i]);
    for (int j = 0; j < nw; ++j) {
      if (i == j || rw(i, j) == 0.0) continue;
      if (rw(i, j) > total_out * (1.0 + 1e-9))
        throw Error("trace rate exceeds the total exit rate; solver inconsistency");
      trips.emplace_back(i, j, pi_w(i) * rw(i, j));
    }
  }
  // Conductance symmetry holds up to solver error; from_conductances
  // validates at 1e-12, which hitting-probability solves may miss, so
  // symmetrize here and keep the defect as an internal check.
  Eigen::SparseMatrix<double> cmat(nw, nw);
  cmat.setFromTriplets(trips.begin(), trips.end());
  std::vector<Eigen::Triplet<double>> sym;
  for (int k = 0; k < cmat.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(cmat, k); it; ++it) {
      double mirror = cmat.coeff(it.col(), it.row());
      if (rel_diff(it.value(), mirror) > 1e-8)
        throw NotReversible("trace conductances lost symmetry beyond tolerance");
      sym.emplace_back(it.row(), it.col(), 0.5 * (it.value() + mirror));
    }
  return ReversibleChain::from_conductances(pi_w, sym);
}

double mean_hitting_time(const ReversibleChain& chain, int v, const std::vector<int>& B) {
  for (int b : B)
    if (b == v) return 0.0;
  PotentialSolution sol = equilibrium_potential(chain, {v}, B);
  double magic = chain.pi.dot(sol.h) / sol.cap;

  int n = chain.n();
  std::vector<char> boundary(n, 0);
  for (int b : B) boundary[b] = 1;
  InteriorSolver solver(chain, boundary);
  Eigen::VectorXd rhs(solver.interior.size());
  for (size_t i = 0; i < solver.interior.size(); ++i) rhs(i) = chain.pi(solver.interior[i]);
  Eigen::VectorXd e = solver.solve(rhs);
  double direct = e(solver.slot[v]);

  if (rel_diff(magic, direct) > std::max(1e-8, 100.0 * sol.residual))
    throw Error("mean hitting time: capacity identity and direct solve disagree");
  return magic;
}

Eigen::VectorXd harmonic_extension(const ReversibleChain& chain, const std::vector<int>& W,
                                   const Eigen::VectorXd& g_on_w) {
  int n = chain.n();
  std::vector<char> boundary(n, 0);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
  for (size_t i = 0; i < W.size(); ++i) {
    boundary[W[i]] = 1;
    full(W[i]) = g_on_w(i);
  }
  InteriorSolver solver(chain, boundary);
  if (solver.interior.empty()) return full;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(solver.interior.size());
  for (int w : W)
    for (Eigen::SparseMatrix<double>::InnerIterator it(chain.conduct, w); it; ++it)
      if (solver.slot[it.row()] >= 0) rhs(solver.slot[it.row()]) += it.value() * full(w);
  Eigen::VectorXd hi = solver.solve(rhs);
  for (size_t i = 0; i < solver.interior.size(); ++i) full(solver.interior[i]) = hi(i);
  return full;
}

}  // namespace incap
