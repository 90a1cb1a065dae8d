#include "incap/ladder.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "incap/errors.hpp"
#include "incap/numeric.hpp"

namespace incap {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Explicit slice chain (small levels; tests and cross-checks)
// ---------------------------------------------------------------------------

int TwoSiteSliceChain::singleton_index(int site) const {
  for (size_t i = 0; i < sites.size(); ++i)
    if (sites[i] == site) return static_cast<int>(i);
  throw Error("site not in slice component");
}

int TwoSiteSliceChain::split_index(int site_v, int site_w, int k) const {
  if (k == level) return singleton_index(site_v);
  if (k == 0) return singleton_index(site_w);
  if (site_v > site_w) {
    std::swap(site_v, site_w);
    k = level - k;
  }
  for (size_t i = sites.size(); i < states.size(); ++i)
    if (states[i].v == site_v && states[i].w == site_w && states[i].k == k)
      return static_cast<int>(i);
  throw Error("split state not present (sites are not adjacent)");
}

TwoSiteSliceChain build_slice(const SiteGraph& g, const std::vector<int>& component, int level) {
  if (level < 1) throw Error("slice level must be >= 1");
  TwoSiteSliceChain slice;
  slice.level = level;
  slice.sites = component;
  std::sort(slice.sites.begin(), slice.sites.end());

  for (int v : slice.sites) slice.states.push_back({v, -1, level});
  std::vector<std::pair<int, int>> lines;
  for (size_t i = 0; i < slice.sites.size(); ++i)
    for (size_t j = i + 1; j < slice.sites.size(); ++j)
      if (g.edge(slice.sites[i], slice.sites[j])) lines.emplace_back(slice.sites[i], slice.sites[j]);
  for (auto [v, w] : lines)
    for (int k = 1; k <= level - 1; ++k) slice.states.push_back({v, w, k});

  auto index_of = [&](int v, int w, int k) { // k particles at v on line (v,w)
    if (k == level) return slice.singleton_index(v);
    if (k == 0) return slice.singleton_index(w);
    return slice.split_index(v, w, k);
  };

  std::vector<Eigen::Triplet<double>> rate_trips;
  for (auto [v, w] : lines) {
    for (int k = 1; k <= level; ++k) {
      double r = std::pow(g.measure(v), k - 1) * std::pow(g.measure(w), level - k) *
                 g.conductance(v, w);
      int a = index_of(v, w, k), b = index_of(v, w, k - 1);
      rate_trips.emplace_back(a, b, r);
      rate_trips.emplace_back(b, a, r);
    }
  }
  int n = static_cast<int>(slice.states.size());
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
  slice.chain = ReversibleChain::from_rates(pi, rate_trips);
  return slice;
}

Eigen::MatrixXd slice_trace(const TwoSiteSliceChain& slice, const std::vector<int>& anchors) {
  int na = static_cast<int>(anchors.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(na, na);
  if (na < 2) return out;
  std::vector<int> w;
  for (int a : anchors) w.push_back(slice.singleton_index(a));
  ReversibleChain traced = trace_chain(slice.chain, w);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j)
      if (i != j) out(i, j) = traced.conduct.coeff(i, j) / traced.pi(i);
  return out;
}

// ---------------------------------------------------------------------------
// Log-domain slice reduction
//
// A slice is a star of one-dimensional birth-death lines glued at the
// singleton states. Each line reduces to a single effective conductance and
// a resistance-ratio interpolation profile, leaving a dense problem on the
// component sites. This stays accurate at depths where the raw rates span
// hundreds of orders of magnitude and a generic sparse solve would not.
// ---------------------------------------------------------------------------

namespace {

struct LineReduction {
  double log_conductance;   // of the whole line between its endpoint singletons
  std::vector<double> rho;  // rho[k] = R(0..k)/R(0..level), k = 0..level
};

LineReduction reduce_line(double log_mv, double log_mw, double log_c, int level) {
  // Inverse rates 1/r_k, r_k = m_v^{k-1} m_w^{level-k} c, scaled by the max.
  std::vector<double> neg_log_r(level + 1);
  double peak = kNegInf;
  for (int k = 1; k <= level; ++k) {
    neg_log_r[k] = -((k - 1) * log_mv + (level - k) * log_mw + log_c);
    peak = std::max(peak, neg_log_r[k]);
  }
  LineReduction line;
  line.rho.assign(level + 1, 0.0);
  double total = 0.0;
  for (int k = 1; k <= level; ++k) {
    total += std::exp(neg_log_r[k] - peak);
    line.rho[k] = total;
  }
  for (int k = 1; k <= level; ++k) line.rho[k] /= total;
  line.log_conductance = -(peak + std::log(total));
  return line;
}

struct SliceReduction {
  std::vector<LineReduction> lines;  // aligned with LadderComponent::lines
  double log_scale;                  // max line log conductance
  Eigen::MatrixXd laplacian;         // scaled conductance Laplacian on component sites
};

SliceReduction reduce_slice(const SiteGraph& g, const std::vector<int>& sites,
                            const std::vector<std::pair<int, int>>& lines, int level) {
  SliceReduction red;
  red.log_scale = kNegInf;
  for (auto [v, w] : lines) {
    red.lines.push_back(reduce_line(std::log(g.measure(v)), std::log(g.measure(w)),
                                    std::log(g.conductance(v, w)), level));
    red.log_scale = std::max(red.log_scale, red.lines.back().log_conductance);
  }
  int ns = static_cast<int>(sites.size());
  red.laplacian = Eigen::MatrixXd::Zero(ns, ns);
  auto slot = [&](int site) {
    return static_cast<int>(std::lower_bound(sites.begin(), sites.end(), site) - sites.begin());
  };
  for (size_t e = 0; e < lines.size(); ++e) {
    double c = std::exp(red.lines[e].log_conductance - red.log_scale);
    int i = slot(lines[e].first), j = slot(lines[e].second);
    red.laplacian(i, i) += c;
    red.laplacian(j, j) += c;
    red.laplacian(i, j) -= c;
    red.laplacian(j, i) -= c;
  }
  return red;
}

// Schur complement of the scaled Laplacian onto the anchor slots: effective
// anchor-to-anchor conductances, i.e. the trace rates of the symmetric slice.
Eigen::MatrixXd anchor_schur(const Eigen::MatrixXd& laplacian, const std::vector<int>& anchor_slots,
                             const std::vector<int>& other_slots) {
  int na = static_cast<int>(anchor_slots.size());
  int ni = static_cast<int>(other_slots.size());
  Eigen::MatrixXd aa(na, na), ai(na, ni), ii(ni, ni);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) aa(i, j) = laplacian(anchor_slots[i], anchor_slots[j]);
  if (ni == 0) return aa;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < ni; ++j) ai(i, j) = laplacian(anchor_slots[i], other_slots[j]);
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j < ni; ++j) ii(i, j) = laplacian(other_slots[i], other_slots[j]);
  // Row-equilibrate the interior block before factorizing.
  Eigen::VectorXd d = ii.diagonal().cwiseMax(1e-300);
  Eigen::MatrixXd solved = (d.asDiagonal().inverse() * ii)
                               .partialPivLu()
                               .solve(d.asDiagonal().inverse() * ai.transpose());
  return aa - ai * solved;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ladder component accessors
// ---------------------------------------------------------------------------

int LadderComponent::site_slot(int site) const {
  auto it = std::lower_bound(sites.begin(), sites.end(), site);
  if (it == sites.end() || *it != site) throw Error("site not in ladder component");
  return static_cast<int>(it - sites.begin());
}

int LadderComponent::anchor_slot(int site) const {
  for (size_t i = 0; i < anchors.size(); ++i)
    if (anchors[i] == site) return static_cast<int>(i);
  return -1;
}

int LadderComponent::line_slot(int v, int w) const {
  if (v > w) std::swap(v, w);
  for (size_t i = 0; i < lines.size(); ++i)
    if (lines[i].first == v && lines[i].second == w) return static_cast<int>(i);
  return -1;
}

double LadderComponent::g_at(int site, int level) const {
  if (level <= 0 || level > depth) return 0.0;
  int a = anchor_slot(site);
  if (a < 0) throw Error("rescaled profile is defined on anchor columns only");
  return g(level, a);
}

double LadderComponent::rhat(int level, int a_site, int b_site) const {
  double lv = rhat_log[level - 1](anchor_slot(a_site), anchor_slot(b_site));
  return lv == kNegInf ? 0.0 : std::exp(lv);
}

double LadderComponent::ghat_single(int site, int level) const {
  if (level == 0) return 0.0;
  if (level > depth) throw Error("harmonic extension requested beyond the solved depth");
  if (ext_singleton.empty()) throw Error("resolvent was solved without harmonic extensions");
  return ext_singleton[level - 1][site_slot(site)];
}

double LadderComponent::ghat_split(int site_a, int site_b, int k_at_a, int level) const {
  if (level == 0) return 0.0;
  if (level > depth) throw Error("harmonic extension requested beyond the solved depth");
  if (ext_singleton.empty()) throw Error("resolvent was solved without harmonic extensions");
  if (k_at_a == level) return ghat_single(site_a, level);
  if (k_at_a == 0) return ghat_single(site_b, level);
  int line = site_a < site_b ? line_slot(site_a, site_b) : line_slot(site_b, site_a);
  if (line < 0) throw Error("split state requested on a non-edge");
  int k = site_a < site_b ? k_at_a : level - k_at_a;
  return ext_pair[level - 1][line][k - 1];
}

const LadderComponent& ResolventSolution::component_of(int site, const ContractedGraph& c) const {
  int j = c.component_of[site];
  if (j < 0) throw Error("site is not in the contracted interior");
  return components[j];
}

// ---------------------------------------------------------------------------
// Resolvent solve
// ---------------------------------------------------------------------------

double default_lambda(const SiteGraph& g) {
  double m_star = 0.0;
  for (int v = 0; v < g.size(); ++v)
    if (g.measure(v) < 1.0 - 1e-12) m_star = std::max(m_star, g.measure(v));
  return 0.5 * (std::sqrt(m_star) + 1.0);
}

ResolventSolution solve_resolvent(const SiteGraph& g, const ContractedGraph& c, int depth,
                                  double lambda, bool with_extensions) {
  if (depth < 2) throw Error("resolvent depth must be >= 2");
  double m_star = 0.0;
  for (int v = 0; v < g.size(); ++v)
    if (g.measure(v) < 1.0 - 1e-12) m_star = std::max(m_star, g.measure(v));
  if (!(lambda > std::sqrt(m_star) && lambda < 1.0))
    throw BadLambda("lambda must lie strictly between " + std::to_string(std::sqrt(m_star)) +
                    " and 1");
  if (depth * std::log(1.0 / lambda) > 700.0)
    throw BadLambda("lambda^-depth overflows a double; raise lambda or lower the depth");

  ResolventSolution sol;
  sol.lambda = lambda;
  sol.depth = depth;
  double log_lambda = std::log(lambda);

  for (const auto& comp_sites : c.components) {
    LadderComponent comp;
    comp.sites = comp_sites;
    comp.depth = depth;
    comp.lambda = lambda;
    for (int v : comp.sites)
      if (c.sx[v] > 0.0 || c.sy[v] > 0.0) comp.anchors.push_back(v);
    for (size_t i = 0; i < comp.sites.size(); ++i)
      for (size_t j = i + 1; j < comp.sites.size(); ++j)
        if (g.edge(comp.sites[i], comp.sites[j])) comp.lines.emplace_back(comp.sites[i], comp.sites[j]);

    int na = static_cast<int>(comp.anchors.size());
    comp.g0 = Eigen::MatrixXd::Zero(depth + 2, na);
    comp.g = Eigen::MatrixXd::Zero(depth + 2, na);

    // Per-level slice reductions and trace tables.
    std::vector<SliceReduction> reductions;
    reductions.reserve(depth);
    std::vector<int> anchor_slots, other_slots;
    for (size_t i = 0; i < comp.sites.size(); ++i) {
      if (std::find(comp.anchors.begin(), comp.anchors.end(), comp.sites[i]) != comp.anchors.end())
        anchor_slots.push_back(static_cast<int>(i));
      else
        other_slots.push_back(static_cast<int>(i));
    }
    comp.rhat_log.assign(depth, Eigen::MatrixXd::Constant(na, na, kNegInf));
    for (int lvl = 1; lvl <= depth; ++lvl) {
      reductions.push_back(reduce_slice(g, comp.sites, comp.lines, lvl));
      if (na >= 2 && !comp.lines.empty()) {
        Eigen::MatrixXd schur =
            anchor_schur(reductions.back().laplacian, anchor_slots, other_slots);
        for (int i = 0; i < na; ++i)
          for (int j = 0; j < na; ++j)
            if (i != j && -schur(i, j) > 0.0)
              comp.rhat_log[lvl - 1](i, j) = std::log(-schur(i, j)) + reductions.back().log_scale;
      }
    }

    // Driving data in log domain.
    comp.f_log.assign(depth, Eigen::MatrixXd(1, na));
    comp.h_log.assign(depth, Eigen::MatrixXd(1, na));
    for (int ai = 0; ai < na; ++ai) {
      int v = comp.anchors[ai];
      double mv = g.measure(v), log_mv = std::log(mv);
      double s_total = c.sx[v] + c.sy[v];
      double log_s = std::log(s_total);
      double log_sx = c.sx[v] > 0.0 ? std::log(c.sx[v]) : kNegInf;
      for (int lvl = 1; lvl <= depth; ++lvl) {
        double f;
        if (lvl == depth)
          f = std::log(1.0 / lambda - 1.0) + (depth - 1) * log_mv - (2 * depth - 1) * log_lambda +
              log_s;
        else if (lvl == 1)
          f = std::log(1.0 / (lambda * lambda) - mv / (lambda * lambda * lambda) +
                       mv / (lambda * lambda)) +
              log_s;
        else
          f = std::log((1.0 / lambda - 1.0) * (1.0 - mv / lambda)) + (lvl - 1) * log_mv -
              (2 * lvl - 1) * log_lambda + log_s;
        comp.f_log[lvl - 1](0, ai) = f;
        double h = log_sx == kNegInf ? kNegInf : (lvl - 1) * log_mv - lvl * log_lambda + log_sx;
        if (lvl < depth && log_sx != kNegInf) h += std::log(1.0 - mv);
        comp.h_log[lvl - 1](0, ai) = h;
      }
    }

    // Row-equilibrated system (I - P) g0 = h/D with D = f + holding rate.
    auto log_hor = [&](int ai, int lvl) {  // couples (ai, lvl) <-> (ai, lvl+1)
      int v = comp.anchors[ai];
      return lvl * std::log(g.measure(v)) - (2 * lvl + 1) * log_lambda +
             std::log(c.sx[v] + c.sy[v]);
    };
    auto log_vert = [&](int lvl, int ai, int bi) {
      double lr = comp.rhat_log[lvl - 1](ai, bi);
      return lr == kNegInf ? kNegInf : lr - 2 * lvl * log_lambda;
    };
    int unknowns = na * depth;
    auto flat = [&](int ai, int lvl) { return (lvl - 1) * na + ai; };
    std::vector<double> log_d(unknowns);
    for (int lvl = 1; lvl <= depth; ++lvl)
      for (int ai = 0; ai < na; ++ai) {
        LogSumAccumulator acc;
        acc.add(comp.f_log[lvl - 1](0, ai));
        if (lvl < depth) acc.add(log_hor(ai, lvl));
        if (lvl > 1) acc.add(log_hor(ai, lvl - 1));
        for (int bi = 0; bi < na; ++bi)
          if (bi != ai) acc.add(log_vert(lvl, ai, bi));
        log_d[flat(ai, lvl)] = acc.value();
      }
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(unknowns);
    for (int lvl = 1; lvl <= depth; ++lvl)
      for (int ai = 0; ai < na; ++ai) {
        int row = flat(ai, lvl);
        trips.emplace_back(row, row, 1.0);
        if (lvl < depth)
          trips.emplace_back(row, flat(ai, lvl + 1), -std::exp(log_hor(ai, lvl) - log_d[row]));
        if (lvl > 1)
          trips.emplace_back(row, flat(ai, lvl - 1), -std::exp(log_hor(ai, lvl - 1) - log_d[row]));
        for (int bi = 0; bi < na; ++bi)
          if (bi != ai && log_vert(lvl, ai, bi) != kNegInf)
            trips.emplace_back(row, flat(bi, lvl), -std::exp(log_vert(lvl, ai, bi) - log_d[row]));
        double lh = comp.h_log[lvl - 1](0, ai);
        rhs(row) = lh == kNegInf ? 0.0 : std::exp(lh - log_d[row]);
      }
    Eigen::SparseMatrix<double> m(unknowns, unknowns);
    m.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(m);
    if (lu.info() != Eigen::Success) throw SingularSystem("ladder resolvent factorization failed");
    Eigen::VectorXd g0 = lu.solve(rhs);

    double rhs_peak = rhs.lpNorm<Eigen::Infinity>();
    double res = (m * g0 - rhs).lpNorm<Eigen::Infinity>() / std::max(rhs_peak, 1e-300);
    sol.residual = std::max(sol.residual, res);

    for (int lvl = 1; lvl <= depth; ++lvl)
      for (int ai = 0; ai < na; ++ai) {
        comp.g0(lvl, ai) = g0(flat(ai, lvl));
        comp.g(lvl, ai) = std::exp(-lvl * log_lambda) * g0(flat(ai, lvl));
      }

    if (with_extensions) {
      comp.ext_singleton.assign(depth, std::vector<double>(comp.sites.size(), 0.0));
      comp.ext_pair.assign(depth, {});
      for (int lvl = 1; lvl <= depth; ++lvl) {
        const SliceReduction& red = reductions[lvl - 1];
        int ns = static_cast<int>(comp.sites.size());
        Eigen::VectorXd values(ns);
        // Anchor singletons carry the profile; the rest is harmonic, which
        // after line reduction is a dense Dirichlet problem on the sites.
        for (int i = 0; i < na; ++i) values(anchor_slots[i]) = comp.g(lvl, i);
        if (!other_slots.empty()) {
          int ni = static_cast<int>(other_slots.size());
          Eigen::MatrixXd ii(ni, ni);
          Eigen::VectorXd b = Eigen::VectorXd::Zero(ni);
          for (int i = 0; i < ni; ++i)
            for (int j = 0; j < ni; ++j) ii(i, j) = red.laplacian(other_slots[i], other_slots[j]);
          for (int i = 0; i < ni; ++i)
            for (int aj = 0; aj < na; ++aj)
              b(i) -= red.laplacian(other_slots[i], anchor_slots[aj]) * values(anchor_slots[aj]);
          Eigen::VectorXd d = ii.diagonal().cwiseMax(1e-300);
          Eigen::VectorXd x = (d.asDiagonal().inverse() * ii)
                                  .partialPivLu()
                                  .solve(d.asDiagonal().inverse() * b);
          for (int i = 0; i < ni; ++i) values(other_slots[i]) = x(i);
        }
        auto& singles = comp.ext_singleton[lvl - 1];
        for (int i = 0; i < ns; ++i) singles[i] = values(i);
        auto& pairs = comp.ext_pair[lvl - 1];
        pairs.resize(comp.lines.size());
        for (size_t e = 0; e < comp.lines.size(); ++e) {
          auto [v, w] = comp.lines[e];
          double fv = values(comp.site_slot(v)), fw = values(comp.site_slot(w));
          pairs[e].resize(std::max(0, lvl - 1));
          for (int k = 1; k <= lvl - 1; ++k)
            pairs[e][k - 1] = fw + red.lines[e].rho[k] * (fv - fw);
        }
      }
    }
    sol.components.push_back(std::move(comp));
  }
  return sol;
}

// ---------------------------------------------------------------------------
// The sharp constant
// ---------------------------------------------------------------------------

namespace {

// sum_{l>=0} m^l (1 + g_l - g_{l+1})^2 (x side) or m^l (g_{l+1} - g_l)^2
// (y side), and the corresponding linear forms of the simplified expression.
struct AnchorSums {
  double quad_x = 0.0, quad_y = 0.0, lin_x = 0.0, lin_y = 0.0;
};

AnchorSums anchor_series(const LadderComponent& comp, int ai, double m) {
  // Terms pair a decaying m^l against profile differences that grow like
  // lambda^-l; the products decay geometrically but the factors individually
  // overflow/underflow, so every term is assembled from logarithms.
  AnchorSums s;
  KahanAccumulator qx, qy, lx, ly;
  double log_m = std::log(m);
  for (int lvl = 0; lvl <= comp.depth - 1; ++lvl) {
    double d = comp.g(lvl + 1, ai) - comp.g(lvl, ai);
    double lw = lvl * log_m;
    double one_minus = 1.0 - d;
    if (one_minus != 0.0) {
      double lt = lw + std::log(std::abs(one_minus));
      qx.add(std::exp(lt + std::log(std::abs(one_minus))));
      lx.add(std::copysign(std::exp(lt), one_minus));
    }
    if (d != 0.0) {
      double lt = lw + std::log(std::abs(d));
      qy.add(std::exp(lt + std::log(std::abs(d))));
      ly.add(std::copysign(std::exp(lt), d));
    }
  }
  s.quad_x = qx.value();
  s.quad_y = qy.value();
  s.lin_x = lx.value();
  s.lin_y = ly.value();
  return s;
}

}  // namespace

KConstant compute_k_constant(const SiteGraph& g, const ContractedGraph& c,
                             const ResolventSolution& sol) {
  double direct = 0.0;  // neighborhood-to-neighborhood conductance
  for (int a : c.nx)
    for (int b : c.ny)
      direct += g.conductance(a, b) / ((1.0 - g.measure(a)) * (1.0 - g.measure(b)));

  KahanAccumulator quad, lin_x, lin_y;
  for (const auto& comp : sol.components) {
    for (size_t ai = 0; ai < comp.anchors.size(); ++ai) {
      int v = comp.anchors[ai];
      AnchorSums s = anchor_series(comp, static_cast<int>(ai), g.measure(v));
      if (c.sx[v] > 0.0) {
        quad.add(c.sx[v] * s.quad_x);
        lin_x.add(c.sx[v] * s.lin_x);
      }
      if (c.sy[v] > 0.0) {
        quad.add(c.sy[v] * s.quad_y);
        lin_y.add(c.sy[v] * s.lin_y);
      }
    }
    for (size_t ai = 0; ai < comp.anchors.size(); ++ai)
      for (size_t bi = ai + 1; bi < comp.anchors.size(); ++bi) {
        KahanAccumulator pair_sum;
        for (int lvl = 1; lvl <= comp.depth; ++lvl) {
          double lr = comp.rhat_log[lvl - 1](ai, bi);
          if (lr == kNegInf) continue;
          double d = comp.g(lvl, bi) - comp.g(lvl, ai);
          if (d == 0.0) continue;
          pair_sum.add(std::exp(lr + 2.0 * std::log(std::abs(d))));
        }
        quad.add(pair_sum.value());
      }
  }

  KConstant k;
  k.lambda = sol.lambda;
  k.depth = sol.depth;
  k.full_inverse = direct + quad.value();
  k.simplified_x = direct + lin_x.value();
  k.simplified_y = direct + lin_y.value();
  if (!(k.full_inverse > 0.0))
    throw Diverged("the inverse constant vanished; geometry has no third-scale channel");
  k.value = 1.0 / (6.0 * k.full_inverse);
  k.spread = std::max(rel_diff(k.full_inverse, k.simplified_x),
                      std::max(rel_diff(k.full_inverse, k.simplified_y),
                               rel_diff(k.simplified_x, k.simplified_y)));
  return k;
}

KConstant compute_k_constant(const SiteGraph& g, const ContractedGraph& c, KOptions opt) {
  double lambda = opt.lambda > 0.0 ? opt.lambda : default_lambda(g);
  int depth = opt.initial_depth;
  KConstant prev;
  bool have_prev = false;
  while (true) {
    ResolventSolution sol = solve_resolvent(g, c, depth, lambda, /*with_extensions=*/false);
    KConstant k = compute_k_constant(g, c, sol);
    if (have_prev && rel_diff(k.value, prev.value) < opt.depth_tol) {
      if (k.spread > opt.spread_tol)
        throw Diverged("constant forms disagree by " + std::to_string(k.spread) +
                       " at depth " + std::to_string(depth));
      return k;
    }
    prev = k;
    have_prev = true;
    if (depth >= opt.max_depth) {
      if (k.spread > opt.spread_tol)
        throw Diverged("constant forms disagree by " + std::to_string(k.spread) +
                       " at the depth cap");
      return k;
    }
    depth = std::min(2 * depth, opt.max_depth);
  }
}

IdentityReport verify_g_identities(const SiteGraph& g, const ContractedGraph& c,
                                   const ResolventSolution& sol) {
  IdentityReport report;
  // Column balance at every level, with the common m_v^{level-1} factored out
  // so the relative residual is meaningful at depth.
  for (const auto& comp : sol.components) {
    for (size_t ai = 0; ai < comp.anchors.size(); ++ai) {
      int v = comp.anchors[ai];
      double mv = g.measure(v);
      double s_total = c.sx[v] + c.sy[v];
      for (int lvl = 1; lvl <= comp.depth; ++lvl) {
        double t1 = lvl < comp.depth ? (1.0 - mv) * c.sx[v] : c.sx[v];
        double t2 = s_total * (comp.g(lvl - 1, ai) - comp.g(lvl, ai));
        double t3 = lvl < comp.depth
                        ? s_total * mv * (comp.g(lvl + 1, ai) - comp.g(lvl, ai))
                        : 0.0;
        double t4 = 0.0;
        for (size_t bi = 0; bi < comp.anchors.size(); ++bi) {
          if (bi == ai) continue;
          double lr = comp.rhat_log[lvl - 1](ai, bi);
          if (lr == kNegInf) continue;
          t4 += std::exp(lr - (lvl - 1) * std::log(mv)) * (comp.g(lvl, bi) - comp.g(lvl, ai));
        }
        double scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4)});
        if (scale > 0.0)
          report.balance_residual =
              std::max(report.balance_residual, std::abs(t1 + t2 + t3 + t4) / scale);
      }
    }
  }
  // Cross identity: x-side feed equals y-side drain at every level.
  for (int lvl = 1; lvl <= sol.depth; ++lvl) {
    double lhs = 0.0, rhs = 0.0;
    for (const auto& comp : sol.components)
      for (size_t ai = 0; ai < comp.anchors.size(); ++ai) {
        int v = comp.anchors[ai];
        double mpow = std::pow(g.measure(v), lvl - 1);
        double d = comp.g(lvl, ai) - comp.g(lvl - 1, ai);
        if (c.sx[v] > 0.0) lhs += c.sx[v] * mpow * (1.0 - d);
        if (c.sy[v] > 0.0) rhs += c.sy[v] * mpow * d;
      }
    double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale > 0.0)
      report.cross_residual = std::max(report.cross_residual, std::abs(lhs - rhs) / scale);
  }
  return report;
}

}  // namespace incap
