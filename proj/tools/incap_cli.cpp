// Command-line front end: ingestion, analysis pipelines, sweeps and report
// emission. Artifacts are plain JSON/CSV in an append-only run directory;
// identical inputs reproduce identical bytes.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "incap/errors.hpp"
#include "incap/graph_io.hpp"
#include "incap/hierarchy.hpp"
#include "incap/ladder.hpp"
#include "incap/measure.hpp"
#include "incap/sandwich.hpp"
#include "incap/simulate.hpp"
#include "incap/test_flow.hpp"
#include "incap/test_function.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace incap;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Append a run record (deduplicated) so long sweeps can resume.
void record_run(const fs::path& dir, const json& entry) {
  fs::create_directories(dir);
  fs::path mpath = dir / "manifest.json";
  json manifest = json::object();
  manifest["runs"] = json::array();
  if (fs::exists(mpath)) {
    std::ifstream in(mpath);
    try {
      manifest = json::parse(in);
    } catch (...) {
      manifest = json::object();
      manifest["runs"] = json::array();
    }
  }
  for (const auto& run : manifest["runs"])
    if (run == entry) return;
  manifest["runs"].push_back(entry);
  write_text(mpath, manifest.dump(2) + "\n");
}

struct DPolicy {
  double constant = 0.05;
  double schedule = -1.0;  // > 0: d_N = c / log(N + e)
  double at(int n) const {
    return schedule > 0.0 ? schedule / std::log(n + std::exp(1.0)) : constant;
  }
  json describe() const {
    if (schedule > 0.0) return json{{"schedule", schedule}};
    return json{{"constant", constant}};
  }
};

json hierarchy_json(const SiteGraph& g, const MetastableHierarchy& h) {
  json out;
  out["sites"] = g.names;
  json measure = json::object();
  for (int v = 0; v < g.size(); ++v) measure[g.names[v]] = g.measure(v);
  out["measure"] = measure;
  out["balance_residual"] = balance_residual(g);
  auto names = [&](const std::vector<int>& sites) {
    std::vector<std::string> out_names;
    for (int v : sites) out_names.push_back(g.names[v]);
    return out_names;
  };
  out["s_star"] = names(h.s_star);
  out["s_zero"] = names(h.s_zero);
  out["kappa2"] = h.kappa2();
  out["kappa3"] = h.kappa3();
  out["level2"] = json::array();
  for (const auto& block : h.level2) out["level2"].push_back(names(block));
  out["level3"] = json::array();
  for (const auto& block : h.level3) out["level3"].push_back(names(block));
  out["m_star"] = h.m_star;
  out["m_star_star"] = h.m_star_star;
  out["near_degenerate"] = names(h.near_degenerate);
  json rij = json::array();
  for (int i = 0; i < h.kappa2(); ++i)
    for (int j = i + 1; j < h.kappa2(); ++j) {
      json entry{{"blocks", {i, j}}};
      if (std::isfinite(h.rij(i, j))) {
        entry["resistance"] = h.rij(i, j);
        entry["rate_ij"] = h.r2nd(i, j);
        entry["rate_ji"] = h.r2nd(j, i);
      } else {
        entry["resistance"] = "inf";
        entry["rate_ij"] = 0.0;
        entry["rate_ji"] = 0.0;
      }
      rij.push_back(entry);
    }
  out["second_scale"] = rij;
  return out;
}

std::pair<int, int> resolve_pair(const SiteGraph& g, const MetastableHierarchy& h,
                                 const std::string& xname, const std::string& yname) {
  if (!xname.empty() && !yname.empty()) return {g.index_of(xname), g.index_of(yname)};
  if (h.s_star.size() != 2)
    throw AssumptionViolated(
        "geometry does not have exactly two condensing sites; pass --x and --y");
  return {h.s_star[0], h.s_star[1]};
}

json k_json(const KConstant& k, const IdentityReport& report) {
  return json{{"value", k.value},
              {"lambda", k.lambda},
              {"depth", k.depth},
              {"spread", k.spread},
              {"inverse_sixfold", k.full_inverse},
              {"simplified_x", k.simplified_x},
              {"simplified_y", k.simplified_y},
              {"identity_residuals",
               {{"balance", report.balance_residual}, {"cross", report.cross_residual}}}};
}

constexpr const char* kSandwichHeader =
    "N,d_N,lower_scaled,exact_scaled,upper_scaled,k_reference,"
    "solver_residual,flow_divergence_residual,solver_method,flow_depth,interface_width\n";

std::string sandwich_row(const CapacitySandwich& sw) {
  std::string row;
  row += std::to_string(sw.n_particles) + "," + fmt(sw.d_n) + "," + fmt(sw.lower_scaled) + "," +
         fmt(sw.exact_scaled) + "," + fmt(sw.upper_scaled) + "," + fmt(sw.k_reference) + "," +
         fmt(sw.solver_residual) + "," + fmt(sw.flow_interior_divergence) + "," +
         sw.solver_method + "," + std::to_string(sw.depth_flow) + "," +
         std::to_string(sw.interface_width) + "\n";
  return row;
}

int run(int argc, char** argv) {
  CLI::App app{"condensing inclusion process: metastable hierarchy, sharp third-scale "
               "constants, and capacity sandwiches"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string graph_path, out_dir = ".", xname, yname;
  app.add_option("--graph", graph_path, "graph-spec JSON file")->required();
  app.add_option("--out", out_dir, "artifact directory (default: current)");

  DPolicy dpol;
  double lambda = -1.0;
  int depth = -1;

  auto* analyze = app.add_subcommand("analyze", "metastable hierarchy of the geometry");

  auto* kcmd = app.add_subcommand("kconstant", "sharp third-scale constant for a pair");
  app.add_option("--x", xname, "first condensing site (default: derived when unique)")
      ->group("");  // shared by all pair-based commands via fallthrough
  app.add_option("--y", yname, "second condensing site")->group("");
  kcmd->add_option("--lambda", lambda, "ladder parameter in (sqrt(m*), 1)");
  std::vector<double> lambda_grid;
  kcmd->add_option("--lambda-grid", lambda_grid, "evaluate on a grid and report the spread")
      ->delimiter(',');
  kcmd->add_option("--depth", depth, "truncation depth (default: auto-double from 80)");

  auto* cap = app.add_subcommand("capacity", "capacity sandwich over an N sweep");
  std::vector<int> n_list{20, 40, 80};
  Index budget = 5'000'000;
  int flow_depth = -1, width = -1;
  cap->add_option("--n", n_list, "ascending particle counts")->delimiter(',');
  cap->add_option("--d-const", dpol.constant, "fixed diffusion parameter");
  cap->add_option("--d-schedule", dpol.schedule, "d_N = c / log(N + e)");
  cap->add_option("--lambda", lambda, "ladder parameter");
  cap->add_option("--flow-depth", flow_depth, "pin the test-flow truncation depth");
  cap->add_option("--width", width, "pin the test-function interface width");
  cap->add_option("--budget", budget, "state-count budget");

  auto* verify = app.add_subcommand("verify-test-objects",
                                    "identity residuals, divergence scan and sandwich at one N");
  int verify_n = 20;
  verify->add_option("--n", verify_n, "particle count");
  verify->add_option("--d-const", dpol.constant, "fixed diffusion parameter");
  verify->add_option("--lambda", lambda, "ladder parameter");

  auto* sim = app.add_subcommand("simulate", "exact-clock stochastic runs");
  int sim_n = 10, replicas = 100;
  std::uint64_t seed = 20240101, max_events = 1'000'000'000;
  std::string start_site, target_sites, alpha_scale;
  double alpha_mult = 1.0, window_mult = -1.0;
  sim->add_option("--n", sim_n, "particle count");
  sim->add_option("--d-const", dpol.constant, "fixed diffusion parameter");
  sim->add_option("--d-schedule", dpol.schedule, "d_N = c / log(N + e)");
  sim->add_option("--start", start_site, "site fully occupied at time zero")->required();
  sim->add_option("--targets", target_sites, "comma-separated condensed target sites");
  sim->add_option("--replicas", replicas, "independent replicas");
  sim->add_option("--seed", seed, "stream seed");
  sim->add_option("--max-events", max_events, "per-replica event cap");
  sim->add_option("--alpha-scale", alpha_scale, "census probe scale: theta1|theta2|theta3");
  sim->add_option("--alpha-mult", alpha_mult, "census probe multiplier");
  sim->add_option("--window-mult", window_mult,
                  "occupation window as a multiple of the probe scale");

  auto* sweep = app.add_subcommand("sweep", "hierarchy + constant + capacity sweep in one run");
  sweep->add_option("--n", n_list, "ascending particle counts")->delimiter(',');
  sweep->add_option("--d-const", dpol.constant, "fixed diffusion parameter");
  sweep->add_option("--d-schedule", dpol.schedule, "d_N = c / log(N + e)");
  sweep->add_option("--lambda", lambda, "ladder parameter");
  sweep->add_option("--budget", budget, "state-count budget");

  auto* report = app.add_subcommand("report", "concatenate artifacts into report.md");

  CLI11_PARSE(app, argc, argv);

  SiteGraph g = load_site_graph_file(graph_path);
  MetastableHierarchy h = metastable_hierarchy(g);
  fs::path dir(out_dir);
  fs::create_directories(dir);

  if (*analyze) {
    write_text(dir / "hierarchy.json", hierarchy_json(g, h).dump(2) + "\n");
    record_run(dir, json{{"command", "analyze"},
                         {"graph", graph_path},
                         {"artifacts", {"hierarchy.json"}}});
    std::printf("kappa2=%d kappa3=%d -> %s\n", h.kappa2(), h.kappa3(),
                (dir / "hierarchy.json").c_str());
    return 0;
  }

  if (*kcmd) {
    auto [x, y] = resolve_pair(g, h, xname, yname);
    ContractedGraph c = contract_graph(g, x, y);
    KOptions opt;
    if (lambda > 0.0) opt.lambda = lambda;
    if (depth > 0) opt.initial_depth = opt.max_depth = depth;
    KConstant k = compute_k_constant(g, c, opt);
    ResolventSolution sol = solve_resolvent(g, c, k.depth, k.lambda, false);
    json out = k_json(k, verify_g_identities(g, c, sol));
    if (!lambda_grid.empty()) {
      json grid = json::array();
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (double lam : lambda_grid) {
        KOptions gopt = opt;
        gopt.lambda = lam;
        KConstant kg = compute_k_constant(g, c, gopt);
        grid.push_back(json{{"lambda", lam}, {"value", kg.value}, {"depth", kg.depth}});
        lo = std::min(lo, kg.value);
        hi = std::max(hi, kg.value);
      }
      out["lambda_grid"] = grid;
      out["lambda_grid_spread"] = (hi - lo) / hi;
    }
    write_text(dir / "kconstant.json", out.dump(2) + "\n");
    record_run(dir, json{{"command", "kconstant"},
                         {"graph", graph_path},
                         {"x", g.names[x]},
                         {"y", g.names[y]},
                         {"artifacts", {"kconstant.json"}}});
    std::printf("K=%s (depth %d, spread %s) -> %s\n", fmt(k.value).c_str(), k.depth,
                fmt(k.spread).c_str(), (dir / "kconstant.json").c_str());
    return 0;
  }

  if (*cap || *sweep) {
    auto [x, y] = resolve_pair(g, h, xname, yname);
    ContractedGraph c = contract_graph(g, x, y);
    KOptions kopt;
    if (lambda > 0.0) kopt.lambda = lambda;
    KConstant k = compute_k_constant(g, c, kopt);
    std::string csv = kSandwichHeader;
    for (int n : n_list) {
      SandwichOptions opt;
      opt.lambda = lambda;
      opt.flow_depth = flow_depth;
      opt.interface_width = width;
      opt.memory_budget = budget;
      opt.k_reference = 1.0 / (2.0 * k.value);
      CapacitySandwich sw = capacity_sandwich(g, n, dpol.at(n), opt);
      if (!sw.ordered()) throw Error("sandwich ordering violated at N=" + std::to_string(n));
      csv += sandwich_row(sw);
      std::printf("N=%3d d=%s: %s <= %s <= %s (target %s)\n", n, fmt(sw.d_n).c_str(),
                  fmt(sw.lower_scaled).c_str(), fmt(sw.exact_scaled).c_str(),
                  fmt(sw.upper_scaled).c_str(), fmt(sw.k_reference).c_str());
    }
    write_text(dir / "sandwich.csv", csv);
    json artifacts{"sandwich.csv"};
    if (*sweep) {
      write_text(dir / "hierarchy.json", hierarchy_json(g, h).dump(2) + "\n");
      ResolventSolution sol = solve_resolvent(g, c, k.depth, k.lambda, false);
      write_text(dir / "kconstant.json", k_json(k, verify_g_identities(g, c, sol)).dump(2) + "\n");
      artifacts = json{"sandwich.csv", "hierarchy.json", "kconstant.json"};
    }
    record_run(dir, json{{"command", *sweep ? "sweep" : "capacity"},
                         {"graph", graph_path},
                         {"n", n_list},
                         {"d", dpol.describe()},
                         {"artifacts", artifacts}});
    return 0;
  }

  if (*verify) {
    auto [x, y] = resolve_pair(g, h, xname, yname);
    ContractedGraph c = contract_graph(g, x, y);
    double d = dpol.at(verify_n);
    double lam = lambda > 0.0 ? lambda : default_lambda(g);
    json out;
    {
      ResolventSolution sol = solve_resolvent(g, c, std::max(80, verify_n), lam);
      IdentityReport rep = verify_g_identities(g, c, sol);
      out["identity_residuals"] = {{"balance", rep.balance_residual},
                                   {"cross", rep.cross_residual}};
    }
    SandwichOptions opt;
    opt.lambda = lam;
    CapacitySandwich sw = capacity_sandwich(g, verify_n, d, opt);
    out["sandwich"] = {{"n", sw.n_particles},
                       {"d", sw.d_n},
                       {"lower_scaled", sw.lower_scaled},
                       {"exact_scaled", sw.exact_scaled},
                       {"upper_scaled", sw.upper_scaled},
                       {"k_reference", sw.k_reference},
                       {"ordered", sw.ordered()},
                       {"solver_residual", sw.solver_residual}};
    out["dirichlet_breakdown"] = {{"total", sw.breakdown.total},
                                  {"t1", sw.breakdown.t1},
                                  {"t2", sw.breakdown.t2},
                                  {"t3", sw.breakdown.t3},
                                  {"t4", sw.breakdown.t4},
                                  {"t5", sw.breakdown.t5},
                                  {"t6", sw.breakdown.t6},
                                  {"mixing", sw.breakdown.mixing},
                                  {"remainder", sw.breakdown.remainder},
                                  {"difference_bound_constant",
                                   sw.breakdown.diff_bound_constant}};
    out["flow"] = {{"depth", sw.depth_flow},
                   {"value", sw.flow_value},
                   {"interior_divergence", sw.flow_interior_divergence}};
    // Finite-N lambda sensitivity of the scaled upper bound: reported only.
    {
      json sens = json::array();
      double root = std::sqrt(h.m_star);
      for (double lam2 :
           {0.5 * (root + 1.0), 0.75 * root + 0.25, 0.25 * root + 0.75}) {
        SandwichOptions o2;
        o2.lambda = lam2;
        o2.k_reference = sw.k_reference;
        o2.interface_width = sw.interface_width;
        o2.flow_depth = sw.depth_flow;
        CapacitySandwich s2 = capacity_sandwich(g, verify_n, d, o2);
        sens.push_back(json{{"lambda", lam2}, {"upper_scaled", s2.upper_scaled}});
      }
      out["lambda_sensitivity"] = sens;
    }
    write_text(dir / "verify.json", out.dump(2) + "\n");
    record_run(dir, json{{"command", "verify-test-objects"},
                         {"graph", graph_path},
                         {"n", verify_n},
                         {"artifacts", {"verify.json"}}});
    std::printf("verify-test-objects: ordered=%d -> %s\n", int(sw.ordered()),
                (dir / "verify.json").c_str());
    return 0;
  }

  if (*sim) {
    int n = sim_n;
    double d = dpol.at(n);
    ConfigSpace cs = ConfigSpace::enumerate(g, n, d, budget);
    SimConfig cfg;
    cfg.seed = seed;
    cfg.replicas = replicas;
    cfg.max_events = max_events;
    int start = g.index_of(start_site);
    Occupation occ(g.size(), 0);
    occ[start] = n;
    Index start_idx = cs.rank(occ);
    json summary{{"n", n}, {"d", d}, {"seed", seed}, {"replicas", replicas},
                 {"start", start_site}};

    if (!alpha_scale.empty()) {
      double theta = 0.0;
      if (alpha_scale == "theta1")
        theta = 1.0 / d;
      else if (alpha_scale == "theta2")
        theta = n / (d * d);
      else if (alpha_scale == "theta3")
        theta = double(n) * n / (d * d * d);
      else
        throw ParseError("alpha-scale must be theta1, theta2 or theta3");
      double probe = alpha_mult * theta;
      double window = window_mult > 0.0 ? window_mult * theta : 0.0;
      CensusResult census = timescale_census(cs, h, start_idx, probe, window, cfg);
      json law = json::object();
      for (const auto& [site, p] : census.projected)
        law[site < 0 ? "other" : g.names[site]] = p;
      summary["census"] = {{"probe_time", probe},
                           {"projected", law},
                           {"outside_fraction", census.outside_fraction}};
      write_text(dir / "simulate.json", summary.dump(2) + "\n");
      record_run(dir, json{{"command", "simulate-census"},
                           {"graph", graph_path},
                           {"seed", seed},
                           {"artifacts", {"simulate.json"}}});
      std::printf("census at t=%s -> %s\n", fmt(probe).c_str(), (dir / "simulate.json").c_str());
      return 0;
    }

    if (target_sites.empty()) throw ParseError("simulate needs --targets or --alpha-scale");
    std::vector<Index> targets;
    std::string token;
    for (std::istringstream ss(target_sites); std::getline(ss, token, ',');) {
      Occupation t(g.size(), 0);
      t[g.index_of(token)] = n;
      targets.push_back(cs.rank(t));
    }
    MeasureTable mt = stationary_measure(cs);
    MagicComparison cmp = empirical_vs_magic(cs, mt, start_idx, targets, cfg);
    std::string csv = "replica,time\n";
    {
      HittingSample sample = simulate_until(cs, start_idx, targets, cfg);
      for (size_t r = 0; r < sample.times.size(); ++r)
        csv += std::to_string(r) + "," + fmt(sample.times[r]) + "\n";
    }
    write_text(dir / "simulate.csv", csv);
    summary["mean"] = cmp.sim_mean;
    summary["stderr"] = cmp.sim_stderr;
    summary["exact_mean"] = cmp.exact;
    summary["within_three_sigma"] = cmp.pass;
    write_text(dir / "simulate.json", summary.dump(2) + "\n");
    record_run(dir, json{{"command", "simulate"},
                         {"graph", graph_path},
                         {"seed", seed},
                         {"artifacts", {"simulate.csv", "simulate.json"}}});
    std::printf("mean=%s stderr=%s exact=%s %s\n", fmt(cmp.sim_mean).c_str(),
                fmt(cmp.sim_stderr).c_str(), fmt(cmp.exact).c_str(),
                cmp.pass ? "(within 3 sigma)" : "(OUTSIDE 3 sigma)");
    return 0;
  }

  if (*report) {
    std::string md = "# Run report\n\n";
    for (const char* name :
         {"hierarchy.json", "kconstant.json", "verify.json", "simulate.json"}) {
      if (!fs::exists(dir / name)) continue;
      std::ifstream in(dir / name);
      std::ostringstream buf;
      buf << in.rdbuf();
      md += std::string("## ") + name + "\n\n```json\n" + buf.str() + "```\n\n";
    }
    if (fs::exists(dir / "sandwich.csv")) {
      std::ifstream in(dir / "sandwich.csv");
      md += "## sandwich.csv\n\n";
      std::string line;
      bool first = true;
      while (std::getline(in, line)) {
        std::string row = "| ";
        for (char ch : line) row += (ch == ',') ? std::string(" | ") : std::string(1, ch);
        md += row + " |\n";
        if (first) {
          int cols = 1;
          for (char ch : line) cols += (ch == ',');
          md += "|";
          for (int i = 0; i < cols; ++i) md += " --- |";
          md += "\n";
          first = false;
        }
      }
      md += "\n";
    }
    write_text(dir / "report.md", md);
    std::printf("-> %s\n", (dir / "report.md").c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const SpaceTooLarge& e) {
    std::fprintf(stderr, "space too large: %s\n", e.what());
    return 3;
  } catch (const AssumptionViolated& e) {
    std::fprintf(stderr, "assumption violated: %s\n", e.what());
    return 4;
  } catch (const Diverged& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return 5;
  } catch (const NotIrreducible& e) {
    std::fprintf(stderr, "not irreducible: %s\n", e.what());
    return 6;
  } catch (const NotReversible& e) {
    std::fprintf(stderr, "not reversible: %s\n", e.what());
    return 7;
  } catch (const BadLambda& e) {
    std::fprintf(stderr, "bad lambda: %s\n", e.what());
    return 8;
  } catch (const NotAFlow& e) {
    std::fprintf(stderr, "not a flow: %s\n", e.what());
    return 9;
  } catch (const EventCapExceeded& e) {
    std::fprintf(stderr, "event cap exceeded: %s\n", e.what());
    return 10;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
