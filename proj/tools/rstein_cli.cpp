// rstein: batch front-end for the bound engines, simulators and property suites.
//
// Exit codes: 0 success, 1 property failure, 2 usage error, 3 cap exceeded.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rstein/rstein.hpp"

namespace {

using namespace rstein;
using nlohmann::json;

enum Exit { kOk = 0, kPropertyFailure = 1, kUsage = 2, kCap = 3 };

struct Common {
  std::uint64_t seed = 1;
  std::uint64_t samples = 100000;
  unsigned threads = default_threads();
  std::string out;
  std::string format = "csv";
  std::string store;
};

void add_common(CLI::App* cmd, Common& c, bool sampling) {
  cmd->add_option("--seed", c.seed, "top-level RNG seed");
  if (sampling) {
    cmd->add_option("--samples", c.samples, "Monte Carlo sample count")->check(CLI::Range(10000ULL, 1ULL << 40));
    cmd->add_option("--threads", c.threads, "worker threads (default: RSTEIN_THREADS or hardware)")
        ->check(CLI::PositiveNumber);
  }
  cmd->add_option("--out", c.out, "output path (default: stdout)");
  cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--store", c.store, "append the table with provenance to this result store");
}

void emit(const Common& c, const Table& t, const json& config, const json& extra = json::object()) {
  Provenance prov{c.seed, config.dump()};
  std::string text;
  if (c.format == "json") {
    json doc = extra;
    doc["table"] = to_json(t);
    doc["provenance"] = prov.to_json();
    text = doc.dump(2) + "\n";
  } else {
    text = to_csv(t);
    if (!extra.empty()) std::cerr << extra.dump(2) << "\n";
  }
  if (c.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(c.out);
    require(bool(f), "cannot open output file " + c.out);
    f << text;
  }
  if (!c.store.empty()) append_result(c.store, t, prov, c.format == "json");
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), "cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DomainError(path + ": " + e.what());
  }
}

int report_properties(const std::vector<PropertyResult>& results, const Common& c, const json& config) {
  Table t;
  t.columns = {"property", "instances", "failures", "worst", "passed", "seed"};
  for (const auto& r : results)
    t.add_row({r.name, static_cast<std::int64_t>(r.instances), static_cast<std::int64_t>(r.failures),
               r.worst, r.passed(), static_cast<std::int64_t>(c.seed)});
  emit(c, t, config);
  bool ok = true;
  for (const auto& r : results)
    if (!r.passed()) {
      ok = false;
      std::cerr << "counterexample for '" << r.name << "': " << r.counterexample.dump() << "\n";
    }
  return ok ? kOk : kPropertyFailure;
}

// ---------------------------------------------------------------------------

struct TwoRunsOptions {
  std::string coeffs_file;
  std::vector<std::size_t> indicator_n;
  std::vector<double> z_grid;
  double z_step = 0.25;
  double big_o = 1.0;
  double c_exp = 1.0;
};

struct TwoRunsInput {
  std::string label;
  std::int64_t n;
  CoefficientSequence coeffs;
};

std::vector<TwoRunsInput> two_runs_inputs(TwoRunsOptions& o) {
  std::vector<TwoRunsInput> in;
  if (!o.coeffs_file.empty()) {
    const json j = read_json_file(o.coeffs_file);
    auto seq = coefficients_from_json(j.at("coeffs"));
    if (j.contains("big_o")) o.big_o = j.at("big_o").get<double>();
    if (j.contains("c_exp")) o.c_exp = j.at("c_exp").get<double>();
    require(o.big_o > 0.0 && o.c_exp > 0.0, "big_o and c_exp must be positive");
    const auto len = static_cast<std::int64_t>(seq.length());
    in.push_back({o.coeffs_file, len, std::move(seq)});
  }
  for (auto n : o.indicator_n)
    in.push_back({"indicator", static_cast<std::int64_t>(n), CoefficientSequence::indicator(n)});
  require(!in.empty(), "give --coeffs or --indicator-n");
  return in;
}

// Explicit grid, else step, 2 step, ... up to the admissible range (possibly empty).
std::vector<double> z_grid_for(const TwoRunsOptions& o, double range) {
  if (!o.z_grid.empty()) return o.z_grid;
  std::vector<double> zs;
  for (int i = 1; i * o.z_step <= range + 1e-12; ++i) zs.push_back(i * o.z_step);
  return zs;
}

int cmd_tworuns(TwoRunsOptions o, const Common& c, bool simulate) {
  const auto inputs = two_runs_inputs(o);
  const GammaConstants k{o.big_o, o.c_exp};
  Table t;
  t.columns = {"n", "z", "C_n", "var_g", "gamma_n", "bound_rhs", "ratio_hat", "ci_low", "ci_high",
               "admissible", "seed"};
  json models = json::array();
  for (const auto& in : inputs) {
    const TwoRunsModel m(in.coeffs);
    const double range = admissible_range(m);
    auto zs = z_grid_for(o, range);
    std::vector<TailEstimate> est;
    if (simulate && !zs.empty()) {
      McConfig cfg{c.seed, c.samples, c.threads};
      est = tail_ratios(TwoRunsSampler(m), zs, cfg);
    }
    if (zs.empty()) {
      std::cerr << "warning: admissible range " << range << " for n=" << in.n
                << " is below the smallest grid point\n";
      t.add_row({in.n, std::string("no admissible z"), m.c_n(), m.var_g(), std::string(),
                 std::string(), std::string(), std::string(), std::string(), false,
                 static_cast<std::int64_t>(c.seed)});
    }
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double z = zs[i];
      const double g = gamma_n(m, z, k);
      const bool adm = z >= 0.0 && z <= range && (1.0 + z * z) * g <= 1.0;
      std::vector<Cell> row{in.n, z, m.c_n(), m.var_g(), g, (1.0 + z * z) * g};
      if (simulate) {
        row.insert(row.end(), {est[i].ratio_hat, est[i].ci_low, est[i].ci_high});
      } else {
        row.insert(row.end(), {std::string(), std::string(), std::string()});
      }
      row.push_back(adm);
      row.push_back(static_cast<std::int64_t>(c.seed));
      t.add_row(std::move(row));
    }
    models.push_back({{"source", in.label}, {"n", in.n}, {"admissible_range", range},
                      {"C_n", m.c_n()}, {"var_g", m.var_g()}});
  }
  const json config{{"command", simulate ? "tworuns-simulate" : "tworuns-bound"},
                    {"big_o", o.big_o}, {"c_exp", o.c_exp}, {"samples", simulate ? c.samples : 0},
                    {"indicator_n", o.indicator_n}, {"coeffs", o.coeffs_file}, {"z_grid", o.z_grid}};
  const json extra{{"constants",
                    {{"big_o", {{"value", o.big_o}, {"provenance", "caller constant; unspecified O(1) in source"}}},
                     {"c_exp", {{"value", o.c_exp}, {"provenance", "caller constant; unspecified rate in source"}}}}},
                   {"models", models}};
  emit(c, t, config, extra);
  return kOk;
}

// ---------------------------------------------------------------------------

struct SubgraphOptions {
  std::string pattern_file;
  std::string pattern_name = "K3";
  int n = 36;
  double p = 0.3;
  std::vector<double> t_grid{0.0, 0.5, 1.0, 1.5, 2.0};
  double c1 = 1.0, c2 = 1.0, zhang_c = 1.0;
  std::size_t cap = kDefaultCatalogCap;
  std::vector<double> rate_compare;
};

int cmd_subgraph(const SubgraphOptions& o, const Common& c, bool simulate) {
  const PatternGraph g = o.pattern_file.empty() ? PatternGraph::named(o.pattern_name)
                                                : pattern_from_json(read_json_file(o.pattern_file));
  require(o.p > 0.0 && o.p < 1.0, "-p must lie in (0,1)");
  require(o.c1 > 0.0 && o.c2 > 0.0 && o.zhang_c > 0.0, "constants must be positive");
  const json config{{"command", simulate ? "subgraph-simulate" : "subgraph-bound"},
                    {"pattern", to_json(g)}, {"n", o.n}, {"p", o.p}, {"t_grid", o.t_grid},
                    {"c1", o.c1}, {"c2", o.c2}, {"zhang_c", o.zhang_c},
                    {"samples", simulate ? c.samples : 0}, {"rate_compare", o.rate_compare}};

  if (!o.rate_compare.empty()) {
    Table t;
    t.columns = {"p", "q", "t", "psi_min", "corollary_rate", "zhang_rate", "zhang_over_corollary", "seed"};
    for (double p : o.rate_compare) {
      require(p > 0.0 && p < 1.0, "--rate-compare values must lie in (0,1)");
      const double psi = psi_min(g, o.n, p);
      for (double tt : o.t_grid) {
        const double a = corollary_rate(psi, p, tt), b = zhang_rate(psi, p, tt);
        t.add_row({p, 1.0 - p, tt, psi, a, b, b / a, static_cast<std::int64_t>(c.seed)});
      }
    }
    emit(c, t, config);
    return kOk;
  }

  const CopyCatalog cat(g, o.n, o.p, o.cap);
  const auto in = make_bound_inputs(cat);
  std::vector<TailEstimate> est;
  if (simulate) {
    McConfig cfg{c.seed, c.samples, c.threads};
    est = tail_ratios(SubgraphSampler(cat, in.sigma2), o.t_grid, cfg);
  }
  Table t;
  t.columns = {"t", "theorem_rhs", "corollary_rhs", "zhang_piecewise", "zhang_simplified",
               "informative_flag", "corollary_admissible", "psi_min", "sigma2", "d_neighbors",
               "sigma_lb_certified"};
  if (simulate) t.columns.insert(t.columns.end(), {"ratio_hat", "ci_low", "ci_high", "hits"});
  t.columns.push_back("seed");
  for (std::size_t i = 0; i < o.t_grid.size(); ++i) {
    const double tt = o.t_grid[i];
    const auto th = theorem_bound(in, tt);
    const auto co = corollary_bound(in, tt, o.c1, o.c2);
    const auto zh = zhang_bound(in.psi_min, o.n, o.p, tt, o.zhang_c);
    std::vector<Cell> row{tt, th.rhs, co.rhs};
    if (zh.piecewise) row.emplace_back(*zh.piecewise);
    else row.emplace_back(std::string("undefined at p=1/2"));
    row.insert(row.end(), {zh.simplified, th.informative, co.admissible(), in.psi_min, in.sigma2,
                           static_cast<std::int64_t>(in.d_neighbors), in.size_certified()});
    if (simulate)
      row.insert(row.end(), {est[i].ratio_hat, est[i].ci_low, est[i].ci_high,
                             static_cast<std::int64_t>(est[i].hits)});
    row.push_back(static_cast<std::int64_t>(c.seed));
    t.add_row(std::move(row));
  }
  if (!in.size_certified())
    std::cerr << "warning: sigma lower bound not certified (n < 4 v^2 = "
              << 4 * g.vertices() * g.vertices() << ")\n";
  const json extra{
      {"constants",
       {{"psi_min", in.psi_min},
        {"sigma2", in.sigma2},
        {"sigma2_lower_bound", in.sigma2_lower_bound()},
        {"sigma_lb_certified", in.size_certified()},
        {"D", in.d_neighbors},
        {"copies", cat.size()},
        {"aut", cat.aut()},
        {"log10_c_G0", log_c_g0(g) / std::log(10.0)},
        {"c_hat_G0", c_hat_g0(g)},
        {"log10_C_c1_c2", log_corollary_constant(g, o.c1, o.c2) / std::log(10.0)},
        {"corollary_t_limit", corollary_t_limit(in, o.c1)},
        {"zhang_C", {{"value", o.zhang_c}, {"provenance", "unspecified in source"}}}}}};
  emit(c, t, config, extra);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moderate deviation bounds and checks for Rademacher functionals"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t cases = 1000;
  bool inject = false;
  auto* verify = app.add_subcommand("verify-core", "operator identities and Gaussian inequalities");
  add_common(verify, common, false);
  verify->add_option("--cases", cases, "random instances per property");
  verify->add_flag("--inject-fault", inject, "negate L^{-1} to exercise the failure path");

  std::uint64_t lemma_cases = 2000;
  auto* lemmas = app.add_subcommand("lemmas-check", "subgraph lemma suites by exact enumeration");
  add_common(lemmas, common, false);
  lemmas->add_option("--cases", lemma_cases, "random instances for the randomized suites");

  TwoRunsOptions tr;
  auto add_tworuns = [&](CLI::App* cmd, bool sampling) {
    add_common(cmd, common, sampling);
    cmd->add_option("--coeffs", tr.coeffs_file, "JSON {coeffs:{offset,values}, big_o, c_exp}");
    cmd->add_option("--indicator-n", tr.indicator_n, "use a = 1 on 1..n (repeatable)");
    cmd->add_option("--z", tr.z_grid, "explicit z grid");
    cmd->add_option("--z-step", tr.z_step, "grid step up to the admissible range")->check(CLI::PositiveNumber);
    cmd->add_option("--big-o", tr.big_o, "O(1) prefactor")->check(CLI::PositiveNumber);
    cmd->add_option("--c-exp", tr.c_exp, "exponent constant")->check(CLI::PositiveNumber);
  };
  auto* tw_bound = app.add_subcommand("tworuns-bound", "2-runs bound table");
  add_tworuns(tw_bound, false);
  auto* tw_sim = app.add_subcommand("tworuns-simulate", "2-runs bound with Monte Carlo tail ratios");
  add_tworuns(tw_sim, true);

  SubgraphOptions sg;
  auto add_subgraph = [&](CLI::App* cmd, bool sampling) {
    add_common(cmd, common, sampling);
    cmd->add_option("--pattern", sg.pattern_file, "pattern JSON {vertices, edges}");
    cmd->add_option("--pattern-name", sg.pattern_name, "K<k>, P<k> or C<k>");
    cmd->add_option("-n", sg.n, "host vertex count")->check(CLI::PositiveNumber);
    cmd->add_option("-p", sg.p, "edge probability");
    cmd->add_option("--t", sg.t_grid, "t grid");
    cmd->add_option("--c1", sg.c1, "corollary constant c1")->check(CLI::PositiveNumber);
    cmd->add_option("--c2", sg.c2, "corollary constant c2")->check(CLI::PositiveNumber);
    cmd->add_option("--zhang-c", sg.zhang_c, "comparison constant")->check(CLI::PositiveNumber);
    cmd->add_option("--cap", sg.cap, "copy catalog cap");
    cmd->add_option("--rate-compare", sg.rate_compare, "p values for a rate comparison table");
  };
  auto* sg_bound = app.add_subcommand("subgraph-bound", "subgraph count bound table");
  add_subgraph(sg_bound, false);
  auto* sg_sim = app.add_subcommand("subgraph-simulate", "subgraph bounds with Monte Carlo tail ratios");
  add_subgraph(sg_sim, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*verify) {
      const json config{{"command", "verify-core"}, {"cases", cases}, {"inject_fault", inject}};
      auto results = verify_core(cases, common.seed,
                                 inject ? OperatorSet::negated_inverse() : OperatorSet::standard());
      const auto grid = gaussian_grid(200, -8.0, 8.0);
      // The w > z bound on |f_z| is only claimed where it can hold, z >= 0.
      PropertyResult gauss{"Gaussian bounds (grid, z >= 0 for |f_z| with w > z)"};
      gauss.instances = grid.points;
      gauss.failures = grid.abs_f_left + grid.abs_wf_left + grid.abs_wf_right + grid.mills +
                       (grid.abs_f_right - grid.abs_f_right_negative_z);
      if (gauss.failures) gauss.counterexample = {{"grid", "200x200 over [-8,8]^2"}};
      results.push_back(gauss);
      return report_properties(results, common, config);
    }
    if (*lemmas) {
      const json config{{"command", "lemmas-check"}, {"cases", lemma_cases}};
      return report_properties(lemmas_check(lemma_cases, common.seed), common, config);
    }
    if (*tw_bound) return cmd_tworuns(tr, common, false);
    if (*tw_sim) return cmd_tworuns(tr, common, true);
    if (*sg_bound) return cmd_subgraph(sg, common, false);
    if (*sg_sim) return cmd_subgraph(sg, common, true);
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCap;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
