// Command-line driver for the experiments and the exact oracle suite.

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#if __has_include(<json.hpp>)
#include <json.hpp>
#else
#include <nlohmann/json.hpp>
#endif

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nj/harness/config.hpp"
#include "nj/harness/csv.hpp"
#include "nj/harness/experiments.hpp"
#include "nj/harness/oracle_suite.hpp"
#include "nj/nj.hpp"

namespace {

using nj::harness::Config;
using nj::harness::ResultsRow;
using json = nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> threads;
  std::string out;
  bool json = false;
};

const std::set<std::string> kRunKeys = {"seed", "reps", "threads", "truth_multiplier"};

std::set<std::string> with_run_keys(std::set<std::string> keys) {
  keys.insert(kRunKeys.begin(), kRunKeys.end());
  return keys;
}

Config load_config(const CommonFlags& f, const std::set<std::string>& allowed) {
  Config cfg = f.config_path.empty() ? Config{} : Config::load(f.config_path, allowed);
  // Flags win over the file.
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (f.reps) cfg.set("reps", std::to_string(*f.reps));
  if (f.threads) cfg.set("threads", std::to_string(*f.threads));
  return cfg;
}

nj::harness::ExperimentOptions run_options(const Config& cfg, std::size_t default_reps) {
  nj::harness::ExperimentOptions opt;
  opt.seed = cfg.get_uint("seed", 1);
  opt.reps = cfg.get_uint("reps", default_reps);
  opt.threads = cfg.get_uint("threads", 1);
  opt.truth_multiplier = cfg.get_uint("truth_multiplier", 10);
  return opt;
}

json row_json(const ResultsRow& r) {
  return {{"experiment", r.experiment}, {"n", r.n},           {"L", r.L},
          {"estimator", r.estimator},   {"mean_vhat", r.mean_vhat}, {"true_var", r.true_var},
          {"ratio", r.ratio},           {"reps", r.reps},     {"degenerate", r.degenerate},
          {"seed", r.seed}};
}

void emit(const CommonFlags& f, const std::string& command, const std::vector<ResultsRow>& rows, json extra = json::object()) {
  if (!f.out.empty()) {
    std::ofstream os(f.out);
    if (!os) throw nj::InvalidArgument("cannot write " + f.out);
    nj::harness::write_csv(os, rows);
  }
  if (f.json) {
    json summary = {{"command", command}, {"rows", json::array()}};
    for (const auto& r : rows) summary["rows"].push_back(row_json(r));
    for (auto& [k, v] : extra.items()) summary[k] = v;
    std::cout << summary.dump(2) << '\n';
  } else if (f.out.empty()) {
    nj::harness::write_csv(std::cout, rows);
  }
}

int run_cycle(const CommonFlags& f) {
  const auto cfg = load_config(f, with_run_keys({"n", "pi", "noise_scale", "max_L"}));
  nj::harness::CycleDgpConfig dgp;
  dgp.n = cfg.get_uint("n", dgp.n);
  dgp.pi = cfg.get_double("pi", dgp.pi);
  dgp.noise_scale = cfg.get_double("noise_scale", dgp.noise_scale);
  const auto grid = nj::harness::grid_up_to(cfg.get_uint("max_L", 30));
  emit(f, "cycle", nj::harness::run_cycle_experiment(dgp, grid, run_options(cfg, 5000)));
  return 0;
}

int run_switchback(const CommonFlags& f) {
  const auto cfg = load_config(f, with_run_keys({"T", "ell", "b", "alpha", "rho", "pi", "max_L"}));
  nj::harness::SwitchbackDgpConfig dgp;
  dgp.T = cfg.get_uint("T", dgp.T);
  dgp.ell = cfg.get_uint("ell", dgp.ell);
  dgp.b = cfg.get_uint("b", dgp.b);
  dgp.alpha = cfg.get_double("alpha", dgp.alpha);
  dgp.rho = cfg.get_double("rho", dgp.rho);
  dgp.pi = cfg.get_double("pi", dgp.pi);
  const auto grid = nj::harness::grid_up_to(cfg.get_uint("max_L", 20));
  emit(f, "switchback", nj::harness::run_switchback_experiment(dgp, grid, run_options(cfg, 1000)));
  return 0;
}

int run_decay(const CommonFlags& f) {
  const auto cfg = load_config(f, with_run_keys({"T", "ell", "r", "kind", "rate", "max_lag", "drift_amplitude",
                                                 "drift_period", "pi"}));
  nj::harness::DecayDgpConfig dgp;
  dgp.T = cfg.get_uint("T", dgp.T);
  dgp.ell = cfg.get_uint("ell", dgp.ell);
  dgp.r = cfg.get_uint("r", dgp.r);
  const auto kind = cfg.get_string("kind", "geometric");
  if (kind == "geometric") dgp.kind = nj::harness::DecayKind::geometric;
  else if (kind == "polynomial") dgp.kind = nj::harness::DecayKind::polynomial;
  else throw nj::InvalidArgument("decay: kind must be geometric or polynomial");
  dgp.rate = cfg.get_double("rate", dgp.rate);
  dgp.max_lag = cfg.get_uint("max_lag", dgp.max_lag);
  dgp.drift_amplitude = cfg.get_double("drift_amplitude", dgp.drift_amplitude);
  dgp.drift_period = cfg.get_double("drift_period", dgp.drift_period);
  dgp.pi = cfg.get_double("pi", dgp.pi);
  emit(f, "decay", nj::harness::run_decay_experiment(dgp, run_options(cfg, 1000)));
  return 0;
}

int run_sutva(const CommonFlags& f) {
  const auto cfg = load_config(f, with_run_keys({"n", "n1", "effect", "effect_spread"}));
  nj::harness::SutvaConfig s;
  s.n = cfg.get_uint("n", s.n);
  s.n1 = cfg.get_uint("n1", s.n / 2);
  s.effect = cfg.get_double("effect", s.effect);
  s.effect_spread = cfg.get_double("effect_spread", s.effect_spread);
  emit(f, "sutva", nj::harness::run_sutva_experiment(s, run_options(cfg, 1000)));
  return 0;
}

// One row per random instance: mean_vhat carries the jackknife side and
// true_var the scaled Newey-West side.
int run_nw_check(const CommonFlags& f) {
  const auto cfg = load_config(f, with_run_keys({"max_n", "tolerance"}));
  const auto opt = run_options(cfg, 100);
  const std::size_t max_n = cfg.get_uint("max_n", 200);
  const double tol = cfg.get_double("tolerance", 1e-12);
  std::vector<ResultsRow> rows;
  double worst = 0.0;
  for (std::size_t k = 0; k < opt.reps; ++k) {
    nj::Rng rng = nj::substream(opt.seed, k);
    const auto inst = nj::harness::random_nw_instance(rng, max_n);
    const auto c = nj::nw_identity_check(inst.design, inst.model, inst.est, inst.w, inst.length, inst.half_width);
    worst = std::max(worst, c.relative_gap());
    ResultsRow r;
    r.experiment = "nw-check";
    r.n = inst.model.units();
    r.L = inst.length;
    r.estimator = "nj-cycle(M=" + std::to_string(inst.half_width) + ")";
    r.mean_vhat = c.lhs;
    r.true_var = c.rhs;
    r.ratio = c.rhs == 0.0 ? 1.0 : c.lhs / c.rhs;
    r.reps = 1;
    r.seed = opt.seed;
    rows.push_back(r);
  }
  emit(f, "nw-check", rows, {{"max_relative_gap", worst}, {"tolerance", tol}, {"passed", worst <= tol}});
  if (!f.json) std::cerr << "nw-check: max relative gap " << worst << (worst <= tol ? " (ok)" : " (FAILED)") << '\n';
  return worst <= tol ? 0 : 1;
}

int run_oracle_suite(const CommonFlags& f, const std::string& mutant) {
  const auto cfg = load_config(f, {"seed", "mutant", "mc_replicates"});
  nj::harness::SuiteOptions opt;
  opt.seed = cfg.get_uint("seed", 1);
  opt.mc_replicates = cfg.get_uint("mc_replicates", opt.mc_replicates);
  const std::string m = mutant.empty() ? cfg.get_string("mutant", "none") : mutant;
  if (m == "lambda") opt.lambda_scale = 2.0;
  else if (m == "leaky") opt.leaky_proxy = true;
  else if (m != "none") throw nj::InvalidArgument("oracle-suite: mutant must be none, lambda or leaky");
  const auto report = nj::harness::run_oracle_suite(opt);
  if (f.json) {
    json j = {{"command", "oracle-suite"}, {"seed", opt.seed}, {"mutant", m}, {"passed", report.all_passed()},
              {"checks", json::array()}};
    for (const auto& c : report.checks)
      j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"max_violation", c.max_violation},
                             {"tolerance", c.tolerance}, {"instances", c.instances}, {"detail", c.detail}});
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& c : report.checks)
      std::printf("%s  %-62s max=%.3g tol=%.3g n=%zu %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.max_violation,
                  c.tolerance, c.instances, c.detail.c_str());
  }
  return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neyman jackknife variance estimation: experiments and exact checks"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string mutant;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--reps", flags.reps, "replications (instances for nw-check)");
    sub->add_option("--threads", flags.threads, "worker threads");
    sub->add_option("--out", flags.out, "CSV output path (default: stdout)");
    sub->add_flag("--json", flags.json, "print a JSON summary instead of CSV on stdout");
  };

  auto* cycle = app.add_subcommand("cycle", "cycle-graph experiment, NJ-avg and NJ-cov over L");
  auto* switchback = app.add_subcommand("switchback", "switchback experiment with the Hajek estimator");
  auto* decay = app.add_subcommand("decay", "time series with decaying carryover and a right buffer");
  auto* sutva = app.add_subcommand("sutva", "no-interference CRD: jackknife against classical Neyman");
  auto* nw = app.add_subcommand("nw-check", "jackknife vs scaled circular Newey-West on random instances");
  auto* suite = app.add_subcommand("oracle-suite", "exact brute-force checks on small instances");
  for (auto* sub : {cycle, switchback, decay, sutva, nw, suite}) add_common(sub);
  suite->add_option("--mutant", mutant, "inject a fault: none, lambda or leaky");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cycle) return run_cycle(flags);
    if (*switchback) return run_switchback(flags);
    if (*decay) return run_decay(flags);
    if (*sutva) return run_sutva(flags);
    if (*nw) return run_nw_check(flags);
    if (*suite) return run_oracle_suite(flags, mutant);
  } catch (const nj::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
