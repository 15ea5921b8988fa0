#include <gtest/gtest.h>

#include <sstream>

#include "nj/harness/config.hpp"
#include "nj/harness/csv.hpp"
#include "nj/harness/experiments.hpp"
#include "nj/harness/oracle_suite.hpp"

using namespace nj;
using namespace nj::harness;

TEST(Config, ParsesAndRejects) {
  const auto cfg = Config::parse("# comment\n n = 12 \nrate=0.25 # trailing\n\n", {"n", "rate"});
  EXPECT_EQ(cfg.get_uint("n", 0), 12u);
  EXPECT_DOUBLE_EQ(cfg.get_double("rate", 0.0), 0.25);
  EXPECT_EQ(cfg.get_uint("missing", 7), 7u);
  EXPECT_THROW(Config::parse("sigma = 1\n", {"n"}), InvalidArgument);
  EXPECT_THROW(Config::parse("n = 1\nn = 2\n", {"n"}), InvalidArgument);
  EXPECT_THROW(Config::parse("n\n", {"n"}), InvalidArgument);
  EXPECT_THROW(Config::parse("n = -3\n", {"n"}).get_uint("n", 0), InvalidArgument);
  EXPECT_THROW(Config::parse("n = 1.5x\n", {"n"}).get_double("n", 0), InvalidArgument);
}

TEST(Csv, HeaderAndRoundTrip) {
  ResultsRow r;
  r.experiment = "cycle";
  r.n = 100;
  r.L = 3;
  r.estimator = "nj-avg";
  r.mean_vhat = 0.1;
  r.true_var = 1.0 / 3.0;
  r.ratio = 0.3;
  r.reps = 5;
  r.seed = 9;
  std::ostringstream os;
  write_csv(os, {r});
  std::istringstream in(os.str());
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, "experiment,n,L,estimator,mean_vhat,true_var,ratio,reps,degenerate,seed");
  std::vector<std::string> fields;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  ASSERT_EQ(fields.size(), 10u);
  EXPECT_EQ(fields[3], "nj-avg");
  EXPECT_EQ(std::stod(fields[5]), 1.0 / 3.0);
}

TEST(Dgp, CycleDeterministicEffect) {
  CycleDgpConfig cfg;
  cfg.n = 10;
  cfg.noise_scale = 0.0;
  cfg.zero_covariates = true;
  Rng rng = substream(1, 0);
  const auto inst = gen_cycle_model(cfg, rng);
  TreatmentVector all(10), none(10);
  for (std::size_t j = 0; j < 10; ++j) all.set(j, true);
  const auto y1 = inst.model.observed(all), y0 = inst.model.observed(none);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(y1[i] - y0[i], 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(inst.estimator.probs[0], 0.25);
  CycleDgpConfig bad;
  bad.n = 4;
  EXPECT_THROW(gen_cycle_model(bad, rng), InvalidArgument);
}

TEST(Dgp, CycleIpwEstimand) {
  CycleDgpConfig cfg;
  cfg.n = 8;
  Rng rng = substream(2, 0);
  const auto inst = gen_cycle_model(cfg, rng);
  const Estimator est = inst.estimator;
  double mean = 0.0;
  for (const auto& w : enumerate_support(inst.design)) mean += design_pmf(inst.design, w) * estimate(est, w, inst.model.observed(w));
  double tau = 0.0;
  for (double x : inst.covariates) tau += 1.0 + x;
  EXPECT_NEAR(mean, tau / 8.0, 1e-10);
}

TEST(Dgp, SwitchbackStructure) {
  SwitchbackDgpConfig cfg;
  cfg.T = 600;
  cfg.ell = 50;
  cfg.b = 20;
  Rng rng = substream(3, 0);
  const auto inst = gen_switchback_model(cfg, rng);
  EXPECT_TRUE(inst.model.approximately_measurable());
  EXPECT_EQ(inst.model.units(), 24u);
  EXPECT_EQ(inst.model.exposure_sets()[0], (IndexSet{0}));
  EXPECT_EQ(inst.model.exposure_sets()[2], (IndexSet{0, 1}));
  EXPECT_EQ(inst.model.exposure_sets()[3], (IndexSet{1}));
  EXPECT_DOUBLE_EQ(inst.estimator.treat_probs[2], 0.25);
  EXPECT_DOUBLE_EQ(inst.estimator.control_probs[2], 0.25);

  // Estimand identity: (1/2k) sum of unit contrasts = (1/T) sum_t contrasts.
  TreatmentVector ones(12), zeros(12);
  for (std::size_t j = 0; j < 12; ++j) ones.set(j, true);
  const auto u1 = inst.model.observed(ones), u0 = inst.model.observed(zeros);
  double lhs = 0.0;
  for (std::size_t i = 0; i < 24; ++i) lhs += u1[i] - u0[i];
  lhs /= 24.0;
  const auto s1 = switchback_series(cfg, inst.noise, ones), s0 = switchback_series(cfg, inst.noise, zeros);
  double rhs = 0.0;
  for (std::size_t t = 0; t < cfg.T; ++t) rhs += s1[t] - s0[t];
  rhs /= double(cfg.T);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Dgp, SwitchbackAlphaOneIsBipartite) {
  SwitchbackDgpConfig cfg;
  cfg.T = 300;
  cfg.ell = 30;
  cfg.b = 10;
  cfg.alpha = 1.0;
  Rng rng = substream(4, 0);
  const auto inst = gen_switchback_model(cfg, rng);
  Rng draws = substream(5, 0);
  for (int k = 0; k < 200; ++k) {
    const auto z = sample_treatments(inst.design, draws);
    auto z2 = sample_treatments(inst.design, draws);
    const std::size_t i = 1 + k % 9;
    z2.set(i, z[i]);
    z2.set(i - 1, z[i - 1]);
    EXPECT_NEAR(inst.model.observed(z)[2 * i], inst.model.observed(z2)[2 * i], 1e-12);
    EXPECT_NEAR(inst.model.observed(z)[2 * i + 1], inst.model.observed(z2)[2 * i + 1], 1e-12);
  }
}

TEST(Dgp, SwitchbackCarryoverDecays) {
  // Relaxed responsiveness: changing seeds far in the past moves B_i by at
  // most a geometric factor of the distance.
  SwitchbackDgpConfig cfg;
  cfg.T = 1000;
  cfg.ell = 50;
  cfg.b = 25;
  Rng rng = substream(6, 0);
  const auto inst = gen_switchback_model(cfg, rng);
  Rng draws = substream(7, 0);
  for (int k = 0; k < 50; ++k) {
    const auto z = sample_treatments(inst.design, draws);
    auto z2 = z;
    for (std::size_t j = 0; j + 1 < 10; ++j) z2.set(j, !z[j]);
    const double dist = double(cfg.ell);  // time steps from block 9's start to block 10
    const double bound = 2.0 * cfg.rho * std::pow(1.0 - cfg.alpha, dist);
    EXPECT_LE(std::abs(inst.model.observed(z)[20] - inst.model.observed(z2)[20]), bound);
  }
}

TEST(Dgp, Validation) {
  SwitchbackDgpConfig sw;
  sw.T = 1001;
  Rng rng = substream(8, 0);
  EXPECT_THROW(gen_switchback_model(sw, rng), InvalidArgument);
  sw.T = 1000;
  sw.b = 51;
  EXPECT_THROW(gen_switchback_model(sw, rng), InvalidArgument);
  DecayDgpConfig d;
  d.ell = 400;
  EXPECT_THROW(gen_decay_model(d), InvalidArgument);
  d.ell = 50;
  d.rate = 1.2;
  EXPECT_THROW(gen_decay_model(d), InvalidArgument);
}

TEST(Experiments, DeterministicAcrossThreadCounts) {
  CycleDgpConfig cfg;
  cfg.n = 30;
  ExperimentOptions one;
  one.reps = 100;
  one.seed = 5;
  ExperimentOptions four = one;
  four.threads = 4;
  std::ostringstream a, b;
  write_csv(a, run_cycle_experiment(cfg, {1, 3, 5}, one));
  write_csv(b, run_cycle_experiment(cfg, {1, 3, 5}, four));
  EXPECT_EQ(a.str(), b.str());
  ExperimentOptions few = one;
  few.reps = 50;
  EXPECT_THROW(run_cycle_experiment(cfg, {1}, few), InvalidArgument);
}

TEST(Experiments, RowsAndBestSelection) {
  CycleDgpConfig cfg;
  cfg.n = 30;
  ExperimentOptions opt;
  opt.reps = 100;
  const auto rows = run_cycle_experiment(cfg, {1, 2, 4, 8}, opt);
  EXPECT_EQ(rows_for(rows, "nj-avg").size(), 4u);
  const auto best = best_row(rows, "nj-avg");
  ASSERT_TRUE(best.has_value());
  for (const auto& r : rows_for(rows, "nj-avg")) {
    EXPECT_LE(best->mean_vhat, r.mean_vhat);
    EXPECT_NEAR(r.ratio, r.mean_vhat / r.true_var, 1e-15);
  }
  EXPECT_EQ(rows_for(rows, "nj-avg@best").size(), 1u);
}

TEST(Experiments, SutvaRows) {
  SutvaConfig cfg;
  ExperimentOptions opt;
  opt.reps = 50;
  const auto rows = run_sutva_experiment(cfg, opt);
  ASSERT_EQ(rows.size(), 2u);
  // Balanced CRD: the jackknife is (n/2)/(n/2 - 1) times the classical value.
  EXPECT_NEAR(rows[0].mean_vhat, rows[1].mean_vhat * 25.0 / 24.0, 1e-12 * rows[0].mean_vhat);
}

TEST(Experiments, UShape) {
  auto row = [](std::size_t l, double ratio) {
    ResultsRow r;
    r.L = l;
    r.ratio = ratio;
    return r;
  };
  EXPECT_TRUE(u_shaped({row(1, 2.0), row(2, 1.1), row(3, 1.5)}));
  EXPECT_FALSE(u_shaped({row(1, 2.0), row(2, 1.5), row(3, 1.1)}));
}

TEST(OracleSuite, RandomInstancesAreValid) {
  Rng rng = substream(9, 0);
  for (int k = 0; k < 10; ++k) {
    const auto inst = random_instance(rng);
    EXPECT_GE(inst.design.size(), 3u);
    EXPECT_GT(inst.lambda.value(), 0.0);
  }
}

TEST(OracleSuite, SmallRunPassesAndMutantsFail) {
  SuiteOptions opt;
  opt.seed = 3;
  opt.conservativeness_instances = 15;
  const auto base = check_conservativeness(opt);
  for (const auto& c : base) EXPECT_TRUE(c.passed) << c.name << " " << c.max_violation;

  SuiteOptions lam = opt;
  lam.lambda_scale = 2.0;
  bool any_failed = false;
  for (const auto& c : check_conservativeness(lam)) any_failed = any_failed || !c.passed;
  EXPECT_TRUE(any_failed);

  SuiteOptions leak = opt;
  leak.leaky_proxy = true;
  const auto leaked = check_conservativeness(leak);
  for (const auto& c : leaked) {
    if (c.name == "measurability masking") {
      EXPECT_FALSE(c.passed);
    }
  }
}
