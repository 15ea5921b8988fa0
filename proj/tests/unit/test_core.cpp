#include <gtest/gtest.h>

#include "nj/harness/dgp.hpp"
#include "nj/harness/experiments.hpp"
#include "nj/harness/oracle_suite.hpp"
#include "nj/nj.hpp"

using namespace nj;

namespace {

PotentialOutcomeModel small_model() {
  const std::size_t m = 6;
  std::vector<IndexSet> sets;
  for (std::size_t i = 0; i < m; ++i) sets.push_back(IndexSet{(i + m - 1) % m, i, (i + 1) % m});
  Rng rng = substream(21, 0);
  std::vector<std::vector<double>> tables;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> t(8);
    for (auto& v : t) v = -5.0 + 10.0 * uniform01(rng);
    tables.push_back(t);
  }
  return PotentialOutcomeModel::from_tables(m, sets, tables);
}

struct Small {
  Design design = Design::bernoulli(std::vector<double>{0.3, 0.5, 0.6, 0.4, 0.7, 0.5});
  PotentialOutcomeModel model = small_model();
  Estimator est = make_ipw_tot(model, design);
};

}  // namespace

TEST(Core, PerfectProxyGivesZero) {
  Small s;
  const auto rule = IndexRule::cycle_block(6, 2);
  const auto lambda = spectral_gap_closed_form(s.design, rule);
  const TreatmentVector w{1, 0, 1, 1, 0, 0};
  const double f = estimate(s.est, w, s.model.observed(w));
  const Proxy perfect = CustomProxy{[f](const IndexSet&, const TreatmentVector&, std::span<const double>) { return f; }, true};
  EXPECT_EQ(nj_exact(s.design, rule, s.model, s.est, perfect, w, lambda).v_hat, 0.0);
  Rng rng = substream(1, 0);
  EXPECT_EQ(nj_monte_carlo(s.design, rule, s.model, s.est, perfect, w, lambda, 50, rng).v_hat, 0.0);
}

TEST(Core, MonteCarloWithSingletonSupportIsExact) {
  Small s;
  const auto rule = IndexRule::partition_block(6, 6);
  const SpectralGap lambda(1.0);
  const TreatmentVector w{1, 0, 1, 1, 0, 0};
  const Proxy zero = CustomProxy{[](const IndexSet&, const TreatmentVector&, std::span<const double>) { return 0.0; }, false};
  Rng rng = substream(2, 0);
  const double exact = nj_exact(s.design, rule, s.model, s.est, zero, w, lambda).v_hat;
  EXPECT_EQ(nj_monte_carlo(s.design, rule, s.model, s.est, zero, w, lambda, 3, rng).v_hat, exact);
  EXPECT_THROW(nj_monte_carlo(s.design, rule, s.model, s.est, zero, w, lambda, 0, rng), InvalidArgument);
}

TEST(Core, TrueVarianceExamples) {
  const auto design = Design::bernoulli(std::vector<double>{0.3, 0.6});
  const auto model = PotentialOutcomeModel::from_tables(2, {IndexSet{0}, IndexSet{1}}, {{0, 1}, {0, 0}});
  const Estimator first = CustomEstimator{[](const TreatmentVector& w, std::span<const double>) { return double(w[0]); }};
  EXPECT_NEAR(true_variance_exact(design, model, first), 0.3 * 0.7, 1e-15);
  const Estimator constant = CustomEstimator{[](const TreatmentVector&, std::span<const double>) { return 2.5; }};
  EXPECT_NEAR(true_variance_exact(design, model, constant), 0.0, 1e-15);
  EXPECT_THROW(true_variance_exact(Design::bernoulli(12, 0.5), model, constant, 1000), CapExceeded);
}

TEST(Core, TrueVarianceMatchesSampling) {
  Small s;
  const double exact = true_variance_exact(s.design, s.model, s.est);
  Rng rng = substream(3, 0);
  const int draws = 1000000;
  std::vector<double> f(draws);
  for (auto& v : f) {
    const auto w = sample_treatments(s.design, rng);
    v = estimate(s.est, w, s.model.observed(w));
  }
  const auto mom = harness::moments(f);
  EXPECT_NEAR(mom.variance, exact, 4 * mom.variance_se);
}

TEST(Core, FullRuleOracleIsTheVariance) {
  Small s;
  const auto rule = IndexRule::partition_block(6, 6);
  EXPECT_NEAR(ub_oracle_exact(s.design, rule, s.model, s.est, SpectralGap(1.0)), true_variance_exact(s.design, s.model, s.est),
              1e-10);
}

TEST(Core, AuditDecomposition) {
  Small s;
  const auto rule = IndexRule::cycle_block(6, 3);
  const auto lambda = spectral_gap_closed_form(s.design, rule);
  const auto audit = expected_vhat_exact(s.design, rule, s.model, s.est, RecomputedAverage{}, lambda);
  EXPECT_GE(audit.expected_vhat, audit.true_var - 1e-10);
  EXPECT_GE(audit.ub_oracle, audit.true_var - 1e-10);
  EXPECT_GE(audit.approx_error, -1e-10);
  EXPECT_NEAR(audit.approx_error, audit.proxy_mse, 1e-10 * std::max(1.0, audit.expected_vhat));

  // The oracle proxy collapses the decomposition.
  const auto oracle = harness::detail_suite::oracle_proxy(s.design, rule, s.model, s.est);
  const auto a2 = expected_vhat_exact(s.design, rule, s.model, s.est, oracle, lambda);
  EXPECT_NEAR(a2.approx_error, 0.0, 1e-10 * std::max(1.0, a2.ub_oracle));
  EXPECT_NEAR(a2.expected_vhat, a2.ub_oracle, 1e-10 * std::max(1.0, a2.ub_oracle));
}

TEST(Core, ExactMatchesDirectMode) {
  Small s;
  // Pairs can delete every unit here, singletons leave three survivors.
  const auto rule = IndexRule::uniform_subset(6, 1);
  const auto lambda = spectral_gap_closed_form(s.design, rule);
  const TreatmentVector w{0, 1, 1, 0, 1, 0};
  const double a = nj_exact(s.design, rule, s.model, s.est, RecomputedAverage{}, w, lambda, ProxyMode::incremental).v_hat;
  const double b = nj_exact(s.design, rule, s.model, s.est, RecomputedAverage{}, w, lambda, ProxyMode::direct).v_hat;
  EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, b));
}

TEST(Core, ScaleEquivariance) {
  Small s;
  const auto rule = IndexRule::cycle_block(6, 2);
  const auto lambda = spectral_gap_closed_form(s.design, rule);
  const TreatmentVector w{1, 1, 0, 1, 0, 0};
  std::vector<std::vector<double>> scaled;
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> t(8);
    for (std::uint64_t code = 0; code < 8; ++code) {
      TreatmentVector probe(6);
      std::size_t k = 0;
      for (std::size_t j : s.model.exposure_sets()[i]) probe.set(j, (code >> k++) & 1U);
      t[code] = 4.0 * s.model.observed(probe)[i];
    }
    scaled.push_back(t);
  }
  const auto model4 = PotentialOutcomeModel::from_tables(6, s.model.exposure_sets(), scaled);
  for (const Proxy& p : {Proxy{RecomputedAverage{}}, Proxy{ClassicalLoo{}}}) {
    const double base = nj_exact(s.design, rule, s.model, s.est, p, w, lambda).v_hat;
    const double big = nj_exact(s.design, rule, model4, s.est, p, w, lambda).v_hat;
    EXPECT_NEAR(big, 16.0 * base, 1e-12 * big);
  }
}

TEST(Core, RobustSlack) {
  Small s;
  const auto rule = IndexRule::cycle_block(6, 2);
  const auto strict = robust_slack_exact(s.design, rule, s.model, s.est, RecomputedAverage{});
  EXPECT_NEAR(strict.direct, 0.0, 1e-20);
  EXPECT_NEAR(strict.pairwise, 0.0, 1e-20);
  const auto peek = robust_slack_exact(s.design, rule, s.model, s.est, harness::detail_suite::peeking_proxy(true));
  EXPECT_GT(peek.direct, 1e-6);
  EXPECT_NEAR(peek.direct, peek.pairwise, 1e-10 * peek.direct);
}

TEST(Core, UnbufferedTimeSeriesProxyHasPositiveSlack) {
  harness::DecayDgpConfig cfg;
  cfg.T = 12;
  cfg.ell = 3;
  cfg.r = 0;
  cfg.enforce_regime = false;
  const auto inst = harness::gen_decay_model(cfg);
  const auto rule = IndexRule::partition_block(12, 3);
  const Estimator est = inst.estimator;
  const auto s0 = robust_slack_exact(inst.design, rule, inst.model, est, RecomputedAverage{RightBuffer{0}});
  EXPECT_GT(s0.direct, 1e-8);
  EXPECT_NEAR(s0.direct, s0.pairwise, 1e-10 * s0.direct);
  // A longer buffer shrinks the slack.
  const auto s3 = robust_slack_exact(inst.design, rule, inst.model, est, RecomputedAverage{RightBuffer{3}});
  EXPECT_LT(s3.direct, s0.direct);
}

TEST(Core, MaskingDetectsPeekingProxy) {
  Small s;
  const auto rule = IndexRule::cycle_block(6, 2);
  Rng rng = substream(4, 0);
  const TreatmentVector w{1, 0, 1, 1, 0, 0};
  EXPECT_EQ(measurability_mismatches(s.design, rule, s.model, s.est, RecomputedAverage{}, w, rng), 0u);
  EXPECT_GT(measurability_mismatches(s.design, rule, s.model, s.est, harness::detail_suite::peeking_proxy(false), w, rng), 0u);
}

TEST(Core, WDependentRuleLawIsReweighted) {
  // Pair rule on a SUTVA CRD: the oracle bound holds and matches Var at the
  // exchangeable law.
  const auto design = Design::completely_randomized(6, 3);
  const auto rule = IndexRule::treated_control_pair(6);
  std::vector<IndexSet> sets;
  std::vector<std::vector<double>> tables;
  for (std::size_t i = 0; i < 6; ++i) {
    sets.push_back(IndexSet{i});
    tables.push_back({double(i) * 0.7 - 1.0, double(i * i) * 0.3});
  }
  const auto model = PotentialOutcomeModel::from_tables(6, sets, tables);
  const auto lambda = spectral_gap_closed_form(design, rule);
  const auto audit = expected_vhat_exact(design, rule, model, DiffInMeans{}, NeymanPair{}, lambda);
  EXPECT_GE(audit.ub_oracle, audit.true_var - 1e-10);
  EXPECT_GE(audit.expected_vhat, audit.ub_oracle - 1e-10);
  EXPECT_NEAR(audit.approx_error, audit.proxy_mse, 1e-10 * std::max(1.0, audit.expected_vhat));
}
