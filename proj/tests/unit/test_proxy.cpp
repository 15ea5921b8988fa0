#include <gtest/gtest.h>

#include "nj/harness/dgp.hpp"
#include "nj/nj.hpp"

using namespace nj;

TEST(Proxy, DeletionSets) {
  const auto sets = harness::cycle_neighbor_sets(10);
  EXPECT_EQ(deletion_set(sets, IndexSet{5}), (IndexSet{4, 6}));
  EXPECT_TRUE(deletion_set(sets, IndexSet{}).empty());
  const auto windows = circular_windows(20, 2);
  EXPECT_EQ(deletion_set(windows, detail::cycle_block_at(20, 18, 4)).size(), 4u + 4u);
  EXPECT_EQ(pad_right(IndexSet{2, 8}, 2, 10), (IndexSet{2, 3, 4, 8, 9}));
}

TEST(Proxy, RecomputedAverage) {
  const std::vector<double> psi{1.0, 4.0, -2.0, 5.0, 0.5};
  EXPECT_NEAR(recomputed_average_proxy(psi, IndexSet{}), pairwise_mean(psi), 1e-15);
  const std::vector<double> flat(5, 3.0);
  EXPECT_NEAR(recomputed_average_proxy(flat, IndexSet{1, 3}), 3.0, 1e-15);
  // tau - proxy = (1/(n-|D|)) sum_{D} (psi_i - mean).
  const IndexSet d{0, 3};
  const double mean = pairwise_mean(psi);
  const double lhs = mean - recomputed_average_proxy(psi, d);
  const double rhs = ((psi[0] - mean) + (psi[3] - mean)) / 3.0;
  EXPECT_NEAR(lhs, rhs, 1e-14);
  EXPECT_THROW(recomputed_average_proxy(psi, IndexSet{0, 1, 2, 3, 4}), InvalidArgument);
}

TEST(Proxy, ArmFits) {
  std::vector<IndexSet> sets;
  std::vector<std::vector<double>> tables;
  std::vector<double> x{0.0, 1.0, 2.0, 3.0, 0.5, 1.5, 2.5, 3.5};
  for (std::size_t i = 0; i < 8; ++i) {
    sets.push_back(IndexSet{i});
    tables.push_back({1.0 - 2.0 * x[i], 3.0 + 0.5 * x[i]});
  }
  const auto model = PotentialOutcomeModel::from_tables(8, sets, tables, x);
  std::vector<ExposureIndicator> ind;
  for (std::size_t i = 0; i < 8; ++i) ind.push_back(OwnTreatment{i});
  const TreatmentVector w{1, 1, 1, 0, 0, 0, 1, 0};
  const auto y = model.observed(w);
  const auto fit = fit_arm_means(model, ind, w, y, IndexSet{2});
  EXPECT_NEAR(fit(1, 7.0), 3.0 + 3.5, 1e-10);
  EXPECT_NEAR(fit(0, -1.0), 3.0, 1e-10);

  // Equal covariates: slope zero, arm means.
  const auto flat = PotentialOutcomeModel::from_tables(8, sets, tables, std::vector<double>(8, 1.0));
  const auto f2 = fit_arm_means(flat, ind, w, flat.observed(w), IndexSet{});
  EXPECT_NEAR(f2(1, 100.0), (3.0 + 3.5 + 4.0 + 4.25) / 4.0, 1e-10);

  // Arm with one survivor: its value; empty arm: overall mean.
  const auto f3 = fit_arm_means(model, ind, w, y, IndexSet{0, 1, 2, 3, 4, 5});
  EXPECT_NEAR(f3(1, 0.0), y[6], 1e-12);
  EXPECT_NEAR(f3(0, 0.0), y[7], 1e-12);
  const auto f4 = fit_arm_means(model, ind, w, y, IndexSet{0, 1, 2, 6});
  EXPECT_NEAR(f4(1, 0.0), (y[3] + y[4] + y[5] + y[7]) / 4.0, 1e-12);
  EXPECT_THROW(fit_arm_means(model, ind, w, y, IndexSet::range(0, 8)), InvalidArgument);
}

TEST(Proxy, NeymanPair) {
  const std::vector<double> y{1.0, 3.0, 2.0, 2.0};
  const TreatmentVector w{1, 1, 0, 0};
  EXPECT_NEAR(neyman_pair_proxy(y, w, IndexSet{0, 2}), 3.0 - 2.0, 1e-15);
  // tau - proxy = (Y_j - mean_T)/(n1-1) - (Y_k - mean_C)/(n0-1).
  const std::vector<double> y2{1.0, 4.0, 6.0, 2.0, -1.0, 3.0, 0.5};
  const TreatmentVector w2{1, 1, 1, 0, 0, 0, 0};
  const double mt = 11.0 / 3.0, mc = 4.5 / 4.0;
  const double lhs = (mt - mc) - neyman_pair_proxy(y2, w2, IndexSet{1, 5});
  EXPECT_NEAR(lhs, (4.0 - mt) / 2.0 - (3.0 - mc) / 3.0, 1e-14);
  EXPECT_THROW(neyman_pair_proxy(std::vector<double>{1, 2, 3}, TreatmentVector{1, 0, 0}, IndexSet{0, 1}), InvalidArgument);
}

namespace {

struct CovariateFixture {
  harness::CycleInstance inst;
  const Design& design = inst.design;
  const PotentialOutcomeModel& model = inst.model;
  const IpwDirect& est = inst.estimator;

  explicit CovariateFixture(bool well_specified) : inst(make(well_specified)) {}

  static harness::CycleInstance make(bool well_specified) {
    harness::CycleDgpConfig cfg;
    cfg.n = 8;
    cfg.noise_scale = well_specified ? 0.0 : 0.3;
    Rng rng = substream(9, 0);
    return harness::gen_cycle_model(cfg, rng);
  }
};

}  // namespace

TEST(Proxy, CovariateProxyWithNoDeletionIsTheEstimate) {
  CovariateFixture fx(false);
  const TreatmentVector w{1, 0, 1, 1, 0, 1, 1, 0};
  EXPECT_NEAR(covariate_proxy(fx.design, fx.model, fx.est, IndexSet{}, w), estimate(fx.est, w, fx.model.observed(w)), 1e-12);
}

TEST(Proxy, IncrementalAgreesWithDirect) {
  CovariateFixture fx(false);
  Rng rng = substream(10, 0);
  const Estimator est = fx.est;
  for (const Proxy& p : {Proxy{RecomputedAverage{}}, Proxy{CovariateRegression{}}, Proxy{ClassicalLoo{true}}, Proxy{ClassicalLoo{false}}}) {
    for (int k = 0; k < 20; ++k) {
      const auto w = sample_treatments(fx.design, rng);
      const ProxyEvaluator g(p, fx.design, fx.model, est, w, fx.model.observed(w));
      for (const auto& [a, mu] : enumerate_index_sets(IndexRule::cycle_block(8, 1 + k % 5), w))
        EXPECT_NEAR(g(a, ProxyMode::incremental).value, g(a, ProxyMode::direct).value, 1e-12) << proxy_name(p);
    }
  }
}

TEST(Proxy, CovariateProxyIsConditionalMeanWhenWellSpecified) {
  // No noise, exact linear arms in X: the proxy is E[f | S = A, W_-A].
  std::vector<IndexSet> sets = harness::cycle_neighbor_sets(8);
  std::vector<double> x{0.3, -1.0, 0.8, 1.7, -0.4, 0.0, 2.1, -1.3};
  auto model = PotentialOutcomeModel::tabulated(
      8, sets, [&](std::size_t i, std::span<const std::uint8_t> l) { return 0.5 + 0.7 * x[i] + (1.0 - 0.4 * x[i]) * (l[0] && l[1]); }, x);
  const auto design = Design::bernoulli(8, 0.5);
  std::vector<ExposureIndicator> ind;
  for (const auto& s : sets) ind.push_back(AllTreated{s});
  const Estimator est = make_ipw_direct(ind, design);
  const auto rule = IndexRule::cycle_block(8, 2);
  Rng rng = substream(11, 0);
  int checked = 0;
  for (int k = 0; k < 40; ++k) {
    const auto w = sample_treatments(design, rng);
    const ProxyEvaluator g(CovariateRegression{}, design, model, est, w, model.observed(w));
    for (const auto& [a, mu] : enumerate_index_sets(rule, w)) {
      // Exactness needs both arm fits identified by at least two survivors.
      const auto d = deletion_set(sets, a);
      int survivors[2] = {0, 0};
      for (std::size_t i = 0; i < 8; ++i)
        if (!d.contains(i)) ++survivors[exposure_holds(ind[i], w) ? 1 : 0];
      if (survivors[0] < 2 || survivors[1] < 2) continue;
      ++checked;
      double h = 0.0;
      for (const auto& [wp, q] : enumerate_conditional(design, a, w)) h += q * estimate(est, wp, model.observed(wp));
      EXPECT_NEAR(g(a).value, h, 1e-9);
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(Proxy, IncompatibleCombinationsAreRejected) {
  const auto design = Design::bernoulli(4, 0.5);
  std::vector<IndexSet> sets{IndexSet{0}, IndexSet{1}, IndexSet{2}, IndexSet{3}};
  const auto model = PotentialOutcomeModel::from_tables(4, sets, {{0, 1}, {0, 1}, {0, 1}, {0, 1}});
  const Estimator custom = CustomEstimator{[](const TreatmentVector&, std::span<const double>) { return 0.0; }};
  const TreatmentVector w{1, 0, 1, 0};
  EXPECT_THROW(ProxyEvaluator(RecomputedAverage{}, design, model, custom, w, model.observed(w)), InvalidArgument);
  EXPECT_THROW(ProxyEvaluator(ClassicalLoo{}, design, model, DiffInMeans{}, w, model.observed(w)), InvalidArgument);
  EXPECT_THROW(ProxyEvaluator(CovariateRegression{}, design, model, DiffInMeans{}, w, model.observed(w)), InvalidArgument);
  const auto cyc = PotentialOutcomeModel::from_tables(4, harness::cycle_neighbor_sets(4), {{0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}});
  EXPECT_THROW(ProxyEvaluator(NeymanPair{}, design, cyc, DiffInMeans{}, w, cyc.observed(w)), InvalidArgument);
}

TEST(Proxy, HajekDegenerateFallbackIsCounted) {
  // Deleting every treated unit empties the treated ratio.
  const auto design = Design::bernoulli(3, 0.5);
  std::vector<IndexSet> sets{IndexSet{0}, IndexSet{1}, IndexSet{2}};
  const auto model = PotentialOutcomeModel::from_tables(3, sets, {{0, 1}, {2, 5}, {1, 1}});
  const Estimator hajek = make_hajek({OwnTreatment{0}, OwnTreatment{1}, OwnTreatment{2}},
                                     {AllControl{IndexSet{0}}, AllControl{IndexSet{1}}, AllControl{IndexSet{2}}}, design);
  const TreatmentVector w{1, 0, 0};
  const auto y = model.observed(w);
  const ProxyEvaluator g(RecomputedAverage{}, design, model, hajek, w, y);
  const auto v = g(IndexSet{0});
  EXPECT_TRUE(v.degenerate);
  EXPECT_NEAR(v.value, estimate(hajek, w, y), 1e-15);
  EXPECT_FALSE(g(IndexSet{1}).degenerate);
  const auto rep = nj_exact(design, IndexRule::single_uniform(3), model, hajek, RecomputedAverage{}, w,
                            SpectralGap(1.0 / 3.0));
  EXPECT_EQ(rep.degenerate_count, 1u);
}
