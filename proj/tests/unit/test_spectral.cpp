#include <gtest/gtest.h>

#include "nj/nj.hpp"

using namespace nj;

TEST(Spectral, SmallKernels) {
  const auto k1 = build_transition_kernel(Design::bernoulli(1, 0.5), IndexRule::single_uniform(1));
  ASSERT_EQ(k1.states.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(k1.matrix(i, j), 0.5, 1e-15);

  const auto k2 = build_transition_kernel(Design::completely_randomized(2, 1), IndexRule::treated_control_pair(2));
  ASSERT_EQ(k2.states.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(k2.matrix(i, j), 0.5, 1e-15);
}

TEST(Spectral, EigenGapExamples) {
  const std::size_t m = 6;
  const auto bern = Design::bernoulli(m, 0.4);
  EXPECT_NEAR(spectral_gap_eigen(build_transition_kernel(bern, IndexRule::single_uniform(m))).value(), 1.0 / m, 1e-9);
  for (std::size_t l = 1; l <= m; ++l)
    EXPECT_NEAR(spectral_gap_eigen(build_transition_kernel(bern, IndexRule::cycle_block(m, l))).value(), double(l) / m, 1e-9);
  const auto crd = Design::completely_randomized(7, 3);
  for (std::size_t l = 2; l <= 7; ++l)
    EXPECT_NEAR(spectral_gap_eigen(build_transition_kernel(crd, IndexRule::uniform_subset(7, l))).value(),
                double(l - 1) / 6.0, 1e-9);
}

TEST(Spectral, ClosedForms) {
  EXPECT_NEAR(spectral_gap_closed_form(Design::completely_randomized(10, 4), IndexRule::treated_control_pair(10)).value(),
              10.0 / 48.0, 1e-15);
  EXPECT_NEAR(spectral_gap_closed_form(Design::bernoulli(9, 0.3), IndexRule::cycle_block(9, 4)).value(), 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(spectral_gap_closed_form(Design::completely_randomized(8, 3), IndexRule::uniform_subset(8, 5)).value(),
              4.0 / 7.0, 1e-15);
  EXPECT_EQ(spectral_gap_closed_form(Design::bernoulli(4, 0.5), IndexRule::single_uniform(4)).method(), GapMethod::closed_form);
  // A single resampled unit cannot move a CRD state.
  EXPECT_THROW(spectral_gap_closed_form(Design::completely_randomized(4, 2), IndexRule::single_uniform(4)), InvalidArgument);
}

TEST(Spectral, NoClosedFormForCustomRuleOnCrd) {
  CustomRule custom;
  custom.law = [](const TreatmentVector&) { return std::vector<std::pair<IndexSet, double>>{{IndexSet{0, 1}, 0.5}, {IndexSet{1, 2, 3}, 0.5}}; };
  const auto rule = IndexRule::custom(4, custom);
  EXPECT_THROW(spectral_gap_closed_form(Design::completely_randomized(4, 2), rule), NoClosedForm);
  // The eigen oracle still works.
  EXPECT_GT(spectral_gap_eigen(build_transition_kernel(Design::completely_randomized(4, 2), rule)).value(), 0.0);
}

TEST(Spectral, CrdEigenvalueFormula) {
  for (std::size_t m = 4; m <= 9; ++m)
    for (std::size_t l = 1; l <= m; ++l) {
      EXPECT_NEAR(crd_eigenvalue_formula(m, l, 0), 1.0, 1e-12);
      EXPECT_NEAR(crd_eigenvalue_formula(m, l, 1), double(m - l) / double(m - 1), 1e-12);
      for (std::size_t d = 1; d <= m / 2; ++d)
        EXPECT_LE(crd_eigenvalue_formula(m, l, d), crd_eigenvalue_formula(m, l, d - 1) + 1e-12);
    }
  EXPECT_THROW(crd_eigenvalue_formula(6, 2, 4), InvalidArgument);
}

TEST(Spectral, ReversibilityAndCap) {
  const auto k = build_transition_kernel(Design::completely_randomized(6, 3), IndexRule::treated_control_pair(6));
  EXPECT_LE(detailed_balance_violation(k), 1e-12);
  EXPECT_LE(row_sum_violation(k), 1e-12);
  EXPECT_THROW(build_transition_kernel(Design::bernoulli(11, 0.5), IndexRule::single_uniform(11)), CapExceeded);

  // A hand-made non-reversible kernel is rejected by the eigen path.
  TransitionKernel bad = build_transition_kernel(Design::bernoulli(2, 0.5), IndexRule::single_uniform(2));
  bad.matrix = DenseMatrix(4, 4);
  for (std::size_t i = 0; i < 4; ++i) bad.matrix(i, (i + 1) % 4) = 1.0;
  bad.stationary = {0.25, 0.25, 0.25, 0.25};
  EXPECT_THROW(spectral_gap_eigen(bad), NonReversibleKernel);
}
