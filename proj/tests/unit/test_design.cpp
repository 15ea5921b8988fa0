#include <gtest/gtest.h>

#include <map>

#include "nj/nj.hpp"

using namespace nj;

TEST(Design, RejectsDegenerateProbabilities) {
  EXPECT_THROW(Design::bernoulli(3, 1.0), InvalidArgument);
  EXPECT_THROW(Design::bernoulli(3, 0.0), InvalidArgument);
  EXPECT_THROW(Design::bernoulli(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(Design::completely_randomized(4, 4), InvalidArgument);
  EXPECT_THROW(Design::completely_randomized(4, 0), InvalidArgument);
}

TEST(Design, TreatmentVectorRejectsNonBinary) {
  const int bits[] = {0, 2, 1};
  EXPECT_THROW(TreatmentVector::from_bits(bits), InvalidArgument);
}

TEST(Design, Pmf) {
  EXPECT_DOUBLE_EQ(design_pmf(Design::bernoulli(2, 0.5), TreatmentVector{1, 0}), 0.25);
  const auto crd = Design::completely_randomized(4, 2);
  EXPECT_NEAR(design_pmf(crd, TreatmentVector{1, 1, 0, 0}), 1.0 / 6.0, 1e-15);
  EXPECT_EQ(design_pmf(crd, TreatmentVector{1, 1, 1, 0}), 0.0);
  EXPECT_THROW(design_pmf(crd, TreatmentVector{1, 0}), InvalidArgument);
}

TEST(Design, EnumerateSupport) {
  EXPECT_EQ(enumerate_support(Design::bernoulli(3, 0.3)).size(), 8u);
  const auto crd = enumerate_support(Design::completely_randomized(4, 2));
  ASSERT_EQ(crd.size(), 6u);
  for (const auto& w : crd) EXPECT_EQ(w.popcount(), 2u);
  EXPECT_THROW(enumerate_support(Design::bernoulli(12, 0.5), 1000), CapExceeded);
}

TEST(Design, SamplingMatchesMarginals) {
  Rng rng = substream(5, 0);
  const auto crd = Design::completely_randomized(4, 2);
  for (int k = 0; k < 200; ++k) EXPECT_EQ(sample_treatments(crd, rng).popcount(), 2u);

  const auto bern = Design::bernoulli(2, 0.5);
  std::map<std::uint64_t, int> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) ++counts[sample_treatments(bern, rng).mask()];
  for (const auto& [mask, c] : counts) EXPECT_NEAR(c / double(draws), 0.25, 4 * std::sqrt(0.25 * 0.75 / draws)) << mask;

  const auto skewed = Design::bernoulli(3, 0.999);
  int ones = 0;
  for (int k = 0; k < 1000; ++k) ones += sample_treatments(skewed, rng).popcount() == 3;
  EXPECT_GT(ones, 980);
}

TEST(Design, GibbsRerandomize) {
  Rng rng = substream(6, 0);
  const auto crd = Design::completely_randomized(4, 2);
  const TreatmentVector w{1, 1, 0, 0};
  EXPECT_EQ(gibbs_rerandomize(crd, w, IndexSet{}, rng), w);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(gibbs_rerandomize(crd, w, IndexSet{0, 1}, rng), w);
  for (int k = 0; k < 200; ++k) EXPECT_EQ(gibbs_rerandomize(crd, w, IndexSet{1, 2, 3}, rng).popcount(), 2u);

  // Independent of the current value under Bernoulli.
  const auto one = Design::bernoulli(1, 0.5);
  int treated = 0;
  for (int k = 0; k < 20000; ++k) treated += gibbs_rerandomize(one, TreatmentVector{1}, IndexSet{0}, rng)[0];
  EXPECT_NEAR(treated / 20000.0, 0.5, 4 * std::sqrt(0.25 / 20000));
}

TEST(Design, ConditionalPmf) {
  const auto crd = Design::completely_randomized(4, 2);
  const TreatmentVector w{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(conditional_pmf(crd, IndexSet{0, 1}, w, TreatmentVector{0, 1, 1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(conditional_pmf(crd, IndexSet{0, 1}, w, TreatmentVector{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(conditional_pmf(crd, IndexSet{0, 1}, w, TreatmentVector{1, 0, 0, 1}), 0.0);

  const auto bern = Design::bernoulli(std::vector<double>{0.3, 0.7, 0.4});
  EXPECT_NEAR(conditional_pmf(bern, IndexSet{1}, TreatmentVector{0, 0, 1}, TreatmentVector{0, 1, 1}), 0.7, 1e-15);
}

TEST(Design, ConditionalRowsSumToOneAndSamplerMatches) {
  Rng rng = substream(8, 0);
  const auto bern = Design::bernoulli(std::vector<double>{0.3, 0.7, 0.4, 0.5});
  const auto crd = Design::completely_randomized(5, 2);
  for (const auto* d : {&bern, &crd}) {
    for (const auto& w : enumerate_support(*d)) {
      const IndexSet s{0, 2, 3};
      double total = 0.0;
      for (const auto& wp : enumerate_support(*d)) total += conditional_pmf(*d, s, w, wp);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  // Frequencies of the Gibbs step against the conditional law, 10^5 draws.
  const TreatmentVector w{1, 0, 1, 0, 0};
  const IndexSet s{0, 1, 3};
  std::map<std::uint64_t, int> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) ++counts[gibbs_rerandomize(crd, w, s, rng).mask()];
  for (const auto& [wp, p] : enumerate_conditional(crd, s, w)) {
    const double freq = counts[wp.mask()] / double(draws);
    EXPECT_NEAR(freq, p, 4 * std::sqrt(p * (1 - p) / draws));
  }
}
