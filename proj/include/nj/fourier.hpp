#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_rules.hpp"
#include "nj/index_set.hpp"
#include "nj/math.hpp"
#include "nj/outcome_model.hpp"
#include "nj/spectral.hpp"

namespace nj {

inline constexpr std::size_t kMaxFourierUnits = 14;

// Coefficients c_A on the product basis phi_A, stored densely; index = unit
// mask of A (bit j set when unit j is in A).
struct FourierExpansion {
  std::size_t m = 0;
  std::vector<double> probs;
  std::vector<double> coefficients;

  double coefficient(const IndexSet& a) const { return coefficients.at(a.mask()); }
  double mean() const { return coefficients.front(); }

  double variance() const {
    std::vector<double> sq(coefficients.size() - 1);
    for (std::size_t k = 1; k < coefficients.size(); ++k) sq[k - 1] = coefficients[k] * coefficients[k];
    return pairwise_sum(sq);
  }

  double squared_norm() const {
    std::vector<double> sq(coefficients.size());
    for (std::size_t k = 0; k < coefficients.size(); ++k) sq[k] = coefficients[k] * coefficients[k];
    return pairwise_sum(sq);
  }

  void write_csv(std::ostream& os) const {
    const auto old = os.precision(17);
    os << "mask,coefficient\n";
    for (std::size_t k = 0; k < coefficients.size(); ++k) os << k << ',' << coefficients[k] << '\n';
    os.precision(old);
  }
};

// phi_A(w) = prod_{j in A} (w_j - p_j) / sqrt(p_j (1 - p_j)).
inline double fourier_basis(const std::vector<double>& probs, std::uint64_t a_mask, const TreatmentVector& w) {
  double v = 1.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!((a_mask >> j) & 1U)) continue;
    const double p = probs[j];
    v *= ((w[j] ? 1.0 : 0.0) - p) / std::sqrt(p * (1.0 - p));
  }
  return v;
}

// c_A = E[f phi_A] for every A, by a tensor transform over all 2^m states.
inline FourierExpansion fourier_coefficients(const Design& design, const std::function<double(const TreatmentVector&)>& f) {
  const auto* b = design.as_bernoulli();
  if (!b) throw InvalidArgument("fourier_coefficients: needs a Bernoulli design");
  const std::size_t m = design.size();
  detail::require(m <= kMaxFourierUnits, "fourier_coefficients: at most 14 units");
  const std::size_t states = std::size_t{1} << m;
  std::vector<double> g(states);
  for (std::uint64_t mask = 0; mask < states; ++mask) {
    const auto w = TreatmentVector::from_mask(m, mask);
    g[mask] = design_pmf(design, w) * f(w);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double p = b->probs[j];
    const double s = std::sqrt(p * (1.0 - p));
    const double phi0 = -p / s;
    const double phi1 = (1.0 - p) / s;
    const std::uint64_t bit = std::uint64_t{1} << j;
    for (std::uint64_t mask = 0; mask < states; ++mask) {
      if (mask & bit) continue;
      const double a0 = g[mask];
      const double a1 = g[mask | bit];
      g[mask] = a0 + a1;
      g[mask | bit] = a0 * phi0 + a1 * phi1;
    }
  }
  return {m, b->probs, std::move(g)};
}

inline FourierExpansion fourier_coefficients(const Design& design, const PotentialOutcomeModel& model,
                                             const Estimator& est) {
  return fourier_coefficients(design, [&](const TreatmentVector& w) { return estimate(est, w, model.observed(w)); });
}

inline double fourier_reconstruct(const FourierExpansion& e, const TreatmentVector& w) {
  std::vector<double> terms(e.coefficients.size());
  for (std::uint64_t a = 0; a < terms.size(); ++a) terms[a] = e.coefficients[a] * fourier_basis(e.probs, a, w);
  return pairwise_sum(terms);
}

// P(S meets A) for a rule that ignores W, by enumerating its support.
inline double hit_probability(const IndexRule& rule, const IndexSet& a) {
  detail::require(!rule.depends_on_treatments(), "hit_probability: rule must not depend on W");
  double p = 0.0;
  for (const auto& [s, mu] : enumerate_index_sets(rule, TreatmentVector(rule.size())))
    if (s.intersects(a)) p += mu;
  return p;
}

// P(S meets A) for CycleBlock(L) on the m-cycle from the gaps of A: a block
// misses A exactly when it fits inside one gap of length g, which happens
// for (g - L + 1)_+ of the m starts.
inline double cycle_block_hit_probability(std::size_t m, std::size_t length, const IndexSet& a) {
  detail::require(length >= 1 && length <= m, "cycle_block_hit_probability: need 1 <= L <= m");
  a.check_range(m);
  if (a.empty()) return 0.0;
  std::size_t misses = 0;
  const auto& u = a.members();
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::size_t next = k + 1 < u.size() ? u[k + 1] : u[0] + m;
    const std::size_t gap = next - u[k] - 1;
    if (gap >= length) misses += gap - length + 1;
  }
  return static_cast<double>(m - misses) / static_cast<double>(m);
}

namespace detail {

inline std::vector<double> hit_table(const IndexRule& rule) {
  const std::size_t m = rule.size();
  detail::require(m <= kMaxFourierUnits, "hit table: at most 14 units");
  std::vector<std::pair<std::uint64_t, double>> support;
  for (const auto& [s, mu] : enumerate_index_sets(rule, TreatmentVector(m))) support.emplace_back(s.mask(), mu);
  std::vector<double> hit(std::size_t{1} << m, 0.0);
  for (std::uint64_t a = 1; a < hit.size(); ++a)
    for (const auto& [s, mu] : support)
      if (s & a) hit[a] += mu;
  return hit;
}

}  // namespace detail

// (1/lambda) sum_{A != {}} P(S meets A) c_A^2.
inline double ub_oracle_fourier(const FourierExpansion& e, const IndexRule& rule, const SpectralGap& lambda) {
  detail::require(!rule.depends_on_treatments(), "ub_oracle_fourier: rule must not depend on W");
  detail::require(rule.size() == e.m, "ub_oracle_fourier: size mismatch");
  const auto hit = detail::hit_table(rule);
  std::vector<double> terms(e.coefficients.size() - 1);
  for (std::size_t a = 1; a < e.coefficients.size(); ++a) terms[a - 1] = hit[a] * e.coefficients[a] * e.coefficients[a];
  return pairwise_sum(terms) / lambda.value();
}

inline double inflation_ratio(const IndexRule& rule, const IndexSet& a, const SpectralGap& lambda) {
  detail::require(!a.empty(), "inflation_ratio: A must be nonempty");
  return hit_probability(rule, a) / lambda.value();
}

struct MonotonicityResult {
  std::vector<std::size_t> lengths;
  std::vector<double> values;  // UB_oracle(L) under CycleBlock(L), lambda = L/m
  bool non_increasing = true;
  double max_increase = 0.0;
};

inline MonotonicityResult monotonicity_check(const FourierExpansion& e, const std::vector<std::size_t>& grid,
                                             double slack = 1e-12) {
  MonotonicityResult r;
  const std::size_t m = e.m;
  for (std::size_t length : grid) {
    detail::require(length >= 1 && length <= m, "monotonicity_check: block length out of range");
    std::vector<double> terms(e.coefficients.size() - 1);
    for (std::uint64_t a = 1; a < e.coefficients.size(); ++a)
      terms[a - 1] = cycle_block_hit_probability(m, length, IndexSet::from_mask(a)) * e.coefficients[a] * e.coefficients[a];
    r.lengths.push_back(length);
    r.values.push_back(pairwise_sum(terms) * static_cast<double>(m) / static_cast<double>(length));
  }
  for (std::size_t k = 1; k < r.values.size(); ++k) {
    if (r.lengths[k] < r.lengths[k - 1]) continue;
    const double inc = r.values[k] - r.values[k - 1];
    r.max_increase = std::max(r.max_increase, inc);
    if (inc > slack * std::max(1.0, std::abs(r.values[k - 1]))) r.non_increasing = false;
  }
  return r;
}

}  // namespace nj
