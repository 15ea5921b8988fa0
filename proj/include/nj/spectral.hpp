#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_rules.hpp"
#include "nj/linalg.hpp"
#include "nj/math.hpp"

namespace nj {

enum class GapMethod { closed_form, eigen, supplied };

inline const char* to_string(GapMethod m) {
  switch (m) {
    case GapMethod::closed_form: return "closed-form";
    case GapMethod::eigen: return "eigen";
    case GapMethod::supplied: return "supplied";
  }
  return "unknown";
}

// Spectral gap of a Gibbs rerandomization kernel, in (0, 1].
class SpectralGap {
 public:
  explicit SpectralGap(double value, GapMethod method = GapMethod::supplied) : value_(value), method_(method) {
    if (!(value > 0.0) || value > 1.0 + 1e-12) {
      throw InvalidArgument("spectral gap must lie in (0, 1], got " + std::to_string(value));
    }
    value_ = std::min(value_, 1.0);
  }

  double value() const { return value_; }
  GapMethod method() const { return method_; }

 private:
  double value_;
  GapMethod method_;
};

struct TransitionKernel {
  std::vector<TreatmentVector> states;  // canonical order
  std::vector<double> stationary;       // pi restricted to the states
  DenseMatrix matrix;                   // P(w, w')
};

inline constexpr std::size_t kDefaultKernelStateCap = 1024;

namespace detail {

inline std::unordered_map<std::uint64_t, std::size_t> state_index(const std::vector<TreatmentVector>& states) {
  std::unordered_map<std::uint64_t, std::size_t> idx;
  idx.reserve(states.size() * 2);
  for (std::size_t i = 0; i < states.size(); ++i) idx.emplace(states[i].mask(), i);
  return idx;
}

}  // namespace detail

// P(w, w') = sum_A mu_w(A) * P(W' = w' | W = w, S = A) over the support of pi.
inline TransitionKernel build_transition_kernel(const Design& design, const IndexRule& rule,
                                                std::size_t state_cap = kDefaultKernelStateCap) {
  validate_rule(rule, design);
  TransitionKernel k;
  k.states = enumerate_support(design, state_cap);
  const auto idx = detail::state_index(k.states);
  const std::size_t n = k.states.size();
  k.stationary.resize(n);
  k.matrix = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = k.states[i];
    k.stationary[i] = design_pmf(design, w);
    for (const auto& [set, mu] : enumerate_index_sets(rule, w)) {
      for (const auto& [wp, c] : enumerate_conditional(design, set, w)) {
        k.matrix(i, idx.at(wp.mask())) += mu * c;
      }
    }
  }
  return k;
}

inline double row_sum_violation(const TransitionKernel& k) {
  double worst = 0.0;
  for (std::size_t i = 0; i < k.matrix.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k.matrix.cols(); ++j) s += k.matrix(i, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

// Joint mass P(W = w, W' = w') = pi(w) P(w, w').
inline DenseMatrix joint_mass_matrix(const TransitionKernel& k) {
  DenseMatrix j(k.matrix.rows(), k.matrix.cols());
  for (std::size_t a = 0; a < j.rows(); ++a)
    for (std::size_t b = 0; b < j.cols(); ++b) j(a, b) = k.stationary[a] * k.matrix(a, b);
  return j;
}

// max |pi(w) P(w,w') - pi(w') P(w',w)|.
inline double detailed_balance_violation(const TransitionKernel& k) { return joint_mass_matrix(k).max_asymmetry(); }

// Finer form of exchangeability: for every update set A, the mass of
// (S = A, W = w, W' = w') equals that of (S = A, W = w', W' = w).
inline double exchangeability_violation(const Design& design, const IndexRule& rule,
                                        std::size_t state_cap = kDefaultKernelStateCap) {
  validate_rule(rule, design);
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, double> mass;
  for (const auto& w : enumerate_support(design, state_cap)) {
    const double pw = design_pmf(design, w);
    for (const auto& [set, mu] : enumerate_index_sets(rule, w)) {
      for (const auto& [wp, c] : enumerate_conditional(design, set, w)) {
        mass[{set.mask(), w.mask(), wp.mask()}] += pw * mu * c;
      }
    }
  }
  double worst = 0.0;
  for (const auto& [key, value] : mass) {
    const auto& [a, w, wp] = key;
    auto it = mass.find({a, wp, w});
    worst = std::max(worst, std::abs(value - (it == mass.end() ? 0.0 : it->second)));
  }
  return worst;
}

// Full spectrum (decreasing) of a reversible kernel via the similarity
// transform D^{1/2} P D^{-1/2}, which is symmetric under detailed balance.
inline std::vector<double> kernel_spectrum(const TransitionKernel& k) {
  const std::size_t n = k.matrix.rows();
  DenseMatrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sym(i, j) = k.matrix(i, j) * std::sqrt(k.stationary[i] / k.stationary[j]);
  const double asym = sym.max_asymmetry();
  if (asym > 1e-10) {
    throw NonReversibleKernel("kernel is not reversible: symmetrized residual " + std::to_string(asym));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sym(i, j) = sym(j, i) = 0.5 * (sym(i, j) + sym(j, i));
  return jacobi_eigenvalues(std::move(sym), 1e-12);
}

inline SpectralGap spectral_gap_eigen(const TransitionKernel& k) {
  detail::require(k.matrix.rows() >= 2, "spectral_gap_eigen: kernel needs at least two states");
  const auto eig = kernel_spectrum(k);
  const double gap = 1.0 - eig[1];
  if (gap <= 1e-12) throw InvalidArgument("kernel is reducible: spectral gap is zero");
  return SpectralGap(gap, GapMethod::eigen);
}

// True when P(S = A) depends on |A| only (and the rule ignores W).
inline bool is_size_symmetric(const IndexRule& rule) {
  if (rule.depends_on_treatments()) return false;
  const std::size_t m = rule.size();
  std::map<std::size_t, std::vector<double>> by_size;
  for (const auto& [set, mu] : enumerate_index_sets(rule, TreatmentVector(m))) by_size[set.size()].push_back(mu);
  for (const auto& [size, masses] : by_size) {
    if (static_cast<double>(masses.size()) != choose(static_cast<std::int64_t>(m), static_cast<std::int64_t>(size))) return false;
    for (double mu : masses) if (std::abs(mu - masses.front()) > 1e-15) return false;
  }
  return true;
}

// Closed forms: Bernoulli with a W-independent rule gives min_i P(i in S);
// a completely randomized design with a size-symmetric rule gives
// (E|S| - 1 + P(S = {})) / (m - 1); the treated/control pair rule gives
// m / (2 n1 n0).
inline SpectralGap spectral_gap_closed_form(const Design& design, const IndexRule& rule) {
  validate_rule(rule, design);
  const std::size_t m = design.size();
  if (design.is_bernoulli()) {
    if (rule.depends_on_treatments()) throw NoClosedForm("no closed-form gap for a Bernoulli design with a W-dependent rule");
    const auto incl = inclusion_probabilities(rule);
    return SpectralGap(*std::min_element(incl.begin(), incl.end()), GapMethod::closed_form);
  }
  const auto& crd = *design.as_crd();
  if (std::holds_alternative<TreatedControlPair>(rule.variant())) {
    const double n1 = static_cast<double>(crd.n1);
    const double n0 = static_cast<double>(crd.m - crd.n1);
    return SpectralGap(static_cast<double>(m) / (2.0 * n1 * n0), GapMethod::closed_form);
  }
  if (!is_size_symmetric(rule)) {
    throw NoClosedForm("no closed-form gap for " + rule.name() + " under a completely randomized design");
  }
  double expected_size = 0.0;
  double empty_mass = 0.0;
  for (const auto& [set, mu] : enumerate_index_sets(rule, TreatmentVector(m))) {
    expected_size += mu * static_cast<double>(set.size());
    if (set.empty()) empty_mass += mu;
  }
  const double gap = (expected_size - 1.0 + empty_mass) / static_cast<double>(m - 1);
  if (gap <= 0.0) throw InvalidArgument("rule " + rule.name() + " leaves the completely randomized kernel reducible");
  return SpectralGap(gap, GapMethod::closed_form);
}

// Eigenvalue of the degree-d slice eigenfunction for the completely
// randomized design with a uniform update set of size L.
inline double crd_eigenvalue_formula(std::size_t m, std::size_t subset_size, std::size_t degree) {
  detail::require(subset_size >= 1 && subset_size <= m, "crd_eigenvalue_formula: need 1 <= L <= m");
  detail::require(2 * degree <= m, "crd_eigenvalue_formula: degree must satisfy 2d <= m");
  if (degree == 0) return 1.0;
  const auto mi = static_cast<std::int64_t>(m);
  const auto li = static_cast<std::int64_t>(subset_size);
  const auto di = static_cast<std::int64_t>(degree);
  return static_cast<double>(li + 1) / static_cast<double>(mi - 2 * di + 1) *
         (choose(mi - di + 1, li + 1) - choose(di, li + 1)) / choose(mi, li);
}

}  // namespace nj
