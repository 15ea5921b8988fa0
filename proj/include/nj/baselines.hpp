#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nj/core.hpp"
#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_rules.hpp"
#include "nj/linalg.hpp"
#include "nj/math.hpp"
#include "nj/outcome_model.hpp"
#include "nj/proxy.hpp"
#include "nj/spectral.hpp"

namespace nj {

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_gap() const { return relative_difference(lhs, rhs); }
};

namespace detail {

struct ArmVariances {
  std::size_t n1 = 0, n0 = 0;
  double s_t = 0.0, s_c = 0.0;  // sample variances, divisors n1 - 1 and n0 - 1
};

inline ArmVariances arm_variances(std::span<const double> y, const TreatmentVector& w) {
  require(y.size() == w.size(), "arm variances: one outcome per unit");
  std::vector<double> t, c;
  for (std::size_t i = 0; i < y.size(); ++i) (w[i] ? t : c).push_back(y[i]);
  if (t.size() < 2 || c.size() < 2) throw InvalidArgument("each arm needs at least two units");
  return {t.size(), c.size(), sample_variance(t), sample_variance(c)};
}

}  // namespace detail

// S_T / n1 + S_C / n0.
inline double neyman_classical(std::span<const double> y, const TreatmentVector& w) {
  const auto a = detail::arm_variances(y, w);
  return a.s_t / static_cast<double>(a.n1) + a.s_c / static_cast<double>(a.n0);
}

// (2/n) (n0/(n1-1) S_T + n1/(n0-1) S_C).
inline double neyman_jackknife_closed_form(std::span<const double> y, const TreatmentVector& w) {
  const auto a = detail::arm_variances(y, w);
  const double n1 = static_cast<double>(a.n1), n0 = static_cast<double>(a.n0);
  return 2.0 / (n1 + n0) * (n0 / (n1 - 1.0) * a.s_t + n1 / (n0 - 1.0) * a.s_c);
}

// Triangular weights 1 - d/(lag+1) on circular distance d.
class CircularBartlett {
 public:
  CircularBartlett(std::size_t n, std::size_t lag) : n_(n), lag_(lag) {
    detail::require(n >= 1, "circular Bartlett: n must be positive");
    detail::require(2 * lag <= n - 1, "circular Bartlett: lag must not exceed floor((n-1)/2)");
  }

  std::size_t size() const { return n_; }
  std::size_t lag() const { return lag_; }

  static std::size_t distance(std::size_t j, std::size_t k, std::size_t n) {
    const std::size_t d = j > k ? j - k : k - j;
    return std::min(d, n - d);
  }

  double weight(std::size_t d) const {
    return d > lag_ ? 0.0 : 1.0 - static_cast<double>(d) / static_cast<double>(lag_ + 1);
  }

  double operator()(std::size_t j, std::size_t k) const { return weight(distance(j, k, n_)); }

  DenseMatrix matrix() const {
    DenseMatrix b(n_, n_);
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t k = 0; k < n_; ++k) b(j, k) = (*this)(j, k);
    return b;
  }

  double min_eigenvalue() const { return jacobi_eigenvalues(matrix()).back(); }

 private:
  std::size_t n_;
  std::size_t lag_;
};

// x'Bx / n^2 with x_i = psi_i - mean(psi).
inline double newey_west(std::span<const double> psis, std::size_t lag) {
  const std::size_t n = psis.size();
  detail::require(n >= 1, "newey_west: need at least one term");
  const CircularBartlett b(n, lag);
  const double mean = pairwise_mean(psis);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = psis[i] - mean;
  std::vector<double> terms;
  terms.reserve(n * (2 * lag + 1));
  for (std::size_t j = 0; j < n; ++j) {
    terms.push_back(x[j] * x[j]);
    for (std::size_t d = 1; d <= lag; ++d) terms.push_back(2.0 * b.weight(d) * x[j] * x[(j + d) % n]);
  }
  return pairwise_sum(terms) / (static_cast<double>(n) * static_cast<double>(n));
}

// Outcomes frozen at y, whatever the assignment: y is treated as realized data.
inline PotentialOutcomeModel frozen_sutva_model(std::span<const double> y) {
  std::vector<IndexSet> exposure;
  std::vector<std::vector<double>> tables;
  for (std::size_t i = 0; i < y.size(); ++i) {
    exposure.push_back(IndexSet{i});
    tables.push_back({y[i], y[i]});
  }
  return PotentialOutcomeModel::from_tables(y.size(), std::move(exposure), std::move(tables));
}

// Jackknife sum with the Neyman pair proxy and lambda = m/(2 n1 n0) against
// the closed form.
inline IdentityCheck neyman_identity_check(std::span<const double> y, const TreatmentVector& w) {
  const std::size_t n = y.size();
  detail::require(n == w.size(), "neyman_identity_check: one outcome per unit");
  const double rhs = neyman_jackknife_closed_form(y, w);
  const auto design = Design::completely_randomized(n, w.popcount());
  const auto rule = IndexRule::treated_control_pair(n);
  const auto model = frozen_sutva_model(y);
  const Estimator est = DiffInMeans{};
  const Proxy proxy = NeymanPair{};
  const auto lambda = spectral_gap_closed_form(design, rule);
  return {nj_exact(design, rule, model, est, proxy, w, lambda).v_hat, rhs};
}

// Circular windows {i-M, ..., i+M}.
inline std::vector<IndexSet> circular_windows(std::size_t n, std::size_t half_width) {
  detail::require(2 * half_width + 1 <= n, "circular windows wider than the cycle");
  std::vector<IndexSet> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> u;
    for (std::size_t k = 0; k <= 2 * half_width; ++k) u.push_back((i + n - half_width + k) % n);
    out.emplace_back(std::move(u));
  }
  return out;
}

// NJ with CycleBlock(L), lambda = L/n and the exposure-padded recomputed
// average, against ((L+2M)/L) (n/(n-L-2M))^2 times circular Newey-West with
// lag L+2M-1. The model's exposure sets must be the M-windows on the cycle.
inline IdentityCheck nw_identity_check(const Design& design, const PotentialOutcomeModel& model, const Estimator& est,
                                       const TreatmentVector& w, std::size_t length, std::size_t half_width) {
  const std::size_t n = model.units();
  detail::require(n == design.size(), "nw_identity_check: outcome and intervention units must coincide");
  detail::require(is_linear_ipw(est), "nw_identity_check: needs a linear IPW estimator");
  detail::require(length >= 1 && length + 2 * half_width < n, "nw_identity_check: need 1 <= L and L + 2M < n");
  detail::require(model.exposure_sets() == circular_windows(n, half_width), "nw_identity_check: exposure sets must be circular M-windows");
  const std::size_t k = length + 2 * half_width;
  const auto rule = IndexRule::cycle_block(n, length);
  const SpectralGap lambda(static_cast<double>(length) / static_cast<double>(n), GapMethod::closed_form);
  const Proxy proxy = RecomputedAverage{};
  const double lhs = nj_exact(design, rule, model, est, proxy, w, lambda, ProxyMode::direct).v_hat;
  const auto psi = ipw_terms(est, w, model.observed(w));
  const double scale = static_cast<double>(k) / static_cast<double>(length) *
                       std::pow(static_cast<double>(n) / static_cast<double>(n - k), 2);
  return {lhs, scale * newey_west(psi, k - 1)};
}

}  // namespace nj
