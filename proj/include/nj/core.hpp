#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_rules.hpp"
#include "nj/math.hpp"
#include "nj/outcome_model.hpp"
#include "nj/proxy.hpp"
#include "nj/rng.hpp"
#include "nj/spectral.hpp"

namespace nj {

enum class VarianceMode { exact_sum, monte_carlo };

struct VarianceReport {
  double v_hat = 0.0;
  SpectralGap lambda{1.0};
  VarianceMode mode = VarianceMode::exact_sum;
  std::size_t replicates = 0;        // B in Monte Carlo mode, support size otherwise
  double standard_error = 0.0;       // conditional on W; zero for the exact sum
  std::size_t degenerate_count = 0;  // proxy evaluations that used a fallback
};

struct ExactAudit {
  double true_var = 0.0;
  double expected_vhat = 0.0;
  double ub_oracle = 0.0;
  double approx_error = 0.0;  // expected_vhat - ub_oracle, signed
  double proxy_mse = 0.0;     // (1/lambda) E[(g - E[f | S, W_-S])^2]
  std::size_t degenerate_count = 0;
};

struct RobustSlack {
  double direct = 0.0;    // E[(g - E[g | S, W_-S])^2]
  double pairwise = 0.0;  // 1/2 E[(g(S, W) - g(S, W'))^2]
};

// Exact rule-support sum for an already prepared proxy; lets callers reuse
// one evaluator across several rules.
inline VarianceReport jackknife_sum(const ProxyEvaluator& g, double f, const IndexRule& rule, const TreatmentVector& w,
                                    const SpectralGap& lambda, ProxyMode mode = ProxyMode::incremental) {
  VarianceReport rep;
  rep.lambda = lambda;
  std::vector<double> terms;
  for (const auto& [a, mu] : enumerate_index_sets(rule, w)) {
    const auto pv = g(a, mode);
    rep.degenerate_count += pv.degenerate;
    terms.push_back(mu * (f - pv.value) * (f - pv.value));
  }
  rep.replicates = terms.size();
  rep.v_hat = pairwise_sum(terms) / lambda.value();
  return rep;
}

// V_hat = (1/lambda) sum_A mu_w(A) (f(w) - g(A, w_-A))^2.
inline VarianceReport nj_exact(const Design& design, const IndexRule& rule, const PotentialOutcomeModel& model,
                               const Estimator& est, const Proxy& proxy, const TreatmentVector& w,
                               const SpectralGap& lambda, ProxyMode mode = ProxyMode::incremental) {
  validate_rule(rule, design);
  detail::check_length(design, w);
  auto y = model.observed(w);
  const double f = estimate(est, w, y);
  ProxyEvaluator g(proxy, design, model, est, w, std::move(y));
  return jackknife_sum(g, f, rule, w, lambda, mode);
}

// V_hat_MC = (1/(lambda B)) sum_k (f(w) - g(S_k, w_-S_k))^2 with S_k ~ mu_w.
inline VarianceReport nj_monte_carlo(const Design& design, const IndexRule& rule, const PotentialOutcomeModel& model,
                                     const Estimator& est, const Proxy& proxy, const TreatmentVector& w,
                                     const SpectralGap& lambda, std::size_t replicates, Rng& rng,
                                     ProxyMode mode = ProxyMode::incremental) {
  detail::require(replicates >= 1, "nj_monte_carlo: need at least one replicate");
  validate_rule(rule, design);
  detail::check_length(design, w);
  auto y = model.observed(w);
  const double f = estimate(est, w, y);
  ProxyEvaluator g(proxy, design, model, est, w, std::move(y));
  VarianceReport rep;
  rep.lambda = lambda;
  rep.mode = VarianceMode::monte_carlo;
  rep.replicates = replicates;
  std::vector<double> terms(replicates);
  for (auto& t : terms) {
    const auto pv = g(sample_index_set(rule, w, rng), mode);
    rep.degenerate_count += pv.degenerate;
    t = (f - pv.value) * (f - pv.value) / lambda.value();
  }
  rep.v_hat = pairwise_mean(terms);
  rep.standard_error = replicates > 1 ? std::sqrt(sample_variance(terms) / static_cast<double>(replicates)) : 0.0;
  return rep;
}

namespace detail {

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
    return static_cast<std::size_t>(splitmix64(p.first ^ splitmix64(p.second)));
  }
};

// Law of W given (S = A, W_-A = w_-A). For rules that look at W the design
// conditional is reweighted by mu_w'(A).
inline std::vector<std::pair<TreatmentVector, double>> conditional_law(const Design& design, const IndexRule& rule,
                                                                       const IndexSet& a, const TreatmentVector& w) {
  auto law = enumerate_conditional(design, a, w);
  if (!rule.depends_on_treatments()) return law;
  double total = 0.0;
  for (auto& [wp, c] : law) {
    c *= index_set_pmf(rule, wp, a);
    total += c;
  }
  detail::require(total > 0.0, "conditional_law: update set has zero mass on this slice");
  for (auto& [wp, c] : law) c /= total;
  return law;
}

inline std::uint64_t outside_mask(const TreatmentVector& w, const IndexSet& a) { return w.mask() & ~a.mask(); }

// f over the design support, keyed by treatment mask.
inline std::unordered_map<std::uint64_t, double> estimator_table(const std::vector<TreatmentVector>& states,
                                                                 const PotentialOutcomeModel& model,
                                                                 const Estimator& est) {
  std::unordered_map<std::uint64_t, double> f;
  f.reserve(states.size() * 2);
  for (const auto& w : states) f.emplace(w.mask(), estimate(est, w, model.observed(w)));
  return f;
}

// Cached E[f | S = A, W_-A = w_-A].
class ConditionalMean {
 public:
  ConditionalMean(const Design& design, const IndexRule& rule, const std::unordered_map<std::uint64_t, double>& f)
      : design_(design), rule_(rule), f_(f) {}

  double operator()(const IndexSet& a, const TreatmentVector& w) {
    const auto key = std::make_pair(a.mask(), outside_mask(w, a));
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double h = 0.0;
    for (const auto& [wp, c] : conditional_law(design_, rule_, a, w)) h += c * f_.at(wp.mask());
    cache_.emplace(key, h);
    return h;
  }

 private:
  const Design& design_;
  const IndexRule& rule_;
  const std::unordered_map<std::uint64_t, double>& f_;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, double, PairHash> cache_;
};

}  // namespace detail

inline double true_variance_exact(const Design& design, const PotentialOutcomeModel& model, const Estimator& est,
                                  std::size_t cap = kDefaultSupportCap) {
  const auto states = enumerate_support(design, cap);
  std::vector<double> p(states.size()), f(states.size()), terms(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    p[k] = design_pmf(design, states[k]);
    f[k] = estimate(est, states[k], model.observed(states[k]));
    terms[k] = p[k] * f[k];
  }
  const double mean = pairwise_sum(terms);
  for (std::size_t k = 0; k < states.size(); ++k) terms[k] = p[k] * (f[k] - mean) * (f[k] - mean);
  return pairwise_sum(terms);
}

// (1/lambda) E[(f - E[f | S, W_-S])^2] by exact enumeration.
inline double ub_oracle_exact(const Design& design, const IndexRule& rule, const PotentialOutcomeModel& model,
                              const Estimator& est, const SpectralGap& lambda, std::size_t cap = kDefaultSupportCap) {
  validate_rule(rule, design);
  const auto states = enumerate_support(design, cap);
  const auto f = detail::estimator_table(states, model, est);
  detail::ConditionalMean h(design, rule, f);
  std::vector<double> terms;
  for (const auto& w : states) {
    const double pw = design_pmf(design, w);
    const double fw = f.at(w.mask());
    for (const auto& [a, mu] : enumerate_index_sets(rule, w)) {
      const double r = fw - h(a, w);
      terms.push_back(pw * mu * r * r);
    }
  }
  return pairwise_sum(terms) / lambda.value();
}

inline ExactAudit expected_vhat_exact(const Design& design, const IndexRule& rule, const PotentialOutcomeModel& model,
                                      const Estimator& est, const Proxy& proxy, const SpectralGap& lambda,
                                      ProxyMode mode = ProxyMode::incremental, std::size_t cap = kDefaultSupportCap) {
  validate_rule(rule, design);
  const auto states = enumerate_support(design, cap);
  const auto f = detail::estimator_table(states, model, est);
  detail::ConditionalMean h(design, rule, f);
  std::vector<double> vhat_terms, ub_terms, mse_terms;
  ExactAudit audit;
  for (const auto& w : states) {
    const double pw = design_pmf(design, w);
    const double fw = f.at(w.mask());
    ProxyEvaluator g(proxy, design, model, est, w, model.observed(w));
    for (const auto& [a, mu] : enumerate_index_sets(rule, w)) {
      const auto pv = g(a, mode);
      audit.degenerate_count += pv.degenerate;
      const double hw = h(a, w);
      vhat_terms.push_back(pw * mu * (fw - pv.value) * (fw - pv.value));
      ub_terms.push_back(pw * mu * (fw - hw) * (fw - hw));
      mse_terms.push_back(pw * mu * (pv.value - hw) * (pv.value - hw));
    }
  }
  audit.true_var = true_variance_exact(design, model, est, cap);
  audit.expected_vhat = pairwise_sum(vhat_terms) / lambda.value();
  audit.ub_oracle = pairwise_sum(ub_terms) / lambda.value();
  audit.proxy_mse = pairwise_sum(mse_terms) / lambda.value();
  audit.approx_error = audit.expected_vhat - audit.ub_oracle;
  return audit;
}

// Measurability slack of a proxy, computed along two paths: directly against
// the conditional mean, and as half the mean squared change under one Gibbs
// step. The two agree whenever the kernel is exchangeable.
inline RobustSlack robust_slack_exact(const Design& design, const IndexRule& rule, const PotentialOutcomeModel& model,
                                      const Estimator& est, const Proxy& proxy,
                                      ProxyMode mode = ProxyMode::incremental, std::size_t cap = kDefaultSupportCap) {
  validate_rule(rule, design);
  const auto states = enumerate_support(design, cap);
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, double, detail::PairHash> g;
  for (const auto& w : states) {
    ProxyEvaluator eval(proxy, design, model, est, w, model.observed(w));
    for (const auto& [a, mu] : enumerate_index_sets(rule, w)) g.emplace(std::make_pair(a.mask(), w.mask()), eval(a, mode).value);
  }
  auto g_at = [&](const IndexSet& a, const TreatmentVector& w) -> double {
    auto it = g.find({a.mask(), w.mask()});
    if (it != g.end()) return it->second;
    // (a, w) outside the rule support given w: evaluate on demand.
    ProxyEvaluator eval(proxy, design, model, est, w, model.observed(w));
    const double v = eval(a, mode).value;
    g.emplace(std::make_pair(a.mask(), w.mask()), v);
    return v;
  };
  std::vector<double> direct, pairwise;
  for (const auto& w : states) {
    const double pw = design_pmf(design, w);
    for (const auto& [a, mu] : enumerate_index_sets(rule, w)) {
      const double gw = g_at(a, w);
      double cond = 0.0;
      for (const auto& [wp, c] : detail::conditional_law(design, rule, a, w)) cond += c * g_at(a, wp);
      direct.push_back(pw * mu * (gw - cond) * (gw - cond));
      for (const auto& [wp, c] : enumerate_conditional(design, a, w)) {
        const double d = gw - g_at(a, wp);
        pairwise.push_back(0.5 * pw * mu * c * d * d);
      }
    }
  }
  return {pairwise_sum(direct), pairwise_sum(pairwise)};
}

// Executable form of "the proxy reads only treatments outside A and outcomes
// of units unexposed to A": re-evaluate with W_A scrambled and Y_D replaced by
// NaN; count update sets whose proxy value changes. Fallback evaluations are
// skipped because they are documented as non-measurable.
inline std::size_t measurability_mismatches(const Design& design, const IndexRule& rule,
                                            const PotentialOutcomeModel& model, const Estimator& est,
                                            const Proxy& proxy, const TreatmentVector& w, Rng& rng) {
  const auto y = model.observed(w);
  ProxyEvaluator eval(proxy, design, model, est, w, y);
  std::size_t mismatches = 0;
  for (const auto& [a, mu] : enumerate_index_sets(rule, w)) {
    const auto base = eval(a, ProxyMode::direct);
    if (base.degenerate) continue;
    auto ym = y;
    for (std::size_t i : eval.deleted(a)) ym[i] = std::numeric_limits<double>::quiet_NaN();
    // Two maskings: W_A complemented, and W_A redrawn at random.
    bool same = true;
    for (int pass = 0; pass < 2; ++pass) {
      TreatmentVector wm = w;
      for (std::size_t j : a) wm.set(j, pass == 0 ? !w[j] : static_cast<bool>(rng() & 1U));
      ProxyEvaluator masked(proxy, design, model, est, wm, ym);
      const auto v = masked(a, ProxyMode::direct);
      same = same && ((v.value == base.value) || (std::isnan(v.value) && std::isnan(base.value)));
    }
    if (!same) ++mismatches;
  }
  return mismatches;
}

}  // namespace nj
