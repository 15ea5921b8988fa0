#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "nj/baselines.hpp"
#include "nj/core.hpp"
#include "nj/fourier.hpp"
#include "nj/harness/dgp.hpp"
#include "nj/spectral.hpp"

namespace nj::harness {

struct CheckResult {
  std::string name;
  bool passed = true;
  double max_violation = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;
  std::string detail;

  // Records one measured violation (positive means worse).
  void observe(double violation) {
    ++instances;
    if (std::isnan(violation)) {
      passed = false;
      max_violation = violation;
      return;
    }
    max_violation = std::max(max_violation, violation);
    if (violation > tolerance) passed = false;
  }
};

inline CheckResult make_check(std::string name, double tolerance) {
  CheckResult c;
  c.name = std::move(name);
  c.tolerance = tolerance;
  return c;
}

struct OracleReport {
  std::vector<CheckResult> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks) if (c.name == name) return &c;
    return nullptr;
  }
};

struct SuiteOptions {
  std::uint64_t seed = 1;
  double lambda_scale = 1.0;  // mutation: > 1 pretends the gap is larger than it is
  bool leaky_proxy = false;   // mutation: a proxy that peeks at W_A but claims to be strict
  std::size_t conservativeness_instances = 50;
  std::size_t neyman_instances = 100;
  std::size_t nw_instances = 100;
  std::size_t fourier_instances = 20;
  std::size_t robust_instances = 20;
  std::size_t mc_instances = 20;
  std::size_t mc_replicates = 10000;
  std::size_t gap_min_m = 4;
  std::size_t gap_max_m = 8;
};

// Violation of "a >= b" on the scale max(1, |a|, |b|).
inline double shortfall(double a, double b) {
  return (b - a) / std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------
// Random enumerable instances.

struct RandomInstance {
  std::string label;
  Design design;
  IndexRule rule;
  PotentialOutcomeModel model;
  Estimator est;
  Proxy proxy;
  SpectralGap lambda;
  bool strict = true;
};

struct InstanceOptions {
  std::size_t min_m = 3;
  std::size_t max_m = 8;
  bool nonmeasurable = false;  // draw proxies that read W_A or Y_D
  bool bernoulli_only = false;
};

namespace detail_suite {

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline PotentialOutcomeModel random_model(Rng& rng, std::size_t m, std::size_t max_exposure) {
  std::vector<IndexSet> sets;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::size_t> u{i};
    for (std::size_t j = 0; j < m; ++j)
      if (j != i && u.size() < max_exposure && uniform01(rng) < 0.25) u.push_back(j);
    sets.emplace_back(std::move(u));
  }
  std::vector<std::vector<double>> tables;
  for (const auto& s : sets) {
    std::vector<double> t(std::size_t{1} << s.size());
    for (auto& v : t) v = uniform(rng, -5.0, 5.0);
    tables.push_back(std::move(t));
  }
  std::vector<double> cov;
  if (uniform01(rng) < 0.5) {
    cov.resize(m);
    for (auto& x : cov) x = uniform(rng, -1.0, 1.0);
  }
  return PotentialOutcomeModel::from_tables(m, std::move(sets), std::move(tables), std::move(cov));
}

inline Estimator random_estimator(Rng& rng, const Design& design, const PotentialOutcomeModel& model, bool allow_ratio) {
  const std::size_t kind = uniform_index(rng, 0, allow_ratio ? 3 : 1);
  const auto& sets = model.exposure_sets();
  if (kind == 0) {
    std::vector<ExposureIndicator> ind;
    const bool own = uniform01(rng) < 0.5;
    for (std::size_t i = 0; i < sets.size(); ++i)
      ind.push_back(own ? ExposureIndicator{OwnTreatment{i}} : ExposureIndicator{AllTreated{sets[i]}});
    return make_ipw_direct(std::move(ind), design);
  }
  if (kind == 1) return make_ipw_tot(model, design);
  if (kind == 2) return DiffInMeans{};
  std::vector<ExposureIndicator> t, c;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    t.push_back(OwnTreatment{i});
    c.push_back(AllControl{IndexSet{i}});
  }
  return make_hajek(std::move(t), std::move(c), design);
}

// g(A, w) = E[f | S = A, W_-A = w_-A], computed from a table of f.
inline CustomProxy oracle_proxy(const Design& design, const IndexRule& rule, const PotentialOutcomeModel& model,
                                const Estimator& est) {
  auto table = std::make_shared<std::unordered_map<std::uint64_t, double>>();
  for (const auto& w : enumerate_support(design)) table->emplace(w.mask(), estimate(est, w, model.observed(w)));
  return {[design, rule, table](const IndexSet& a, const TreatmentVector& w, std::span<const double>) {
            double h = 0.0;
            for (const auto& [wp, c] : detail::conditional_law(design, rule, a, w)) h += c * table->at(wp.mask());
            return h;
          },
          false};
}

// Reads the resampled treatments, so it is not a function of (A, W_-A).
inline CustomProxy peeking_proxy(bool honest_flag) {
  return {[](const IndexSet& a, const TreatmentVector& w, std::span<const double> y) {
            double s = 0.0;
            for (double v : y) if (!std::isnan(v)) s += v;
            for (std::size_t j : a) s += w[j] ? 0.7 : -0.4;
            return s / static_cast<double>(y.size());
          },
          honest_flag};
}

}  // namespace detail_suite

inline RandomInstance random_instance(Rng& rng, const InstanceOptions& opt = {}) {
  using namespace detail_suite;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    try {
      const std::size_t m = uniform_index(rng, opt.min_m, opt.max_m);
      const bool bern = opt.bernoulli_only || uniform01(rng) < 0.5;
      Design design = Design::bernoulli(m, 0.5);
      if (bern) {
        std::vector<double> p(m);
        for (auto& x : p) x = uniform(rng, 0.2, 0.8);
        design = Design::bernoulli(p);
      } else {
        design = Design::completely_randomized(m, uniform_index(rng, 1, m - 1));
      }
      const bool peeking = opt.nonmeasurable && uniform01(rng) < 0.6;
      const std::size_t proxy_kind = uniform_index(rng, 0, 5);
      auto model = random_model(rng, m, !peeking && proxy_kind == 3 ? 1 : 3);
      auto est = random_estimator(rng, design, model, !bern);

      IndexRule rule = IndexRule::single_uniform(m);
      if (bern) {
        switch (uniform_index(rng, 0, 3)) {
          case 0: break;
          case 1: rule = IndexRule::uniform_subset(m, uniform_index(rng, 1, m)); break;
          case 2: rule = IndexRule::cycle_block(m, uniform_index(rng, 1, m)); break;
          default: {
            std::vector<std::size_t> divisors;
            for (std::size_t d = 1; d <= m; ++d) if (m % d == 0) divisors.push_back(d);
            rule = IndexRule::partition_block(m, divisors[uniform_index(rng, 0, divisors.size() - 1)]);
          }
        }
      } else {
        rule = uniform01(rng) < 0.5 ? IndexRule::treated_control_pair(m) : IndexRule::uniform_subset(m, uniform_index(rng, 2, m));
      }
      const auto lambda = spectral_gap_closed_form(design, rule);

      Proxy proxy = RecomputedAverage{};
      bool strict = true;
      std::string proxy_label;
      if (peeking) {
        proxy = peeking_proxy(true);
        strict = false;
        proxy_label = "peeking";
      } else {
        switch (proxy_kind) {
          case 0: proxy = RecomputedAverage{}; break;
          case 1: proxy = ClassicalLoo{uniform01(rng) < 0.5}; break;
          case 2: proxy = CovariateRegression{}; break;
          case 3: proxy = NeymanPair{}; break;
          case 4: proxy = oracle_proxy(design, rule, model, est); proxy_label = "oracle"; break;
          default: proxy = CustomProxy{[](const IndexSet&, const TreatmentVector&, std::span<const double>) { return 0.0; }, false}; proxy_label = "zero";
        }
      }
      if (proxy_label.empty()) proxy_label = proxy_name(proxy);
      // Reject combinations the proxy cannot serve, and estimators that
      // degenerate somewhere on the support.
      for (const auto& w : enumerate_support(design)) {
        const auto y = model.observed(w);
        (void)estimate(est, w, y);
        ProxyEvaluator g(proxy, design, model, est, w, y);
        for (const auto& [a, mu] : enumerate_index_sets(rule, w))
          if (g(a).degenerate) throw DegenerateRealization("fallback used");
      }
      std::string label = std::string(bern ? "bernoulli" : "crd") + "(m=" + std::to_string(m) + ")/" + rule.name() + "/" +
                          proxy_label;
      return {label, std::move(design), std::move(rule), std::move(model), std::move(est), std::move(proxy), lambda, strict};
    } catch (const Error&) {
      continue;
    }
  }
  throw Error("random_instance: no valid instance after 1000 attempts");
}

// ---------------------------------------------------------------------------
// Individual checks.

inline std::vector<CheckResult> check_conservativeness(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 1);
  auto vs_var = make_check("conservativeness: E[V] >= Var", 1e-10);
  auto vs_ub = make_check("conservativeness: E[V] >= UB_oracle", 1e-10);
  auto ub_var = make_check("oracle bound: UB_oracle >= Var", 1e-10);
  auto decomposition = make_check("decomposition: E[V] - UB_oracle = proxy MSE", 1e-10);
  auto masking = make_check("measurability masking", 0.0);
  for (std::size_t k = 0; k < opt.conservativeness_instances; ++k) {
    InstanceOptions io;
    io.max_m = 10;
    auto inst = random_instance(rng, io);
    if (opt.leaky_proxy) {
      inst.proxy = detail_suite::peeking_proxy(false);
      inst.strict = true;
    }
    const auto audit = expected_vhat_exact(inst.design, inst.rule, inst.model, inst.est, inst.proxy, inst.lambda);
    const double reported = audit.expected_vhat / opt.lambda_scale;
    vs_var.observe(shortfall(reported, audit.true_var));
    vs_ub.observe(shortfall(reported, audit.ub_oracle / opt.lambda_scale));
    ub_var.observe(shortfall(audit.ub_oracle, audit.true_var));
    if (inst.strict) {
      decomposition.observe(std::abs(audit.approx_error - audit.proxy_mse) /
                            std::max({1.0, audit.expected_vhat, audit.ub_oracle}));
      for (int rep = 0; rep < 2; ++rep) {
        const auto w = sample_treatments(inst.design, rng);
        masking.observe(static_cast<double>(
            measurability_mismatches(inst.design, inst.rule, inst.model, inst.est, inst.proxy, w, rng)));
      }
    }
  }
  return {vs_var, vs_ub, ub_var, decomposition, masking};
}

struct GapCase {
  std::string label;
  Design design;
  IndexRule rule;
};

inline std::vector<GapCase> gap_cases(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 2);
  std::vector<GapCase> out;
  for (std::size_t m = opt.gap_min_m; m <= opt.gap_max_m; ++m) {
    std::vector<double> p(m);
    for (auto& x : p) x = detail_suite::uniform(rng, 0.2, 0.8);
    const auto bern = Design::bernoulli(p);
    const std::string bl = "bernoulli(m=" + std::to_string(m) + ")/";
    out.push_back({bl + "single", bern, IndexRule::single_uniform(m)});
    for (std::size_t l = 1; l <= m; ++l) {
      out.push_back({bl + "subset(" + std::to_string(l) + ")", bern, IndexRule::uniform_subset(m, l)});
      out.push_back({bl + "cycle(" + std::to_string(l) + ")", bern, IndexRule::cycle_block(m, l)});
    }
    for (std::size_t n1 = 1; n1 < m; ++n1) {
      const auto crd = Design::completely_randomized(m, n1);
      const std::string cl = "crd(m=" + std::to_string(m) + ",n1=" + std::to_string(n1) + ")/";
      for (std::size_t l = 2; l <= m; ++l) out.push_back({cl + "subset(" + std::to_string(l) + ")", crd, IndexRule::uniform_subset(m, l)});
      out.push_back({cl + "pair", crd, IndexRule::treated_control_pair(m)});
    }
  }
  return out;
}

// Sorted-list comparison of two multisets of eigenvalues.
inline double multiset_distance(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

inline std::vector<CheckResult> check_spectral(const SuiteOptions& opt) {
  auto agree = make_check("spectral gap: closed form = eigen oracle", 1e-9);
  auto crd_family = make_check("spectral family: CRD+UniformSubset spectrum = {lambda_d}", 1e-9);
  auto bern_family = make_check("spectral family: Bernoulli spectrum = {P(S misses A)}", 1e-9);
  auto balance = make_check("detailed balance", 1e-12);
  auto exchange = make_check("exchangeability of (S, W, W')", 1e-12);
  auto rows = make_check("kernel rows sum to one", 1e-12);
  for (const auto& c : gap_cases(opt)) {
    const auto kernel = build_transition_kernel(c.design, c.rule);
    rows.observe(row_sum_violation(kernel));
    balance.observe(detailed_balance_violation(kernel));
    exchange.observe(exchangeability_violation(c.design, c.rule));
    const auto spectrum = kernel_spectrum(kernel);
    const double eig_gap = 1.0 - spectrum[1];
    agree.observe(std::abs(eig_gap - spectral_gap_closed_form(c.design, c.rule).value()));
    const std::size_t m = c.design.size();
    if (const auto* crd = c.design.as_crd(); crd && std::holds_alternative<UniformSubset>(c.rule.variant())) {
      const std::size_t l = std::get<UniformSubset>(c.rule.variant()).size;
      std::vector<double> expected;
      for (std::size_t d = 0; d <= std::min(crd->n1, m - crd->n1); ++d) {
        const double mult = choose(static_cast<std::int64_t>(m), static_cast<std::int64_t>(d)) -
                            (d ? choose(static_cast<std::int64_t>(m), static_cast<std::int64_t>(d - 1)) : 0.0);
        for (int r = 0; r < static_cast<int>(mult); ++r) expected.push_back(crd_eigenvalue_formula(m, l, d));
      }
      crd_family.observe(multiset_distance(spectrum, expected));
    }
    if (c.design.is_bernoulli()) {
      std::vector<double> expected;
      for (std::uint64_t a = 0; a < (std::uint64_t{1} << m); ++a)
        expected.push_back(1.0 - hit_probability(c.rule, IndexSet::from_mask(a)));
      bern_family.observe(multiset_distance(spectrum, expected));
    }
  }
  return {agree, crd_family, bern_family, balance, exchange, rows};
}

inline CheckResult check_neyman_identity(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 3);
  auto r = make_check("Neyman identity", 1e-12);
  for (std::size_t k = 0; k < opt.neyman_instances; ++k) {
    const std::size_t n = detail_suite::uniform_index(rng, 4, 50);
    const std::size_t n1 = detail_suite::uniform_index(rng, 2, n - 2);
    std::vector<double> y(n);
    for (auto& v : y) v = detail_suite::uniform(rng, -5.0, 5.0);
    const auto w = sample_treatments(Design::completely_randomized(n, n1), rng);
    r.observe(neyman_identity_check(y, w).relative_gap());
  }
  return r;
}

struct NwInstance {
  Design design;
  PotentialOutcomeModel model;
  Estimator est;
  TreatmentVector w;
  std::size_t length;
  std::size_t half_width;
};

inline NwInstance random_nw_instance(Rng& rng, std::size_t max_n = 200) {
  const std::size_t n = detail_suite::uniform_index(rng, 8, max_n);
  const std::size_t max_half = std::min<std::size_t>(3, (n - 1) / 4);
  const std::size_t half = detail_suite::uniform_index(rng, 0, max_half);
  // lag L + 2M - 1 must not exceed floor((n-1)/2).
  const std::size_t max_l = (n - 1) / 2 + 1 - 2 * half;
  const std::size_t length = detail_suite::uniform_index(rng, 1, max_l);
  std::vector<double> p(n);
  for (auto& x : p) x = detail_suite::uniform(rng, 0.3, 0.7);
  auto design = Design::bernoulli(p);
  auto sets = circular_windows(n, half);
  std::vector<std::vector<double>> tables;
  for (const auto& s : sets) {
    std::vector<double> t(std::size_t{1} << s.size());
    for (auto& v : t) v = detail_suite::uniform(rng, -5.0, 5.0);
    tables.push_back(std::move(t));
  }
  auto model = PotentialOutcomeModel::from_tables(n, std::move(sets), std::move(tables));
  Estimator est = IpwTot{};
  if (uniform01(rng) < 0.5) {
    est = make_ipw_tot(model, design);
  } else {
    std::vector<ExposureIndicator> ind;
    for (std::size_t i = 0; i < n; ++i) ind.push_back(OwnTreatment{i});
    est = make_ipw_direct(std::move(ind), design);
  }
  auto w = sample_treatments(design, rng);
  return {std::move(design), std::move(model), std::move(est), std::move(w), length, half};
}

inline CheckResult check_nw_identity(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 4);
  auto r = make_check("Newey-West identity", 1e-12);
  for (std::size_t k = 0; k < opt.nw_instances; ++k) {
    const auto inst = random_nw_instance(rng);
    r.observe(nw_identity_check(inst.design, inst.model, inst.est, inst.w, inst.length, inst.half_width).relative_gap());
  }
  return r;
}

inline std::vector<CheckResult> check_fourier(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 5);
  auto parseval = make_check("Fourier: Parseval", 1e-10);
  auto variance = make_check("Fourier: Var = sum of c_A^2 over A != {}", 1e-10);
  auto recon = make_check("Fourier: reconstruction", 1e-10);
  auto ub = make_check("Fourier: UB_oracle Fourier form = exact", 1e-10);
  auto mono = make_check("Fourier: UB_oracle(L) non-increasing", 1e-12);
  auto at_m = make_check("Fourier: UB_oracle(m) = Var", 1e-10);
  auto hits = make_check("Fourier: gap-complement hit probability", 1e-12);
  auto eigenfn = make_check("Fourier: phi_A eigenfunctions of the kernel", 1e-10);
  auto inflation = make_check("Fourier: inflation ratio >= 1", 1e-12);
  const std::size_t m = 8;
  for (std::size_t k = 0; k < opt.fourier_instances; ++k) {
    std::vector<double> p(m);
    for (auto& x : p) x = detail_suite::uniform(rng, 0.2, 0.8);
    const auto design = Design::bernoulli(p);
    const auto model = detail_suite::random_model(rng, m, 3);
    Estimator est = DiffInMeans{};
    if (k % 4 == 3) {
      // A nonlinear statistic of the outcomes.
      est = CustomEstimator{[](const TreatmentVector& w, std::span<const double> y) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += (w[i] ? 1.0 : -0.5) * std::tanh(y[i]) * y[(i + 1) % y.size()];
        return s / static_cast<double>(y.size());
      }};
    } else {
      est = detail_suite::random_estimator(rng, design, model, false);
    }
    const auto f = [&](const TreatmentVector& w) { return estimate(est, w, model.observed(w)); };
    const auto e = fourier_coefficients(design, f);
    const double var = true_variance_exact(design, model, est);
    double second = 0.0;
    for (const auto& w : enumerate_support(design)) second += design_pmf(design, w) * f(w) * f(w);
    parseval.observe(relative_difference(e.squared_norm(), second));
    variance.observe(relative_difference(e.variance(), var));
    double worst = 0.0;
    for (const auto& w : enumerate_support(design)) worst = std::max(worst, relative_difference(fourier_reconstruct(e, w), f(w)));
    recon.observe(worst);

    std::vector<IndexRule> rules{IndexRule::single_uniform(m), IndexRule::uniform_subset(m, 3), IndexRule::partition_block(m, 4)};
    for (std::size_t l = 1; l <= m; ++l) rules.push_back(IndexRule::cycle_block(m, l));
    for (const auto& rule : rules) {
      const auto lambda = spectral_gap_closed_form(design, rule);
      ub.observe(relative_difference(ub_oracle_fourier(e, rule, lambda), ub_oracle_exact(design, rule, model, est, lambda)));
    }
    std::vector<std::size_t> grid(m);
    for (std::size_t l = 0; l < m; ++l) grid[l] = l + 1;
    const auto curve = monotonicity_check(e, grid);
    mono.observe(curve.max_increase / std::max(1.0, curve.values.front()));
    at_m.observe(relative_difference(curve.values.back(), var));

    if (k == 0) {
      for (std::size_t l = 1; l <= m; ++l) {
        const auto rule = IndexRule::cycle_block(m, l);
        const auto lambda = spectral_gap_closed_form(design, rule);
        for (std::uint64_t a = 1; a < (std::uint64_t{1} << m); ++a) {
          const auto set = IndexSet::from_mask(a);
          hits.observe(std::abs(cycle_block_hit_probability(m, l, set) - hit_probability(rule, set)));
          inflation.observe(1.0 - inflation_ratio(rule, set, lambda));
        }
      }
      const auto rule = IndexRule::cycle_block(m, 3);
      const auto kernel = build_transition_kernel(design, rule);
      for (std::uint64_t a = 0; a < (std::uint64_t{1} << m); a += 7) {
        std::vector<double> phi(kernel.states.size());
        for (std::size_t s = 0; s < phi.size(); ++s) phi[s] = fourier_basis(p, a, kernel.states[s]);
        const auto applied = kernel.matrix.multiply(phi);
        const double ev = 1.0 - hit_probability(rule, IndexSet::from_mask(a));
        double w = 0.0;
        for (std::size_t s = 0; s < phi.size(); ++s) w = std::max(w, std::abs(applied[s] - ev * phi[s]));
        eigenfn.observe(w);
      }
    }
  }
  return {parseval, variance, recon, ub, mono, at_m, hits, eigenfn, inflation};
}

inline std::vector<CheckResult> check_robustness(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 6);
  auto paths = make_check("robustness identity: direct = half mean squared change", 1e-10);
  auto strict_zero = make_check("robustness: strict proxies have zero slack", 1e-10);
  auto positive = make_check("robustness: unbuffered time-series proxy has positive slack", 0.0);
  std::size_t nonmeasurable = 0;
  for (std::size_t k = 0; k < opt.robust_instances; ++k) {
    if (k % 5 == 4) {
      // Decaying-dependence series on T = 12 with an unbuffered block proxy.
      DecayDgpConfig cfg;
      cfg.T = 12;
      cfg.ell = 3;
      cfg.r = k % 2;
      cfg.rate = 0.7;
      cfg.drift_period = 6.0;
      cfg.enforce_regime = false;
      const auto inst = gen_decay_model(cfg);
      const Estimator est = inst.estimator;
      const Proxy proxy = RecomputedAverage{RightBuffer{cfg.r}};
      const auto rule = IndexRule::partition_block(cfg.T, cfg.ell);
      const auto s = robust_slack_exact(inst.design, rule, inst.model, est, proxy);
      paths.observe(relative_difference(s.direct, s.pairwise));
      positive.observe(s.direct > 1e-12 ? 0.0 : 1.0);
      ++nonmeasurable;
      continue;
    }
    InstanceOptions io;
    io.max_m = 7;
    io.nonmeasurable = true;
    const auto inst = random_instance(rng, io);
    const auto s = robust_slack_exact(inst.design, inst.rule, inst.model, inst.est, inst.proxy);
    paths.observe(relative_difference(s.direct, s.pairwise));
    if (inst.strict) strict_zero.observe(s.direct / std::max(1.0, s.pairwise));
    else ++nonmeasurable;
  }
  paths.detail = std::to_string(nonmeasurable) + " non-measurable proxies";
  return {paths, strict_zero, positive};
}

inline CheckResult check_monte_carlo(const SuiteOptions& opt) {
  Rng rng = substream(opt.seed, 7);
  auto r = make_check("Monte Carlo V_hat within 4 conditional SE of exact", 4.0);
  for (std::size_t k = 0; k < opt.mc_instances; ++k) {
    const auto inst = random_instance(rng);
    const auto w = sample_treatments(inst.design, rng);
    const double exact = nj_exact(inst.design, inst.rule, inst.model, inst.est, inst.proxy, w, inst.lambda).v_hat;
    const auto mc = nj_monte_carlo(inst.design, inst.rule, inst.model, inst.est, inst.proxy, w, inst.lambda,
                                   opt.mc_replicates, rng);
    const double diff = std::abs(mc.v_hat - exact);
    // When every draw agrees the SE is pure rounding, so floor it.
    r.observe(diff / std::max(mc.standard_error, 1e-12 * std::max(1.0, exact)));
  }
  return r;
}

inline OracleReport run_oracle_suite(const SuiteOptions& opt = {}) {
  OracleReport rep;
  auto add = [&](std::vector<CheckResult> v) { rep.checks.insert(rep.checks.end(), v.begin(), v.end()); };
  add(check_conservativeness(opt));
  add(check_spectral(opt));
  add({check_neyman_identity(opt)});
  add({check_nw_identity(opt)});
  add(check_fourier(opt));
  add(check_robustness(opt));
  add({check_monte_carlo(opt)});
  return rep;
}

}  // namespace nj::harness
