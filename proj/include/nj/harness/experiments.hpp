#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nj/baselines.hpp"
#include "nj/core.hpp"
#include "nj/harness/csv.hpp"
#include "nj/harness/dgp.hpp"
#include "nj/harness/parallel.hpp"

namespace nj::harness {

struct ExperimentOptions {
  std::size_t reps = 1000;
  std::size_t truth_multiplier = 10;  // truth uses this many times more draws
  std::size_t threads = 1;
  std::uint64_t seed = 1;
};

// Stream layout under one master seed.
inline constexpr std::uint64_t kModelStream = std::uint64_t{1} << 50;
inline constexpr std::uint64_t kTruthStreamBase = std::uint64_t{1} << 40;

struct MonteCarloMoments {
  double mean = 0.0;
  double variance = 0.0;  // sample variance of the draws
  double variance_se = 0.0;
  double mean_se = 0.0;
  std::size_t draws = 0;
  std::size_t skipped = 0;
};

// Mean, variance and their standard errors; NaN entries are skipped.
inline MonteCarloMoments moments(const std::vector<double>& raw) {
  std::vector<double> xs;
  xs.reserve(raw.size());
  for (double v : raw) if (!std::isnan(v)) xs.push_back(v);
  MonteCarloMoments m;
  m.draws = xs.size();
  m.skipped = raw.size() - xs.size();
  if (xs.size() < 2) throw InvalidArgument("Monte Carlo summary needs at least two usable draws");
  m.mean = pairwise_mean(xs);
  std::vector<double> c2(xs.size()), c4(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double d = xs[k] - m.mean;
    c2[k] = d * d;
    c4[k] = d * d * d * d;
  }
  const double n = static_cast<double>(xs.size());
  const double m2 = pairwise_mean(c2);
  const double m4 = pairwise_mean(c4);
  m.variance = m2 * n / (n - 1.0);
  m.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  m.mean_se = std::sqrt(m.variance / n);
  return m;
}

// Var(f(W)) by Monte Carlo over fresh treatment draws.
template <class Draw>
MonteCarloMoments monte_carlo_truth(const ExperimentOptions& opt, Draw&& draw) {
  const std::size_t count = opt.reps * opt.truth_multiplier;
  std::vector<double> f(count);
  parallel_for(count, opt.threads, [&](std::size_t k) {
    Rng rng = substream(opt.seed, kTruthStreamBase + k);
    try {
      f[k] = draw(rng);
    } catch (const DegenerateRealization&) {
      f[k] = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return moments(f);
}

inline ResultsRow make_row(const std::string& experiment, std::size_t n, std::size_t L, const std::string& estimator,
                           const MonteCarloMoments& vhat, const MonteCarloMoments& truth, std::size_t degenerate,
                           std::uint64_t seed) {
  ResultsRow r;
  r.experiment = experiment;
  r.n = n;
  r.L = L;
  r.estimator = estimator;
  r.mean_vhat = vhat.mean;
  r.true_var = truth.variance;
  r.ratio = vhat.mean / truth.variance;
  r.reps = vhat.draws;
  r.degenerate = degenerate;
  r.seed = seed;
  r.vhat_se = vhat.mean_se;
  r.true_var_se = truth.variance_se;
  return r;
}

// Delta-method standard error of mean_vhat / true_var.
inline double ratio_se(const ResultsRow& r) {
  const double a = r.vhat_se / r.mean_vhat;
  const double b = r.true_var_se / r.true_var;
  return std::abs(r.ratio) * std::sqrt(a * a + b * b);
}

inline std::vector<ResultsRow> rows_for(const std::vector<ResultsRow>& rows, const std::string& estimator) {
  std::vector<ResultsRow> out;
  for (const auto& r : rows) if (r.estimator == estimator) out.push_back(r);
  return out;
}

// The grid point minimizing mean V_hat; the summary row is tagged "@best".
inline std::optional<ResultsRow> best_row(const std::vector<ResultsRow>& rows, const std::string& estimator) {
  std::optional<ResultsRow> best;
  for (const auto& r : rows)
    if (r.estimator == estimator && (!best || r.mean_vhat < best->mean_vhat)) best = r;
  return best;
}

inline void append_best_rows(std::vector<ResultsRow>& rows, const std::vector<std::string>& estimators) {
  for (const auto& e : estimators) {
    if (auto b = best_row(rows, e)) {
      b->estimator = e + "@best";
      rows.push_back(*b);
    }
  }
}

// Interior minimum strictly below both ends of the curve (ordered by L).
inline bool u_shaped(std::vector<ResultsRow> curve) {
  if (curve.size() < 3) return false;
  std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.L < b.L; });
  auto it = std::min_element(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
  return it != curve.begin() && it != curve.end() - 1 && it->ratio < curve.front().ratio && it->ratio < curve.back().ratio;
}

inline std::vector<std::size_t> grid_up_to(std::size_t max_l) {
  std::vector<std::size_t> g;
  for (std::size_t l = 1; l <= max_l; ++l) g.push_back(l);
  return g;
}

// ---------------------------------------------------------------------------

// NJ-avg and NJ-cov with CycleBlock(L), lambda = L/n, on one fixed (X, eps).
inline std::vector<ResultsRow> run_cycle_experiment(const CycleDgpConfig& cfg, const std::vector<std::size_t>& grid,
                                                    const ExperimentOptions& opt) {
  detail::require(opt.reps >= 100, "cycle experiment: need at least 100 replications");
  Rng model_rng = substream(opt.seed, kModelStream);
  const auto inst = gen_cycle_model(cfg, model_rng);
  const Estimator est = inst.estimator;
  const std::vector<Proxy> proxies = {RecomputedAverage{}, CovariateRegression{}};
  const std::vector<std::string> names = {"nj-avg", "nj-cov"};
  std::vector<IndexRule> rules;
  std::vector<SpectralGap> gaps;
  for (std::size_t l : grid) {
    detail::require(l >= 1 && l < cfg.n, "cycle experiment: block length must lie in [1, n)");
    rules.push_back(IndexRule::cycle_block(cfg.n, l));
    gaps.emplace_back(static_cast<double>(l) / static_cast<double>(cfg.n), GapMethod::closed_form);
  }
  const std::size_t cells = grid.size() * proxies.size();
  std::vector<std::vector<double>> v(cells, std::vector<double>(opt.reps));
  std::vector<std::vector<std::size_t>> degen(cells, std::vector<std::size_t>(opt.reps, 0));
  parallel_for(opt.reps, opt.threads, [&](std::size_t k) {
    Rng rng = substream(opt.seed, k);
    const auto w = sample_treatments(inst.design, rng);
    const auto y = inst.model.observed(w);
    const double f = estimate(est, w, y);
    for (std::size_t p = 0; p < proxies.size(); ++p) {
      const ProxyEvaluator g(proxies[p], inst.design, inst.model, est, w, y);
      for (std::size_t li = 0; li < grid.size(); ++li) {
        const auto rep = jackknife_sum(g, f, rules[li], w, gaps[li]);
        v[p * grid.size() + li][k] = rep.v_hat;
        degen[p * grid.size() + li][k] = rep.degenerate_count;
      }
    }
  });
  const auto truth = monte_carlo_truth(opt, [&](Rng& rng) {
    const auto w = sample_treatments(inst.design, rng);
    return estimate(est, w, inst.model.observed(w));
  });
  std::vector<ResultsRow> rows;
  for (std::size_t p = 0; p < proxies.size(); ++p) {
    for (std::size_t li = 0; li < grid.size(); ++li) {
      const auto& d = degen[p * grid.size() + li];
      std::size_t dc = 0;
      for (auto x : d) dc += x;
      rows.push_back(make_row("cycle", cfg.n, grid[li], names[p], moments(v[p * grid.size() + li]), truth, dc, opt.seed));
    }
  }
  append_best_rows(rows, names);
  return rows;
}

// Hajek estimator over (B_i, F_i) with CycleBlock(L) on the k block seeds,
// lambda = L/k, and the deletion-recomputed Hajek proxy.
inline std::vector<ResultsRow> run_switchback_experiment(const SwitchbackDgpConfig& cfg,
                                                         const std::vector<std::size_t>& grid,
                                                         const ExperimentOptions& opt) {
  detail::require(opt.reps >= 100, "switchback experiment: need at least 100 replications");
  Rng model_rng = substream(opt.seed, kModelStream);
  const auto inst = gen_switchback_model(cfg, model_rng);
  const Estimator est = inst.estimator;
  const Proxy proxy = RecomputedAverage{};
  const std::size_t k = cfg.blocks();
  std::vector<IndexRule> rules;
  std::vector<SpectralGap> gaps;
  for (std::size_t l : grid) {
    detail::require(l >= 1 && l < k, "switchback experiment: block length must lie in [1, k)");
    rules.push_back(IndexRule::cycle_block(k, l));
    gaps.emplace_back(static_cast<double>(l) / static_cast<double>(k), GapMethod::closed_form);
  }
  std::vector<std::vector<double>> v(grid.size(), std::vector<double>(opt.reps));
  std::vector<std::vector<std::size_t>> degen(grid.size(), std::vector<std::size_t>(opt.reps, 0));
  parallel_for(opt.reps, opt.threads, [&](std::size_t rep) {
    Rng rng = substream(opt.seed, rep);
    const auto z = sample_treatments(inst.design, rng);
    const auto y = inst.model.observed(z);
    double f = 0.0;
    try {
      f = estimate(est, z, y);
    } catch (const DegenerateRealization&) {
      for (auto& col : v) col[rep] = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    const ProxyEvaluator g(proxy, inst.design, inst.model, est, z, y);
    for (std::size_t li = 0; li < grid.size(); ++li) {
      const auto r = jackknife_sum(g, f, rules[li], z, gaps[li]);
      v[li][rep] = r.v_hat;
      degen[li][rep] = r.degenerate_count;
    }
  });
  const auto truth = monte_carlo_truth(opt, [&](Rng& rng) {
    const auto z = sample_treatments(inst.design, rng);
    return estimate(est, z, inst.model.observed(z));
  });
  std::vector<ResultsRow> rows;
  const std::string tag = "switchback(ell=" + std::to_string(cfg.ell) + ";b=" + std::to_string(cfg.b) + ")";
  for (std::size_t li = 0; li < grid.size(); ++li) {
    std::size_t dc = 0;
    for (auto x : degen[li]) dc += x;
    rows.push_back(make_row(tag, cfg.T, grid[li], "nj-hajek", moments(v[li]), truth, dc, opt.seed));
  }
  append_best_rows(rows, {"nj-hajek"});
  return rows;
}

// PartitionBlock(ell), lambda = ell/T, recomputed average after deleting the
// block plus r units to its right.
inline std::vector<ResultsRow> run_decay_experiment(const DecayDgpConfig& cfg, const ExperimentOptions& opt) {
  detail::require(opt.reps >= 2, "decay experiment: need at least two replications");
  const auto inst = gen_decay_model(cfg);
  const Estimator est = inst.estimator;
  const Proxy proxy = RecomputedAverage{RightBuffer{cfg.r}};
  const auto rule = IndexRule::partition_block(cfg.T, cfg.ell);
  const SpectralGap lambda(static_cast<double>(cfg.ell) / static_cast<double>(cfg.T), GapMethod::closed_form);
  std::vector<double> v(opt.reps);
  parallel_for(opt.reps, opt.threads, [&](std::size_t rep) {
    Rng rng = substream(opt.seed, rep);
    const auto w = sample_treatments(inst.design, rng);
    const auto y = inst.model.observed(w);
    const ProxyEvaluator g(proxy, inst.design, inst.model, est, w, y);
    v[rep] = jackknife_sum(g, estimate(est, w, y), rule, w, lambda).v_hat;
  });
  const auto truth = monte_carlo_truth(opt, [&](Rng& rng) {
    const auto w = sample_treatments(inst.design, rng);
    return estimate(est, w, inst.model.observed(w));
  });
  const std::string tag = std::string("decay(") + (cfg.kind == DecayKind::geometric ? "geometric" : "polynomial") + ")";
  return {make_row(tag, cfg.T, cfg.ell, "nj-buffer(r=" + std::to_string(cfg.r) + ")", moments(v), truth, 0, opt.seed)};
}

struct SutvaConfig {
  std::size_t n = 50;
  std::size_t n1 = 25;
  double effect = 1.0;
  double effect_spread = 0.5;  // heterogeneity of the unit-level effects

  void validate() const {
    detail::require(n1 >= 2 && n1 + 2 <= n, "sutva experiment: each arm needs at least two units");
    detail::require(effect_spread >= 0.0, "sutva experiment: effect spread must be non-negative");
  }
};

// No interference, CRD, difference in means: the pair-rule jackknife against
// the classical Neyman estimator.
inline std::vector<ResultsRow> run_sutva_experiment(const SutvaConfig& cfg, const ExperimentOptions& opt) {
  cfg.validate();
  detail::require(opt.reps >= 2, "sutva experiment: need at least two replications");
  Rng model_rng = substream(opt.seed, kModelStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<IndexSet> sets;
  std::vector<std::vector<double>> tables;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double y0 = normal(model_rng);
    const double tau = cfg.effect + cfg.effect_spread * normal(model_rng);
    sets.push_back(IndexSet{i});
    tables.push_back({y0, y0 + tau});
  }
  const auto model = PotentialOutcomeModel::from_tables(cfg.n, std::move(sets), std::move(tables));
  const auto design = Design::completely_randomized(cfg.n, cfg.n1);
  const auto rule = IndexRule::treated_control_pair(cfg.n);
  const auto lambda = spectral_gap_closed_form(design, rule);
  const Estimator est = DiffInMeans{};
  const Proxy proxy = NeymanPair{};
  std::vector<double> nj(opt.reps), classical(opt.reps);
  parallel_for(opt.reps, opt.threads, [&](std::size_t rep) {
    Rng rng = substream(opt.seed, rep);
    const auto w = sample_treatments(design, rng);
    const auto y = model.observed(w);
    nj[rep] = nj_exact(design, rule, model, est, proxy, w, lambda).v_hat;
    classical[rep] = neyman_classical(y, w);
  });
  const auto truth = monte_carlo_truth(opt, [&](Rng& rng) {
    const auto w = sample_treatments(design, rng);
    return estimate(est, w, model.observed(w));
  });
  return {make_row("sutva", cfg.n, 2, "nj-neyman-pair", moments(nj), truth, 0, opt.seed),
          make_row("sutva", cfg.n, 0, "neyman-classical", moments(classical), truth, 0, opt.seed)};
}

}  // namespace nj::harness
