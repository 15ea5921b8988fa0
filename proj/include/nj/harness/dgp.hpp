#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/outcome_model.hpp"
#include "nj/rng.hpp"

namespace nj::harness {

// ---------------------------------------------------------------------------
// Cycle graph with exposure T_i = W_{i-1} W_{i+1}.

struct CycleDgpConfig {
  std::size_t n = 100;
  double pi = 0.5;
  double noise_scale = 0.3;
  bool zero_covariates = false;  // force X_i = 0, for checks

  void validate() const {
    detail::require(n >= 5, "cycle DGP: need n >= 5");
    detail::require(pi > 0.0 && pi < 1.0, "cycle DGP: pi must lie in (0, 1)");
    detail::require(noise_scale >= 0.0, "cycle DGP: noise scale must be non-negative");
  }
};

struct CycleInstance {
  Design design;
  PotentialOutcomeModel model;
  IpwDirect estimator;
  std::vector<double> covariates;
  std::vector<double> noise;
};

inline std::vector<IndexSet> cycle_neighbor_sets(std::size_t n) {
  std::vector<IndexSet> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(IndexSet{(i + n - 1) % n, (i + 1) % n});
  return out;
}

// Y_i = b_i + tau_i T_i + eps_i with b_i = 0.5 + cos X_i, tau_i = 1 + X_i,
// X_i ~ N(0,1), eps_i ~ noise_scale N(0,1), all drawn once and then fixed.
inline CycleInstance gen_cycle_model(const CycleDgpConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(cfg.n), eps(cfg.n);
  for (auto& v : x) v = cfg.zero_covariates ? 0.0 : normal(rng);
  for (auto& v : eps) v = cfg.noise_scale * normal(rng);
  auto sets = cycle_neighbor_sets(cfg.n);
  auto model = PotentialOutcomeModel::tabulated(
      cfg.n, sets,
      [&](std::size_t i, std::span<const std::uint8_t> local) {
        const double t = (local[0] && local[1]) ? 1.0 : 0.0;
        return 0.5 + std::cos(x[i]) + (1.0 + x[i]) * t + eps[i];
      },
      x);
  auto design = Design::bernoulli(cfg.n, cfg.pi);
  std::vector<ExposureIndicator> ind;
  for (const auto& s : sets) ind.push_back(AllTreated{s});
  auto est = make_ipw_direct(std::move(ind), design);
  return {std::move(design), std::move(model), std::move(est), std::move(x), std::move(eps)};
}

// ---------------------------------------------------------------------------
// Switchback with a hidden carryover state and burn-in/focal outcome units.

struct SwitchbackDgpConfig {
  std::size_t T = 10000;
  std::size_t ell = 50;
  std::size_t b = 25;
  double alpha = 0.1;
  double rho = 0.6;
  double pi = 0.5;

  std::size_t blocks() const { return T / ell; }

  void validate() const {
    detail::require(ell >= 1 && T % ell == 0, "switchback DGP: T must be a multiple of ell");
    detail::require(T / ell >= 3, "switchback DGP: need at least three blocks");
    // b = ell is accepted: the whole block is burn-in and every F_i is zero.
    detail::require(b >= 1 && b <= ell, "switchback DGP: need 1 <= b <= ell");
    detail::require(alpha > 0.0 && alpha <= 1.0, "switchback DGP: alpha must lie in (0, 1]");
    detail::require(pi > 0.0 && pi < 1.0, "switchback DGP: pi must lie in (0, 1)");
  }
};

struct SwitchbackInstance {
  Design design;  // Bernoulli over the k block seeds Z_i
  PotentialOutcomeModel model;
  HajekBipartite estimator;
  std::vector<double> noise;
};

inline double switchback_effect(std::size_t t_one_based) {
  return 0.15 + 0.25 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t_one_based) / 800.0);
}

// Y_t for every t given block seeds z, with H_0 = 0.
inline std::vector<double> switchback_series(const SwitchbackDgpConfig& cfg, const std::vector<double>& eps,
                                             const TreatmentVector& z) {
  std::vector<double> y(cfg.T);
  double h = 0.0;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const bool w = z[t / cfg.ell];
    h = w ? h + cfg.alpha * (1.0 - h) : (1.0 - cfg.alpha) * h;
    y[t] = switchback_effect(t + 1) * (w ? 1.0 : 0.0) + cfg.rho * h + eps[t];
  }
  return y;
}

// (B_1, F_1, ..., B_k, F_k) with B_i, F_i = (2/ell) * sum of Y_t over the
// burn-in and focal part of block i.
inline std::vector<double> switchback_units(const SwitchbackDgpConfig& cfg, const std::vector<double>& series) {
  const std::size_t k = cfg.blocks();
  std::vector<double> out(2 * k, 0.0);
  const double scale = 2.0 / static_cast<double>(cfg.ell);
  for (std::size_t i = 0; i < k; ++i) {
    long double burn = 0, focal = 0;
    for (std::size_t s = 0; s < cfg.ell; ++s) (s < cfg.b ? burn : focal) += series[i * cfg.ell + s];
    out[2 * i] = scale * static_cast<double>(burn);
    out[2 * i + 1] = scale * static_cast<double>(focal);
  }
  return out;
}

inline std::vector<IndexSet> switchback_exposure_sets(std::size_t k) {
  std::vector<IndexSet> out;
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back(i == 0 ? IndexSet{0} : IndexSet{i - 1, i});
    out.push_back(IndexSet{i});
  }
  return out;
}

inline SwitchbackInstance gen_switchback_model(const SwitchbackDgpConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(cfg.T);
  for (auto& e : eps) e = normal(rng);
  const std::size_t k = cfg.blocks();
  auto sets = switchback_exposure_sets(k);
  // Outcomes depend on the whole prefix of seeds; the exposure sets above
  // are the bipartite approximation, so the model is flagged accordingly.
  auto model = PotentialOutcomeModel::trajectory(
      k, sets, [cfg, eps](const TreatmentVector& z) { return switchback_units(cfg, switchback_series(cfg, eps, z)); });
  auto design = Design::bernoulli(k, cfg.pi);
  std::vector<ExposureIndicator> treat, control;
  for (const auto& s : sets) {
    treat.push_back(AllTreated{s});
    control.push_back(AllControl{s});
  }
  auto est = make_hajek(std::move(treat), std::move(control), design);
  return {std::move(design), std::move(model), std::move(est), std::move(eps)};
}

// ---------------------------------------------------------------------------
// Time series with decaying dependence on past treatments.

enum class DecayKind { geometric, polynomial };

struct DecayDgpConfig {
  std::size_t T = 2000;
  std::size_t ell = 50;
  std::size_t r = 12;
  DecayKind kind = DecayKind::geometric;
  double rate = 0.8;              // rho_dec for geometric, alpha_dec for polynomial
  std::size_t max_lag = 64;       // truncation for the polynomial kernel
  double drift_amplitude = 1.0;   // drift_t = amplitude * sin(2 pi t / drift_period)
  double drift_period = 400.0;
  double pi = 0.5;
  bool enforce_regime = true;     // ell, r <= T/10

  void validate() const {
    detail::require(ell >= 1 && T % ell == 0, "decay DGP: T must be a multiple of ell");
    detail::require(T / ell >= 2, "decay DGP: need at least two blocks");
    detail::require(r <= ell, "decay DGP: need r <= ell");
    if (enforce_regime) detail::require(10 * ell <= T && 10 * r <= T, "decay DGP: need ell, r <= T/10");
    if (kind == DecayKind::geometric) detail::require(rate >= 0.0 && rate < 1.0, "decay DGP: geometric rate must lie in [0, 1)");
    else detail::require(rate > 0.0, "decay DGP: polynomial exponent must be positive");
    detail::require(pi > 0.0 && pi < 1.0, "decay DGP: pi must lie in (0, 1)");
    detail::require(drift_period > 0.0, "decay DGP: drift period must be positive");
  }

  double decay(std::size_t d) const {
    return kind == DecayKind::geometric ? std::pow(rate, static_cast<double>(d))
                                        : std::pow(static_cast<double>(d + 1), -rate);
  }
};

// Y_t = sum_{d >= 0} decay(d) (2 W_{t-d} - 1) + drift_t.
inline std::vector<double> decay_series(const DecayDgpConfig& cfg, const TreatmentVector& w) {
  std::vector<double> y(cfg.T);
  const double two_pi = 2.0 * std::numbers::pi;
  if (cfg.kind == DecayKind::geometric) {
    double g = 0.0;
    for (std::size_t t = 0; t < cfg.T; ++t) {
      g = (w[t] ? 1.0 : -1.0) + cfg.rate * g;
      y[t] = g + cfg.drift_amplitude * std::sin(two_pi * static_cast<double>(t + 1) / cfg.drift_period);
    }
    return y;
  }
  std::vector<double> kernel(cfg.max_lag + 1);
  for (std::size_t d = 0; d <= cfg.max_lag; ++d) kernel[d] = cfg.decay(d);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    double s = 0.0;
    for (std::size_t d = 0; d <= std::min(t, cfg.max_lag); ++d) s += kernel[d] * (w[t - d] ? 1.0 : -1.0);
    y[t] = s + cfg.drift_amplitude * std::sin(two_pi * static_cast<double>(t + 1) / cfg.drift_period);
  }
  return y;
}

struct DecayInstance {
  Design design;
  PotentialOutcomeModel model;
  IpwDirect estimator;
};

inline DecayInstance gen_decay_model(const DecayDgpConfig& cfg) {
  cfg.validate();
  std::vector<IndexSet> sets;
  for (std::size_t t = 0; t < cfg.T; ++t) sets.push_back(IndexSet{t});
  auto model = PotentialOutcomeModel::trajectory(cfg.T, sets, [cfg](const TreatmentVector& w) { return decay_series(cfg, w); });
  auto design = Design::bernoulli(cfg.T, cfg.pi);
  std::vector<ExposureIndicator> ind;
  for (std::size_t t = 0; t < cfg.T; ++t) ind.push_back(OwnTreatment{t});
  auto est = make_ipw_direct(std::move(ind), design);
  return {std::move(design), std::move(model), std::move(est)};
}

}  // namespace nj::harness
