#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_set.hpp"
#include "nj/math.hpp"
#include "nj/outcome_model.hpp"

namespace nj {

// ---------------------------------------------------------------------------
// Proxy variants g(S, W_{-S}).

// Delete outcome units whose exposure set meets the update set.
struct FromExposure {};
// Delete units exposed to the update set extended by r positions to the right
// (no wraparound). Used for decaying-dependence time series.
struct RightBuffer {
  std::size_t r = 0;
};
using DeletionRule = std::variant<FromExposure, RightBuffer>;

struct RecomputedAverage {
  DeletionRule deletion = FromExposure{};
};
struct CovariateRegression {};
struct NeymanPair {};
// Leave-out mean of the psi terms with denominator n (full) or n - |D|.
struct ClassicalLoo {
  bool full_denominator = false;
};
struct CustomProxy {
  std::function<double(const IndexSet&, const TreatmentVector&, std::span<const double>)> fn;
  bool approximately_measurable = false;
};

using Proxy = std::variant<RecomputedAverage, CovariateRegression, NeymanPair, ClassicalLoo, CustomProxy>;

// direct: touches only treatments outside A and outcomes outside D.
// incremental: full totals minus the contributions of D; much faster.
enum class ProxyMode { direct, incremental };

struct ProxyValue {
  double value = 0.0;
  bool degenerate = false;  // a documented fallback was used
};

inline bool proxy_is_strict(const Proxy& proxy, const PotentialOutcomeModel& model) {
  if (model.approximately_measurable()) return false;
  if (auto c = std::get_if<CustomProxy>(&proxy)) return !c->approximately_measurable;
  return true;
}

inline std::string proxy_name(const Proxy& proxy) {
  return std::visit([](const auto& p) -> std::string {
    using P = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<P, RecomputedAverage>) {
      if (auto rb = std::get_if<RightBuffer>(&p.deletion)) return "recomputed-average(r=" + std::to_string(rb->r) + ")";
      return "recomputed-average";
    } else if constexpr (std::is_same_v<P, CovariateRegression>) {
      return "covariate-regression";
    } else if constexpr (std::is_same_v<P, NeymanPair>) {
      return "neyman-pair";
    } else if constexpr (std::is_same_v<P, ClassicalLoo>) {
      return p.full_denominator ? "classical-loo(n)" : "classical-loo(n-|D|)";
    } else {
      return "custom";
    }
  }, proxy);
}

// ---------------------------------------------------------------------------
// Deletion sets.

inline IndexSet deletion_set(const std::vector<IndexSet>& exposure_sets, const IndexSet& a) {
  std::vector<std::size_t> d;
  for (std::size_t i = 0; i < exposure_sets.size(); ++i)
    if (exposure_sets[i].intersects(a)) d.push_back(i);
  return IndexSet(std::move(d));
}

inline IndexSet pad_right(const IndexSet& a, std::size_t r, std::size_t m) {
  std::vector<std::size_t> out;
  for (std::size_t j : a)
    for (std::size_t s = 0; s <= r && j + s < m; ++s) out.push_back(j + s);
  return IndexSet(std::move(out));
}

// Inverse exposure map: intervention unit -> outcome units exposed to it.
class DeletionIndex {
 public:
  DeletionIndex(const std::vector<IndexSet>& exposure_sets, std::size_t m) : n_(exposure_sets.size()), inv_(m) {
    for (std::size_t i = 0; i < exposure_sets.size(); ++i)
      for (std::size_t j : exposure_sets[i]) inv_[j].push_back(i);
  }

  IndexSet deleted(const IndexSet& a, const DeletionRule& rule = FromExposure{}) const {
    const IndexSet target = std::holds_alternative<RightBuffer>(rule) ? pad_right(a, std::get<RightBuffer>(rule).r, inv_.size()) : a;
    std::vector<std::size_t> d;
    for (std::size_t j : target) d.insert(d.end(), inv_[j].begin(), inv_[j].end());
    return IndexSet(std::move(d));
  }

  std::size_t units() const { return n_; }

 private:
  std::size_t n_;
  std::vector<std::vector<std::size_t>> inv_;
};

// ---------------------------------------------------------------------------
// Free-standing building blocks.

inline double recomputed_average_proxy(std::span<const double> psis, const IndexSet& d) {
  detail::require(d.size() < psis.size(), "recomputed average: every outcome unit is deleted");
  d.check_range(psis.size());
  std::vector<double> kept;
  kept.reserve(psis.size() - d.size());
  for (std::size_t i = 0; i < psis.size(); ++i)
    if (!d.contains(i)) kept.push_back(psis[i]);
  return pairwise_mean(kept);
}

// Least-squares arm fits y ~ a + b x, one per arm.
struct ArmMeans {
  double intercept[2] = {0.0, 0.0};
  double slope[2] = {0.0, 0.0};
  double operator()(int t, double x) const { return intercept[t] + slope[t] * x; }
};

namespace detail {

struct ArmStats {
  long double count = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  void add(double x, double y, long double sign = 1) {
    count += sign;
    sx += sign * x;
    sy += sign * y;
    sxx += sign * static_cast<long double>(x) * x;
    sxy += sign * static_cast<long double>(x) * y;
  }
};

// Fallback ladder: arm fit, then arm mean, then overall mean.
inline ArmMeans fit_from_stats(const ArmStats (&arm)[2]) {
  const long double total = arm[0].count + arm[1].count;
  if (total < 0.5L) throw InvalidArgument("fit_arm_means: no surviving outcome units");
  const double overall = static_cast<double>((arm[0].sy + arm[1].sy) / total);
  ArmMeans fit;
  for (int t = 0; t < 2; ++t) {
    const auto& s = arm[t];
    if (s.count < 0.5L) {
      fit.intercept[t] = overall;
      continue;
    }
    const long double xbar = s.sx / s.count;
    const long double ybar = s.sy / s.count;
    const long double var = s.sxx / s.count - xbar * xbar;
    if (s.count < 1.5L || var < 1e-12L) {
      fit.intercept[t] = static_cast<double>(ybar);
      continue;
    }
    const long double b = (s.sxy / s.count - xbar * ybar) / var;
    fit.slope[t] = static_cast<double>(b);
    fit.intercept[t] = static_cast<double>(ybar - b * xbar);
  }
  return fit;
}

inline double covariate_of(const PotentialOutcomeModel& model, std::size_t i) {
  return model.has_covariates() ? model.covariates()[i] : 0.0;
}

}  // namespace detail

// Arm-wise intercept + covariate regression over surviving units.
inline ArmMeans fit_arm_means(const PotentialOutcomeModel& model, const std::vector<ExposureIndicator>& indicators,
                              const TreatmentVector& w, std::span<const double> y, const IndexSet& d) {
  detail::require(indicators.size() == model.units() && y.size() == model.units(), "fit_arm_means: size mismatch");
  detail::ArmStats arm[2];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (d.contains(i)) continue;
    arm[exposure_holds(indicators[i], w) ? 1 : 0].add(detail::covariate_of(model, i), y[i]);
  }
  return detail::fit_from_stats(arm);
}

inline double neyman_pair_proxy(std::span<const double> y, const TreatmentVector& w, const IndexSet& pair) {
  detail::require(y.size() == w.size(), "neyman_pair_proxy: one outcome per unit");
  pair.check_range(w.size());
  long double st = 0, sc = 0;
  std::size_t nt = 0, nc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (pair.contains(i)) continue;
    if (w[i]) { st += y[i]; ++nt; } else { sc += y[i]; ++nc; }
  }
  if (nt == 0 || nc == 0) throw InvalidArgument("neyman_pair_proxy: an arm has a single unit");
  return static_cast<double>(st / nt - sc / nc);
}

// ---------------------------------------------------------------------------
// Proxy evaluation for one realization w.

class ProxyEvaluator {
 public:
  ProxyEvaluator(const Proxy& proxy, const Design& design, const PotentialOutcomeModel& model, const Estimator& est,
                 TreatmentVector w, std::vector<double> y)
      : proxy_(proxy), design_(design), model_(model), est_(est), index_(model.exposure_sets(), model.interventions()),
        w_(std::move(w)), y_(std::move(y)) {
    detail::require(y_.size() == model_.units(), "proxy: outcome count mismatch");
    detail::require(w_.size() == design_.size(), "proxy: treatment vector length mismatch");
    check_compatible();
    precompute();
  }

  IndexSet deleted(const IndexSet& a) const {
    if (auto r = std::get_if<RecomputedAverage>(&proxy_)) return index_.deleted(a, r->deletion);
    return index_.deleted(a);
  }

  ProxyValue operator()(const IndexSet& a, ProxyMode mode = ProxyMode::incremental) const {
    return std::visit([&](const auto& p) -> ProxyValue {
      using P = std::decay_t<decltype(p)>;
      if constexpr (std::is_same_v<P, CustomProxy>) {
        return {p.fn(a, w_, y_), false};
      } else if constexpr (std::is_same_v<P, NeymanPair>) {
        return {neyman_pair(a, mode), false};
      } else {
        const IndexSet d = deleted(a);
        if constexpr (std::is_same_v<P, RecomputedAverage>) return recomputed(d, mode);
        else if constexpr (std::is_same_v<P, ClassicalLoo>) return {loo(d, mode, p.full_denominator), false};
        else return {covariate(a, d, mode), false};
      }
    }, proxy_);
  }

 private:
  void check_compatible() const {
    const bool linear = is_linear_ipw(est_);
    if (std::holds_alternative<ClassicalLoo>(proxy_)) {
      detail::require(linear, "classical leave-out proxy needs a linear IPW estimator");
    } else if (std::holds_alternative<CovariateRegression>(proxy_)) {
      detail::require(std::holds_alternative<IpwDirect>(est_), "covariate proxy needs an IpwDirect estimator");
    } else if (std::holds_alternative<NeymanPair>(proxy_)) {
      detail::require(y_.size() == w_.size(), "Neyman pair proxy needs one outcome per intervention unit");
      // Outside the pair the outcomes must not move with the pair's treatments.
      const auto& sets = model_.exposure_sets();
      for (std::size_t i = 0; i < sets.size(); ++i)
        detail::require(sets[i].size() == 1 && sets[i][0] == i, "Neyman pair proxy needs no-interference exposure sets");
    } else if (std::holds_alternative<RecomputedAverage>(proxy_)) {
      detail::require(!std::holds_alternative<CustomEstimator>(est_), "recomputed average cannot recompute a custom estimator");
      if (std::holds_alternative<DiffInMeans>(est_))
        detail::require(y_.size() == w_.size(), "difference in means needs one outcome per intervention unit");
    } else {
      detail::require(static_cast<bool>(std::get<CustomProxy>(proxy_).fn), "custom proxy needs a function");
    }
    if (!std::holds_alternative<CustomProxy>(proxy_) && !std::holds_alternative<NeymanPair>(proxy_) &&
        !std::holds_alternative<DiffInMeans>(est_)) {
      detail::require(estimator_units(est_) == y_.size(), "proxy: estimator and outcome model disagree on unit count");
    }
  }

  // Per-unit contributions for the ratio-type estimators.
  struct RatioTerm {
    double tn = 0, td = 0, cn = 0, cd = 0;
  };

  RatioTerm ratio_term(std::size_t j) const {
    RatioTerm r;
    if (auto h = std::get_if<HajekBipartite>(&est_)) {
      if (exposure_holds(h->treat[j], w_)) { r.tn = y_[j] / h->treat_probs[j]; r.td = 1.0 / h->treat_probs[j]; }
      if (exposure_holds(h->control[j], w_)) { r.cn = y_[j] / h->control_probs[j]; r.cd = 1.0 / h->control_probs[j]; }
    } else {
      if (w_[j]) { r.tn = y_[j]; r.td = 1.0; } else { r.cn = y_[j]; r.cd = 1.0; }
    }
    return r;
  }

  void precompute() {
    if (is_linear_ipw(est_) && !std::holds_alternative<CustomProxy>(proxy_)) {
      psi_ = ipw_terms(est_, w_, y_);
      for (double p : psi_) psi_total_ += p;
    }
    if (std::holds_alternative<RecomputedAverage>(proxy_) &&
        (std::holds_alternative<HajekBipartite>(est_) || std::holds_alternative<DiffInMeans>(est_))) {
      for (std::size_t j = 0; j < y_.size(); ++j) {
        const auto r = ratio_term(j);
        tn_ += r.tn; td_ += r.td; cn_ += r.cn; cd_ += r.cd;
      }
    }
    if (std::holds_alternative<CovariateRegression>(proxy_)) {
      const auto& d = std::get<IpwDirect>(est_);
      for (std::size_t i = 0; i < y_.size(); ++i)
        arm_[exposure_holds(d.exposure[i], w_) ? 1 : 0].add(detail::covariate_of(model_, i), y_[i]);
    }
    if (std::holds_alternative<NeymanPair>(proxy_)) {
      for (std::size_t i = 0; i < y_.size(); ++i) {
        if (w_[i]) { st_ += y_[i]; ++nt_; } else { sc_ += y_[i]; ++nc_; }
      }
    }
  }

  double surviving_psi_sum(const IndexSet& d, ProxyMode mode) const {
    if (mode == ProxyMode::incremental) {
      long double s = psi_total_;
      for (std::size_t i : d) s -= psi_[i];
      return static_cast<double>(s);
    }
    long double s = 0;
    for (std::size_t i = 0; i < y_.size(); ++i)
      if (!d.contains(i)) s += ipw_weight(est_, i, w_).coefficient() * y_[i];
    return static_cast<double>(s);
  }

  ProxyValue recomputed(const IndexSet& d, ProxyMode mode) const {
    const std::size_t n = y_.size();
    if (is_linear_ipw(est_)) {
      if (d.size() >= n) throw DegenerateRealization("recomputed average: every outcome unit is deleted");
      return {surviving_psi_sum(d, mode) / static_cast<double>(n - d.size()), false};
    }
    long double tn = 0, td = 0, cn = 0, cd = 0;
    if (mode == ProxyMode::incremental) {
      tn = tn_; td = td_; cn = cn_; cd = cd_;
      for (std::size_t j : d) {
        const auto r = ratio_term(j);
        tn -= r.tn; td -= r.td; cn -= r.cn; cd -= r.cd;
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (d.contains(j)) continue;
        const auto r = ratio_term(j);
        tn += r.tn; td += r.td; cn += r.cn; cd += r.cd;
      }
    }
    // Deleting every unit of an arm leaves the ratio undefined; fall back to
    // the undeleted estimate and flag it.
    if (td <= 1e-9L || cd <= 1e-9L) return {estimate(est_, w_, y_), true};
    return {static_cast<double>(tn / td - cn / cd), false};
  }

  double loo(const IndexSet& d, ProxyMode mode, bool full) const {
    const std::size_t n = y_.size();
    if (!full && d.size() >= n) throw DegenerateRealization("leave-out proxy: every outcome unit is deleted");
    const double den = full ? static_cast<double>(n) : static_cast<double>(n - d.size());
    return surviving_psi_sum(d, mode) / den;
  }

  double covariate(const IndexSet& a, const IndexSet& d, ProxyMode mode) const {
    const auto& est = std::get<IpwDirect>(est_);
    ArmMeans fit;
    if (mode == ProxyMode::incremental) {
      detail::ArmStats arm[2] = {arm_[0], arm_[1]};
      for (std::size_t i : d) arm[exposure_holds(est.exposure[i], w_) ? 1 : 0].add(detail::covariate_of(model_, i), y_[i], -1);
      fit = detail::fit_from_stats(arm);
    } else {
      fit = fit_arm_means(model_, est.exposure, w_, y_, d);
    }
    long double s = surviving_psi_sum(d, mode);
    for (std::size_t i : d) {
      const double pt = conditional_exposure_prob(est.exposure[i], design_, a, w_);
      const double p = est.probs[i];
      const double x = detail::covariate_of(model_, i);
      s += pt / p * fit(1, x) - (1.0 - pt) / (1.0 - p) * fit(0, x);
    }
    return static_cast<double>(s / static_cast<long double>(y_.size()));
  }

  double neyman_pair(const IndexSet& a, ProxyMode mode) const {
    if (mode == ProxyMode::direct) return neyman_pair_proxy(y_, w_, a);
    long double st = st_, sc = sc_;
    std::size_t nt = nt_, nc = nc_;
    for (std::size_t i : a) {
      if (w_[i]) { st -= y_[i]; --nt; } else { sc -= y_[i]; --nc; }
    }
    if (nt == 0 || nc == 0) throw InvalidArgument("neyman_pair_proxy: an arm has a single unit");
    return static_cast<double>(st / nt - sc / nc);
  }

  const Proxy& proxy_;
  const Design& design_;
  const PotentialOutcomeModel& model_;
  const Estimator& est_;
  DeletionIndex index_;
  TreatmentVector w_;
  std::vector<double> y_;

  std::vector<double> psi_;
  long double psi_total_ = 0;
  long double tn_ = 0, td_ = 0, cn_ = 0, cd_ = 0;
  detail::ArmStats arm_[2];
  long double st_ = 0, sc_ = 0;
  std::size_t nt_ = 0, nc_ = 0;
};

// Covariate proxy for a single (A, w), computed directly.
inline double covariate_proxy(const Design& design, const PotentialOutcomeModel& model, const IpwDirect& est,
                              const IndexSet& a, const TreatmentVector& w) {
  const Estimator e = est;
  const Proxy p = CovariateRegression{};
  ProxyEvaluator eval(p, design, model, e, w, model.observed(w));
  return eval(a, ProxyMode::direct).value;
}

}  // namespace nj
