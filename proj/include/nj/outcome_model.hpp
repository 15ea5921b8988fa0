#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_set.hpp"
#include "nj/math.hpp"

namespace nj {

// ---------------------------------------------------------------------------
// Exposure indicators T_i: binary functions of a few treatments.

struct OwnTreatment {
  std::size_t unit = 0;
};

struct AllTreated {
  IndexSet units;
};

struct AllControl {
  IndexSet units;
};

using ExposureIndicator = std::variant<OwnTreatment, AllTreated, AllControl>;

inline IndexSet exposure_units(const ExposureIndicator& ind) {
  return std::visit([](const auto& e) -> IndexSet {
    if constexpr (std::is_same_v<std::decay_t<decltype(e)>, OwnTreatment>) return IndexSet{e.unit};
    else return e.units;
  }, ind);
}

inline void validate_indicator(const ExposureIndicator& ind, std::size_t m) {
  const auto units = exposure_units(ind);
  detail::require(!units.empty(), "exposure indicator needs a nonempty unit set");
  units.check_range(m);
}

inline bool exposure_holds(const ExposureIndicator& ind, const TreatmentVector& w) {
  return std::visit([&](const auto& e) -> bool {
    using E = std::decay_t<decltype(e)>;
    if constexpr (std::is_same_v<E, OwnTreatment>) {
      return w[e.unit];
    } else if constexpr (std::is_same_v<E, AllTreated>) {
      for (std::size_t j : e.units) if (!w[j]) return false;
      return true;
    } else {
      for (std::size_t j : e.units) if (w[j]) return false;
      return true;
    }
  }, ind);
}

namespace detail {

// (units that must be treated, units that must be in control)
inline std::pair<IndexSet, IndexSet> required_pattern(const ExposureIndicator& ind) {
  return std::visit([](const auto& e) -> std::pair<IndexSet, IndexSet> {
    using E = std::decay_t<decltype(e)>;
    if constexpr (std::is_same_v<E, OwnTreatment>) return {IndexSet{e.unit}, IndexSet{}};
    else if constexpr (std::is_same_v<E, AllTreated>) return {e.units, IndexSet{}};
    else return {IndexSet{}, e.units};
  }, ind);
}

}  // namespace detail

// p_i = P(T_i = 1) under the design.
inline double exposure_prob(const ExposureIndicator& ind, const Design& design) {
  validate_indicator(ind, design.size());
  const auto [ones, zeros] = detail::required_pattern(ind);
  if (auto b = design.as_bernoulli()) {
    double p = 1.0;
    for (std::size_t j : ones) p *= b->probs[j];
    for (std::size_t j : zeros) p *= 1.0 - b->probs[j];
    return p;
  }
  const auto& c = *design.as_crd();
  const auto m = static_cast<std::int64_t>(c.m);
  const auto n1 = static_cast<std::int64_t>(c.n1);
  const auto h1 = static_cast<std::int64_t>(ones.size());
  const auto h0 = static_cast<std::int64_t>(zeros.size());
  return choose(m - h1 - h0, n1 - h1) / choose(m, n1);
}

// p~_i = P(T_i = 1 | S = A, W_{-A} = w_{-A}); reads w only outside A.
inline double conditional_exposure_prob(const ExposureIndicator& ind, const Design& design, const IndexSet& a,
                                        const TreatmentVector& w) {
  validate_indicator(ind, design.size());
  detail::check_length(design, w);
  a.check_range(design.size());
  const auto [ones, zeros] = detail::required_pattern(ind);
  std::size_t free_ones = 0;
  std::size_t free_zeros = 0;
  double frozen = 1.0;
  double bern = 1.0;
  const auto* b = design.as_bernoulli();
  for (std::size_t j : ones) {
    if (a.contains(j)) {
      ++free_ones;
      if (b) bern *= b->probs[j];
    } else if (!w[j]) {
      frozen = 0.0;
    }
  }
  for (std::size_t j : zeros) {
    if (a.contains(j)) {
      ++free_zeros;
      if (b) bern *= 1.0 - b->probs[j];
    } else if (w[j]) {
      frozen = 0.0;
    }
  }
  if (frozen == 0.0) return 0.0;
  if (b) return bern;
  const std::size_t outside = detail::treated_outside(w, a);
  const auto n1 = design.as_crd()->n1;
  detail::require(outside <= n1 && n1 - outside <= a.size(), "conditional_exposure_prob: w not in support");
  const auto k = static_cast<std::int64_t>(n1 - outside);
  const auto size = static_cast<std::int64_t>(a.size());
  const auto h1 = static_cast<std::int64_t>(free_ones);
  const auto h0 = static_cast<std::int64_t>(free_zeros);
  return choose(size - h1 - h0, k - h1) / choose(size, k);
}

// ---------------------------------------------------------------------------
// Fixed potential outcomes with exposure sets.

class PotentialOutcomeModel {
 public:
  // Outcome of `unit` given the treatments on its exposure set, in the
  // (sorted) order of that set.
  using LocalOutcome = std::function<double(std::size_t unit, std::span<const std::uint8_t> local)>;
  // All outcomes at once, for models whose outcomes depend on more than the
  // declared exposure sets.
  using Trajectory = std::function<std::vector<double>(const TreatmentVector&)>;

  static PotentialOutcomeModel tabulated(std::size_t m, std::vector<IndexSet> exposure, const LocalOutcome& fn,
                                         std::vector<double> covariates = {}) {
    PotentialOutcomeModel model(m, std::move(exposure), std::move(covariates));
    model.tables_.resize(model.exposure_.size());
    for (std::size_t i = 0; i < model.exposure_.size(); ++i) {
      const std::size_t d = model.exposure_[i].size();
      detail::require(d <= 20, "tabulated outcome model: exposure set too large to tabulate");
      auto& table = model.tables_[i];
      table.resize(std::size_t{1} << d);
      std::vector<std::uint8_t> local(d);
      for (std::uint64_t code = 0; code < table.size(); ++code) {
        for (std::size_t k = 0; k < d; ++k) local[k] = static_cast<std::uint8_t>((code >> k) & 1U);
        table[code] = fn(i, local);
        detail::require(std::isfinite(table[code]), "outcome model: outcomes must be finite");
      }
    }
    return model;
  }

  // tables[i][code] with bit k of code the treatment of the k-th member of N_i.
  static PotentialOutcomeModel from_tables(std::size_t m, std::vector<IndexSet> exposure,
                                           std::vector<std::vector<double>> tables, std::vector<double> covariates = {}) {
    PotentialOutcomeModel model(m, std::move(exposure), std::move(covariates));
    detail::require(tables.size() == model.exposure_.size(), "outcome tables: one table per outcome unit");
    for (std::size_t i = 0; i < tables.size(); ++i) {
      detail::require(tables[i].size() == (std::size_t{1} << model.exposure_[i].size()),
                      "outcome tables: table " + std::to_string(i) + " has the wrong size");
      for (double y : tables[i]) detail::require(std::isfinite(y), "outcome model: outcomes must be finite");
    }
    model.tables_ = std::move(tables);
    return model;
  }

  // Outcomes come from a whole-vector simulation; the exposure sets are only
  // an approximation, so proxies built on them are approximately measurable.
  static PotentialOutcomeModel trajectory(std::size_t m, std::vector<IndexSet> exposure, Trajectory fn,
                                          std::vector<double> covariates = {}) {
    detail::require(static_cast<bool>(fn), "trajectory outcome model needs a function");
    PotentialOutcomeModel model(m, std::move(exposure), std::move(covariates));
    model.trajectory_ = std::move(fn);
    return model;
  }

  std::size_t units() const { return exposure_.size(); }
  std::size_t interventions() const { return m_; }
  const std::vector<IndexSet>& exposure_sets() const { return exposure_; }
  const std::vector<double>& covariates() const { return covariates_; }
  bool has_covariates() const { return !covariates_.empty(); }
  bool approximately_measurable() const { return static_cast<bool>(trajectory_); }

  std::vector<double> observed(const TreatmentVector& w) const {
    detail::require(w.size() == m_, "observed_outcomes: treatment vector length mismatch");
    if (trajectory_) {
      auto y = trajectory_(w);
      detail::require(y.size() == exposure_.size(), "trajectory model returned the wrong number of outcomes");
      return y;
    }
    std::vector<double> y(exposure_.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = tables_[i][local_code(i, w)];
    return y;
  }

 private:
  PotentialOutcomeModel(std::size_t m, std::vector<IndexSet> exposure, std::vector<double> covariates)
      : m_(m), exposure_(std::move(exposure)), covariates_(std::move(covariates)) {
    detail::require(!exposure_.empty(), "outcome model needs at least one outcome unit");
    for (const auto& n : exposure_) n.check_range(m_);
    detail::require(covariates_.empty() || covariates_.size() == exposure_.size(),
                    "outcome model: one covariate per outcome unit");
  }

  std::uint64_t local_code(std::size_t i, const TreatmentVector& w) const {
    std::uint64_t code = 0;
    const auto& n = exposure_[i].members();
    for (std::size_t k = 0; k < n.size(); ++k) code |= static_cast<std::uint64_t>(w[n[k]]) << k;
    return code;
  }

  std::size_t m_;
  std::vector<IndexSet> exposure_;
  std::vector<double> covariates_;
  std::vector<std::vector<double>> tables_;
  Trajectory trajectory_;
};

inline std::vector<double> observed_outcomes(const PotentialOutcomeModel& model, const TreatmentVector& w) {
  return model.observed(w);
}

// ---------------------------------------------------------------------------
// Estimators f(W, Y).

// (1/n) sum_i (T_i/p_i - (1 - T_i)/(1 - p_i)) Y_i
struct IpwDirect {
  std::vector<ExposureIndicator> exposure;
  std::vector<double> probs;
};

// (1/n) sum_i (1{N_i all treated}/p_i - 1{N_i all control}/q_i) Y_i
struct IpwTot {
  std::vector<IndexSet> exposure_sets;
  std::vector<double> treated_probs;
  std::vector<double> control_probs;
};

// Treated-arm mean minus control-arm mean; outcome unit i pairs with unit i.
struct DiffInMeans {};

// Ratio-of-sums difference with treatment indicators T_j (mass p_j) and
// control indicators C_j (mass q_j).
struct HajekBipartite {
  std::vector<ExposureIndicator> treat;
  std::vector<double> treat_probs;
  std::vector<ExposureIndicator> control;
  std::vector<double> control_probs;
};

struct CustomEstimator {
  std::function<double(const TreatmentVector&, std::span<const double>)> fn;
};

using Estimator = std::variant<IpwDirect, IpwTot, DiffInMeans, HajekBipartite, CustomEstimator>;

namespace detail {

inline void require_probabilities(const std::vector<double>& ps, std::size_t n, const char* what) {
  require(ps.size() == n, std::string(what) + ": one probability per outcome unit");
  for (double p : ps) require(p > 0.0 && p < 1.0, std::string(what) + ": probabilities must lie in (0, 1)");
}

}  // namespace detail

inline IpwDirect make_ipw_direct(std::vector<ExposureIndicator> exposure, const Design& design) {
  IpwDirect est{std::move(exposure), {}};
  for (const auto& ind : est.exposure) est.probs.push_back(exposure_prob(ind, design));
  detail::require_probabilities(est.probs, est.exposure.size(), "IpwDirect");
  return est;
}

inline IpwTot make_ipw_tot(const PotentialOutcomeModel& model, const Design& design) {
  IpwTot est{model.exposure_sets(), {}, {}};
  for (const auto& n : est.exposure_sets) {
    est.treated_probs.push_back(exposure_prob(AllTreated{n}, design));
    est.control_probs.push_back(exposure_prob(AllControl{n}, design));
  }
  detail::require_probabilities(est.treated_probs, est.exposure_sets.size(), "IpwTot");
  detail::require_probabilities(est.control_probs, est.exposure_sets.size(), "IpwTot");
  return est;
}

inline HajekBipartite make_hajek(std::vector<ExposureIndicator> treat, std::vector<ExposureIndicator> control,
                                 const Design& design) {
  detail::require(treat.size() == control.size(), "Hajek: one treat and one control indicator per outcome unit");
  HajekBipartite est{std::move(treat), {}, std::move(control), {}};
  for (const auto& ind : est.treat) est.treat_probs.push_back(exposure_prob(ind, design));
  for (const auto& ind : est.control) est.control_probs.push_back(exposure_prob(ind, design));
  detail::require_probabilities(est.treat_probs, est.treat.size(), "Hajek");
  detail::require_probabilities(est.control_probs, est.control.size(), "Hajek");
  return est;
}

// Inverse-propensity weights of outcome unit i under a linear IPW estimator:
// psi_i = (treat/p - control/q) * Y_i.
struct IpwWeight {
  bool treat;
  bool control;
  double p;
  double q;
  double coefficient() const { return (treat ? 1.0 / p : 0.0) - (control ? 1.0 / q : 0.0); }
};

inline bool is_linear_ipw(const Estimator& est) {
  return std::holds_alternative<IpwDirect>(est) || std::holds_alternative<IpwTot>(est);
}

inline IpwWeight ipw_weight(const Estimator& est, std::size_t i, const TreatmentVector& w) {
  if (auto d = std::get_if<IpwDirect>(&est)) {
    const bool t = exposure_holds(d->exposure[i], w);
    return {t, !t, d->probs[i], 1.0 - d->probs[i]};
  }
  if (auto t = std::get_if<IpwTot>(&est)) {
    return {exposure_holds(AllTreated{t->exposure_sets[i]}, w), exposure_holds(AllControl{t->exposure_sets[i]}, w),
            t->treated_probs[i], t->control_probs[i]};
  }
  throw InvalidArgument("ipw_weight: estimator is not a linear IPW estimator");
}

inline std::size_t estimator_units(const Estimator& est) {
  if (auto d = std::get_if<IpwDirect>(&est)) return d->exposure.size();
  if (auto t = std::get_if<IpwTot>(&est)) return t->exposure_sets.size();
  if (auto h = std::get_if<HajekBipartite>(&est)) return h->treat.size();
  return 0;
}

// Per-unit terms psi_i of a linear IPW estimator, whose mean is the estimate.
inline std::vector<double> ipw_terms(const Estimator& est, const TreatmentVector& w, std::span<const double> y) {
  detail::require(is_linear_ipw(est), "ipw_terms: estimator is not a linear IPW estimator");
  detail::require(estimator_units(est) == y.size(), "ipw_terms: outcome count mismatch");
  std::vector<double> psi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) psi[i] = ipw_weight(est, i, w).coefficient() * y[i];
  return psi;
}

inline double hajek_ratio_difference(double treat_num, double treat_den, double control_num, double control_den) {
  if (treat_den <= 0.0 || control_den <= 0.0) {
    throw DegenerateRealization("Hajek estimator: an arm has zero total weight");
  }
  return treat_num / treat_den - control_num / control_den;
}

inline double estimate(const Estimator& est, const TreatmentVector& w, std::span<const double> y) {
  return std::visit([&](const auto& e) -> double {
    using E = std::decay_t<decltype(e)>;
    if constexpr (std::is_same_v<E, IpwDirect> || std::is_same_v<E, IpwTot>) {
      const auto psi = ipw_terms(est, w, y);
      return pairwise_mean(psi);
    } else if constexpr (std::is_same_v<E, DiffInMeans>) {
      detail::require(y.size() == w.size(), "difference in means: one outcome per intervention unit");
      double st = 0.0, sc = 0.0;
      std::size_t nt = 0, nc = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (w[i]) { st += y[i]; ++nt; } else { sc += y[i]; ++nc; }
      }
      if (nt == 0 || nc == 0) throw DegenerateRealization("difference in means: empty arm");
      return st / static_cast<double>(nt) - sc / static_cast<double>(nc);
    } else if constexpr (std::is_same_v<E, HajekBipartite>) {
      detail::require(e.treat.size() == y.size(), "Hajek: outcome count mismatch");
      double tn = 0.0, td = 0.0, cn = 0.0, cd = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (exposure_holds(e.treat[j], w)) { tn += y[j] / e.treat_probs[j]; td += 1.0 / e.treat_probs[j]; }
        if (exposure_holds(e.control[j], w)) { cn += y[j] / e.control_probs[j]; cd += 1.0 / e.control_probs[j]; }
      }
      return hajek_ratio_difference(tn, td, cn, cd);
    } else {
      return e.fn(w, y);
    }
  }, est);
}

}  // namespace nj
