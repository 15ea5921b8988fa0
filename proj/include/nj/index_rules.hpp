#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nj/design.hpp"
#include "nj/error.hpp"
#include "nj/index_set.hpp"
#include "nj/math.hpp"
#include "nj/rng.hpp"

namespace nj {

inline constexpr std::size_t kDefaultRuleSupportCap = std::size_t{1} << 20;

struct SingleUniform {};

struct UniformSubset {
  std::size_t size = 1;
};

// Uniformly random contiguous block on the m-cycle (labels wrap modulo m).
struct CycleBlock {
  std::size_t length = 1;
};

// Uniformly random block of the fixed partition {0..ell-1}, {ell..2ell-1}, ...
struct PartitionBlock {
  std::size_t length = 1;
};

// One treated and one control unit of the current assignment, uniformly.
struct TreatedControlPair {};

// A user-supplied law for S given W, as an explicit list of (set, mass).
struct CustomRule {
  std::function<std::vector<std::pair<IndexSet, double>>(const TreatmentVector&)> law;
  bool depends_on_treatments = true;
};

class IndexRule {
 public:
  using Variant = std::variant<SingleUniform, UniformSubset, CycleBlock, PartitionBlock, TreatedControlPair, CustomRule>;

  static IndexRule single_uniform(std::size_t m) {
    detail::require(m >= 1, "index rule needs at least one unit");
    return IndexRule(m, SingleUniform{});
  }

  static IndexRule uniform_subset(std::size_t m, std::size_t size) {
    detail::require(size >= 1 && size <= m, "UniformSubset requires 1 <= L <= m");
    return IndexRule(m, UniformSubset{size});
  }

  static IndexRule cycle_block(std::size_t m, std::size_t length) {
    detail::require(length >= 1 && length <= m, "CycleBlock requires 1 <= L <= m");
    return IndexRule(m, CycleBlock{length});
  }

  static IndexRule partition_block(std::size_t m, std::size_t length) {
    detail::require(length >= 1 && m % length == 0, "PartitionBlock requires the block length to divide m");
    return IndexRule(m, PartitionBlock{length});
  }

  static IndexRule treated_control_pair(std::size_t m) {
    detail::require(m >= 2, "TreatedControlPair needs at least two units");
    return IndexRule(m, TreatedControlPair{});
  }

  static IndexRule custom(std::size_t m, CustomRule rule) {
    detail::require(static_cast<bool>(rule.law), "custom index rule needs a law");
    return IndexRule(m, std::move(rule));
  }

  std::size_t size() const { return m_; }
  const Variant& variant() const { return v_; }

  // True when the law of S varies with W.
  bool depends_on_treatments() const {
    if (std::holds_alternative<TreatedControlPair>(v_)) return true;
    if (auto c = std::get_if<CustomRule>(&v_)) return c->depends_on_treatments;
    return false;
  }

  std::string name() const {
    return std::visit([](const auto& r) -> std::string {
      using R = std::decay_t<decltype(r)>;
      if constexpr (std::is_same_v<R, SingleUniform>) return "single-uniform";
      else if constexpr (std::is_same_v<R, UniformSubset>) return "uniform-subset(" + std::to_string(r.size) + ")";
      else if constexpr (std::is_same_v<R, CycleBlock>) return "cycle-block(" + std::to_string(r.length) + ")";
      else if constexpr (std::is_same_v<R, PartitionBlock>) return "partition-block(" + std::to_string(r.length) + ")";
      else if constexpr (std::is_same_v<R, TreatedControlPair>) return "treated-control-pair";
      else return "custom";
    }, v_);
  }

 private:
  IndexRule(std::size_t m, Variant v) : m_(m), v_(std::move(v)) {}
  std::size_t m_;
  Variant v_;
};

// Throws if the rule cannot be paired with the design.
inline void validate_rule(const IndexRule& rule, const Design& design) {
  detail::require(rule.size() == design.size(), "index rule and design disagree on the number of units");
  if (std::holds_alternative<TreatedControlPair>(rule.variant())) {
    detail::require(!design.is_bernoulli(), "TreatedControlPair is only valid under a completely randomized design");
  }
}

namespace detail {

inline IndexSet cycle_block_at(std::size_t m, std::size_t start, std::size_t length) {
  std::vector<std::size_t> members;
  members.reserve(length);
  for (std::size_t k = 0; k < length; ++k) members.push_back((start + k) % m);
  return IndexSet(std::move(members));
}

inline void check_pair_rule(const TreatmentVector& w) {
  const std::size_t n1 = w.popcount();
  if (n1 == 0 || n1 == w.size()) {
    throw InvalidArgument("TreatedControlPair needs at least one treated and one control unit");
  }
}

inline std::vector<std::pair<IndexSet, double>> checked_custom_law(const CustomRule& rule, const TreatmentVector& w) {
  auto law = rule.law(w);
  double total = 0.0;
  for (const auto& [set, p] : law) {
    require(p >= 0.0, "custom index rule produced a negative mass");
    set.check_range(w.size());
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-12, "custom index rule masses do not sum to one");
  return law;
}

}  // namespace detail

inline IndexSet sample_index_set(const IndexRule& rule, const TreatmentVector& w, Rng& rng) {
  const std::size_t m = rule.size();
  detail::require(w.size() == m, "sample_index_set: treatment vector length mismatch");
  return std::visit([&](const auto& r) -> IndexSet {
    using R = std::decay_t<decltype(r)>;
    if constexpr (std::is_same_v<R, SingleUniform>) {
      return IndexSet{std::uniform_int_distribution<std::size_t>(0, m - 1)(rng)};
    } else if constexpr (std::is_same_v<R, UniformSubset>) {
      std::vector<std::size_t> slots(m);
      for (std::size_t j = 0; j < m; ++j) slots[j] = j;
      return IndexSet(detail::choose_uniform(std::move(slots), r.size, rng));
    } else if constexpr (std::is_same_v<R, CycleBlock>) {
      return detail::cycle_block_at(m, std::uniform_int_distribution<std::size_t>(0, m - 1)(rng), r.length);
    } else if constexpr (std::is_same_v<R, PartitionBlock>) {
      const std::size_t block = std::uniform_int_distribution<std::size_t>(0, m / r.length - 1)(rng);
      return IndexSet::range(block * r.length, (block + 1) * r.length);
    } else if constexpr (std::is_same_v<R, TreatedControlPair>) {
      detail::check_pair_rule(w);
      std::vector<std::size_t> treated, control;
      for (std::size_t j = 0; j < m; ++j) (w[j] ? treated : control).push_back(j);
      const auto t = treated[std::uniform_int_distribution<std::size_t>(0, treated.size() - 1)(rng)];
      const auto c = control[std::uniform_int_distribution<std::size_t>(0, control.size() - 1)(rng)];
      return IndexSet{t, c};
    } else {
      const auto law = detail::checked_custom_law(r, w);
      double u = uniform01(rng);
      for (const auto& [set, p] : law) {
        if (u < p) return set;
        u -= p;
      }
      for (auto it = law.rbegin(); it != law.rend(); ++it) if (it->second > 0.0) return it->first;
      return law.back().first;
    }
  }, rule.variant());
}

// The support of S given W = w with its exact masses, in a deterministic order.
inline std::vector<std::pair<IndexSet, double>> enumerate_index_sets(const IndexRule& rule, const TreatmentVector& w,
                                                                     std::size_t cap = kDefaultRuleSupportCap) {
  const std::size_t m = rule.size();
  detail::require(w.size() == m, "enumerate_index_sets: treatment vector length mismatch");
  std::vector<std::pair<IndexSet, double>> out;
  std::visit([&](const auto& r) {
    using R = std::decay_t<decltype(r)>;
    if constexpr (std::is_same_v<R, SingleUniform>) {
      for (std::size_t j = 0; j < m; ++j) out.emplace_back(IndexSet{j}, 1.0 / static_cast<double>(m));
    } else if constexpr (std::is_same_v<R, UniformSubset>) {
      const double count = choose(static_cast<std::int64_t>(m), static_cast<std::int64_t>(r.size));
      if (count > static_cast<double>(cap)) throw CapExceeded("UniformSubset support exceeds the enumeration cap");
      std::vector<std::size_t> idx(r.size);
      for (std::size_t k = 0; k < r.size; ++k) idx[k] = k;
      while (true) {
        out.emplace_back(IndexSet(idx), 1.0 / count);
        std::size_t k = r.size;
        while (k > 0 && idx[k - 1] == m - r.size + k - 1) --k;
        if (k == 0) break;
        ++idx[k - 1];
        for (std::size_t t = k; t < r.size; ++t) idx[t] = idx[t - 1] + 1;
      }
    } else if constexpr (std::is_same_v<R, CycleBlock>) {
      if (r.length == m) {
        out.emplace_back(IndexSet::range(0, m), 1.0);
      } else {
        for (std::size_t s = 0; s < m; ++s) out.emplace_back(detail::cycle_block_at(m, s, r.length), 1.0 / static_cast<double>(m));
      }
    } else if constexpr (std::is_same_v<R, PartitionBlock>) {
      const std::size_t k = m / r.length;
      for (std::size_t b = 0; b < k; ++b) out.emplace_back(IndexSet::range(b * r.length, (b + 1) * r.length), 1.0 / static_cast<double>(k));
    } else if constexpr (std::is_same_v<R, TreatedControlPair>) {
      detail::check_pair_rule(w);
      const std::size_t n1 = w.popcount();
      const double p = 1.0 / static_cast<double>(n1 * (m - n1));
      for (std::size_t t = 0; t < m; ++t) {
        if (!w[t]) continue;
        for (std::size_t c = 0; c < m; ++c) if (!w[c]) out.emplace_back(IndexSet{t, c}, p);
      }
    } else {
      for (auto& entry : detail::checked_custom_law(r, w)) if (entry.second > 0.0) out.push_back(std::move(entry));
      if (out.size() > cap) throw CapExceeded("custom rule support exceeds the enumeration cap");
    }
  }, rule.variant());
  return out;
}

// P(S = a | W = w).
inline double index_set_pmf(const IndexRule& rule, const TreatmentVector& w, const IndexSet& a) {
  const std::size_t m = rule.size();
  detail::require(w.size() == m, "index_set_pmf: treatment vector length mismatch");
  a.check_range(m);
  return std::visit([&](const auto& r) -> double {
    using R = std::decay_t<decltype(r)>;
    if constexpr (std::is_same_v<R, SingleUniform>) {
      return a.size() == 1 ? 1.0 / static_cast<double>(m) : 0.0;
    } else if constexpr (std::is_same_v<R, UniformSubset>) {
      return a.size() == r.size ? 1.0 / choose(static_cast<std::int64_t>(m), static_cast<std::int64_t>(r.size)) : 0.0;
    } else if constexpr (std::is_same_v<R, CycleBlock>) {
      if (a.size() != r.length) return 0.0;
      if (r.length == m) return 1.0;
      for (std::size_t s : a) {
        if (detail::cycle_block_at(m, s, r.length) == a) return 1.0 / static_cast<double>(m);
      }
      return 0.0;
    } else if constexpr (std::is_same_v<R, PartitionBlock>) {
      if (a.size() != r.length || a[0] % r.length != 0) return 0.0;
      if (a[r.length - 1] != a[0] + r.length - 1) return 0.0;
      return static_cast<double>(r.length) / static_cast<double>(m);
    } else if constexpr (std::is_same_v<R, TreatedControlPair>) {
      detail::check_pair_rule(w);
      if (a.size() != 2 || w[a[0]] == w[a[1]]) return 0.0;
      const std::size_t n1 = w.popcount();
      return 1.0 / static_cast<double>(n1 * (m - n1));
    } else {
      double p = 0.0;
      for (const auto& [set, mass] : detail::checked_custom_law(r, w)) if (set == a) p += mass;
      return p;
    }
  }, rule.variant());
}

// P(j in S) for every unit j. Only meaningful for rules independent of W.
inline std::vector<double> inclusion_probabilities(const IndexRule& rule) {
  detail::require(!rule.depends_on_treatments(), "inclusion_probabilities: rule depends on W");
  const TreatmentVector any(rule.size());
  std::vector<double> p(rule.size(), 0.0);
  for (const auto& [set, mass] : enumerate_index_sets(rule, any)) for (std::size_t j : set) p[j] += mass;
  return p;
}

}  // namespace nj
