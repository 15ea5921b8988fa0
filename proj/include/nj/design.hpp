#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "nj/error.hpp"
#include "nj/index_set.hpp"
#include "nj/math.hpp"
#include "nj/rng.hpp"

namespace nj {

inline constexpr std::size_t kDefaultSupportCap = std::size_t{1} << 20;

// Binary assignment vector over m intervention units, packed 64 units per word.
class TreatmentVector {
 public:
  TreatmentVector() = default;
  explicit TreatmentVector(std::size_t m) : m_(m), words_((m + 63) / 64, 0) {}

  TreatmentVector(std::initializer_list<int> bits) : TreatmentVector(bits.size()) {
    std::size_t j = 0;
    for (int b : bits) {
      detail::require(b == 0 || b == 1, "TreatmentVector: entries must be 0 or 1");
      set(j++, b == 1);
    }
  }

  static TreatmentVector from_bits(std::span<const int> bits) {
    TreatmentVector w(bits.size());
    for (std::size_t j = 0; j < bits.size(); ++j) {
      detail::require(bits[j] == 0 || bits[j] == 1, "TreatmentVector: entries must be 0 or 1");
      w.set(j, bits[j] == 1);
    }
    return w;
  }

  // Bit j of `mask` is the treatment of unit j.
  static TreatmentVector from_mask(std::size_t m, std::uint64_t mask) {
    detail::require(m <= 64, "TreatmentVector::from_mask: m exceeds 64");
    TreatmentVector w(m);
    if (m > 0) w.words_[0] = m == 64 ? mask : (mask & ((std::uint64_t{1} << m) - 1));
    return w;
  }

  std::size_t size() const { return m_; }

  bool operator[](std::size_t j) const { return (words_[j >> 6] >> (j & 63)) & 1U; }

  void set(std::size_t j, bool value) {
    const std::uint64_t bit = std::uint64_t{1} << (j & 63);
    if (value) words_[j >> 6] |= bit; else words_[j >> 6] &= ~bit;
  }

  std::size_t popcount() const {
    std::size_t c = 0;
    for (auto word : words_) c += static_cast<std::size_t>(std::popcount(word));
    return c;
  }

  std::uint64_t mask() const {
    detail::require(m_ <= 64, "TreatmentVector::mask: more than 64 units");
    return words_.empty() ? 0 : words_[0];
  }

  std::string to_string() const {
    std::string s(m_, '0');
    for (std::size_t j = 0; j < m_; ++j) if ((*this)[j]) s[j] = '1';
    return s;
  }

  friend bool operator==(const TreatmentVector&, const TreatmentVector&) = default;

  friend std::ostream& operator<<(std::ostream& os, const TreatmentVector& w) { return os << w.to_string(); }

 private:
  std::size_t m_ = 0;
  std::vector<std::uint64_t> words_;
};

// Position of w in the canonical (lexicographic in w_0, ..., w_{m-1}) order of
// {0,1}^m: unit 0 is the most significant bit.
inline std::uint64_t canonical_code(const TreatmentVector& w) {
  detail::require(w.size() <= 63, "canonical_code: more than 63 units");
  std::uint64_t c = 0;
  for (std::size_t j = 0; j < w.size(); ++j) c = (c << 1) | static_cast<std::uint64_t>(w[j]);
  return c;
}

inline TreatmentVector from_canonical_code(std::size_t m, std::uint64_t code) {
  TreatmentVector w(m);
  for (std::size_t j = 0; j < m; ++j) w.set(j, (code >> (m - 1 - j)) & 1U);
  return w;
}

struct Bernoulli {
  std::vector<double> probs;
};

struct CompletelyRandomized {
  std::size_t m = 0;
  std::size_t n1 = 0;
};

// The randomization law of W: independent Bernoulli draws, or a uniformly
// random arrangement of exactly n1 treated units.
class Design {
 public:
  using Variant = std::variant<Bernoulli, CompletelyRandomized>;

  static Design bernoulli(std::vector<double> probs) {
    detail::require(!probs.empty(), "Bernoulli design needs at least one unit");
    for (double p : probs) {
      detail::require(p > 0.0 && p < 1.0, "Bernoulli design: probabilities must lie in (0, 1)");
    }
    return Design(Bernoulli{std::move(probs)});
  }

  static Design bernoulli(std::size_t m, double p) { return bernoulli(std::vector<double>(m, p)); }

  static Design completely_randomized(std::size_t m, std::size_t n1) {
    detail::require(m >= 2 && n1 >= 1 && n1 + 1 <= m,
                    "completely randomized design requires 1 <= n1 <= m - 1");
    return Design(CompletelyRandomized{m, n1});
  }

  std::size_t size() const {
    return std::visit([](const auto& d) -> std::size_t {
      if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Bernoulli>) return d.probs.size();
      else return d.m;
    }, v_);
  }

  const Variant& variant() const { return v_; }
  const Bernoulli* as_bernoulli() const { return std::get_if<Bernoulli>(&v_); }
  const CompletelyRandomized* as_crd() const { return std::get_if<CompletelyRandomized>(&v_); }
  bool is_bernoulli() const { return as_bernoulli() != nullptr; }

  // Number of assignments with positive mass.
  double support_size() const {
    if (auto b = as_bernoulli()) return std::ldexp(1.0, static_cast<int>(b->probs.size()));
    const auto& c = *as_crd();
    return choose(static_cast<std::int64_t>(c.m), static_cast<std::int64_t>(c.n1));
  }

 private:
  explicit Design(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

namespace detail {

inline void check_length(const Design& design, const TreatmentVector& w) {
  if (w.size() != design.size()) {
    throw InvalidArgument("treatment vector has " + std::to_string(w.size()) + " units, design has " +
                          std::to_string(design.size()));
  }
}

inline std::size_t treated_outside(const TreatmentVector& w, const IndexSet& s) {
  std::size_t inside = 0;
  for (std::size_t j : s) inside += w[j] ? 1 : 0;
  return w.popcount() - inside;
}

// Chooses k distinct positions among `slots` uniformly (partial Fisher-Yates).
inline std::vector<std::size_t> choose_uniform(std::vector<std::size_t> slots, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, slots.size() - 1);
    std::swap(slots[i], slots[pick(rng)]);
  }
  slots.resize(k);
  return slots;
}

}  // namespace detail

inline TreatmentVector sample_treatments(const Design& design, Rng& rng) {
  TreatmentVector w(design.size());
  if (auto b = design.as_bernoulli()) {
    for (std::size_t j = 0; j < b->probs.size(); ++j) w.set(j, uniform01(rng) < b->probs[j]);
    return w;
  }
  const auto& c = *design.as_crd();
  std::vector<std::size_t> slots(c.m);
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  for (std::size_t j : detail::choose_uniform(std::move(slots), c.n1, rng)) w.set(j, true);
  return w;
}

inline double design_pmf(const Design& design, const TreatmentVector& w) {
  detail::check_length(design, w);
  if (auto b = design.as_bernoulli()) {
    double p = 1.0;
    for (std::size_t j = 0; j < b->probs.size(); ++j) p *= w[j] ? b->probs[j] : 1.0 - b->probs[j];
    return p;
  }
  const auto& c = *design.as_crd();
  if (w.popcount() != c.n1) return 0.0;
  return 1.0 / choose(static_cast<std::int64_t>(c.m), static_cast<std::int64_t>(c.n1));
}

// Every assignment with positive mass, once each, in canonical order.
inline std::vector<TreatmentVector> enumerate_support(const Design& design,
                                                      std::size_t cap = kDefaultSupportCap) {
  const std::size_t m = design.size();
  if (m > 62 || design.support_size() > static_cast<double>(cap)) {
    throw CapExceeded("support of the design exceeds the enumeration cap of " + std::to_string(cap));
  }
  std::vector<TreatmentVector> out;
  out.reserve(static_cast<std::size_t>(design.support_size()));
  if (design.is_bernoulli()) {
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << m); ++code) out.push_back(from_canonical_code(m, code));
    return out;
  }
  const auto n1 = design.as_crd()->n1;
  // Gosper's hack walks same-popcount codes in increasing order.
  std::uint64_t code = (std::uint64_t{1} << n1) - 1;
  const std::uint64_t limit = std::uint64_t{1} << m;
  while (code < limit) {
    out.push_back(from_canonical_code(m, code));
    const std::uint64_t low = code & (~code + 1);
    const std::uint64_t ripple = code + low;
    code = (((ripple ^ code) >> 2) / low) | ripple;
  }
  return out;
}

// All w' that agree with w off `s` and have positive conditional mass, with
// that mass. This is the law of W'_S given W_{-S} used by Gibbs rerandomization.
inline std::vector<std::pair<TreatmentVector, double>> enumerate_conditional(const Design& design,
                                                                             const IndexSet& s,
                                                                             const TreatmentVector& w) {
  detail::check_length(design, w);
  s.check_range(design.size());
  detail::require(s.size() <= 24, "enumerate_conditional: update set too large to enumerate");
  const auto& idx = s.members();
  const std::size_t a = idx.size();
  std::vector<std::pair<TreatmentVector, double>> out;
  if (auto b = design.as_bernoulli()) {
    out.reserve(std::size_t{1} << a);
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << a); ++x) {
      TreatmentVector wp = w;
      double p = 1.0;
      for (std::size_t k = 0; k < a; ++k) {
        const bool bit = (x >> k) & 1U;
        wp.set(idx[k], bit);
        p *= bit ? b->probs[idx[k]] : 1.0 - b->probs[idx[k]];
      }
      out.emplace_back(std::move(wp), p);
    }
    return out;
  }
  const auto n1 = design.as_crd()->n1;
  const std::size_t outside = detail::treated_outside(w, s);
  if (outside > n1 || n1 - outside > a) {
    throw InvalidArgument("enumerate_conditional: w is not in the support of the design");
  }
  const std::size_t k = n1 - outside;
  const double p = 1.0 / choose(static_cast<std::int64_t>(a), static_cast<std::int64_t>(k));
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << a); ++x) {
    if (static_cast<std::size_t>(std::popcount(x)) != k) continue;
    TreatmentVector wp = w;
    for (std::size_t j = 0; j < a; ++j) wp.set(idx[j], (x >> j) & 1U);
    out.emplace_back(std::move(wp), p);
  }
  return out;
}

// One Gibbs step with a fixed update set: W'_{-S} = W_{-S}, W'_S drawn afresh
// from its conditional law given W_{-S}.
inline TreatmentVector gibbs_rerandomize(const Design& design, const TreatmentVector& w, const IndexSet& s,
                                         Rng& rng) {
  detail::check_length(design, w);
  s.check_range(design.size());
  TreatmentVector out = w;
  if (auto b = design.as_bernoulli()) {
    for (std::size_t j : s) out.set(j, uniform01(rng) < b->probs[j]);
    return out;
  }
  const auto n1 = design.as_crd()->n1;
  const std::size_t outside = detail::treated_outside(w, s);
  if (outside > n1 || n1 - outside > s.size()) {
    throw InvalidArgument("gibbs_rerandomize: conditional law is empty (w not in support)");
  }
  for (std::size_t j : s) out.set(j, false);
  for (std::size_t j : detail::choose_uniform(s.members(), n1 - outside, rng)) out.set(j, true);
  return out;
}

// P(W' = w_prime | W = w, S = s) for Gibbs rerandomization with update set s.
inline double conditional_pmf(const Design& design, const IndexSet& s, const TreatmentVector& w,
                              const TreatmentVector& w_prime) {
  detail::check_length(design, w);
  detail::check_length(design, w_prime);
  s.check_range(design.size());
  for (std::size_t j = 0, k = 0; j < w.size(); ++j) {
    while (k < s.size() && s[k] < j) ++k;
    const bool in_s = k < s.size() && s[k] == j;
    if (!in_s && w[j] != w_prime[j]) return 0.0;
  }
  if (auto b = design.as_bernoulli()) {
    double p = 1.0;
    for (std::size_t j : s) p *= w_prime[j] ? b->probs[j] : 1.0 - b->probs[j];
    return p;
  }
  const auto n1 = design.as_crd()->n1;
  if (w.popcount() != n1 || w_prime.popcount() != n1) return 0.0;
  std::size_t k = 0;
  for (std::size_t j : s) k += w_prime[j] ? 1 : 0;
  return 1.0 / choose(static_cast<std::int64_t>(s.size()), static_cast<std::int64_t>(k));
}

}  // namespace nj
