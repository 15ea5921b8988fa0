#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include "nj/error.hpp"

namespace nj {

// A subset of unit indices, stored sorted and without duplicates. Indices are
// zero-based throughout the library.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<std::size_t> members) : members_(members) { normalize(); }
  explicit IndexSet(std::vector<std::size_t> members) : members_(std::move(members)) { normalize(); }

  // Bit j of `mask` selects unit j.
  static IndexSet from_mask(std::uint64_t mask) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(std::popcount(mask)));
    while (mask != 0) {
      out.push_back(static_cast<std::size_t>(std::countr_zero(mask)));
      mask &= mask - 1;
    }
    IndexSet s;
    s.members_ = std::move(out);
    return s;
  }

  static IndexSet range(std::size_t first, std::size_t last) {
    IndexSet s;
    for (std::size_t j = first; j < last; ++j) s.members_.push_back(j);
    return s;
  }

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const std::vector<std::size_t>& members() const { return members_; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }
  std::size_t operator[](std::size_t k) const { return members_[k]; }

  bool contains(std::size_t j) const { return std::binary_search(members_.begin(), members_.end(), j); }

  bool intersects(const IndexSet& other) const {
    auto a = members_.begin();
    auto b = other.members_.begin();
    while (a != members_.end() && b != other.members_.end()) {
      if (*a == *b) return true;
      if (*a < *b) ++a; else ++b;
    }
    return false;
  }

  std::uint64_t mask() const {
    std::uint64_t m = 0;
    for (std::size_t j : members_) {
      detail::require(j < 64, "IndexSet::mask: index exceeds 63");
      m |= std::uint64_t{1} << j;
    }
    return m;
  }

  // Throws unless every member is below `m`.
  void check_range(std::size_t m) const {
    if (!members_.empty() && members_.back() >= m) {
      throw InvalidArgument("IndexSet: index " + std::to_string(members_.back()) +
                            " out of range for " + std::to_string(m) + " units");
    }
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;
  friend auto operator<=>(const IndexSet& a, const IndexSet& b) { return a.members_ <=> b.members_; }

  friend std::ostream& operator<<(std::ostream& os, const IndexSet& s) {
    os << '{';
    for (std::size_t k = 0; k < s.members_.size(); ++k) os << (k ? "," : "") << s.members_[k];
    return os << '}';
  }

 private:
  void normalize() {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  }

  std::vector<std::size_t> members_;
};

}  // namespace nj
