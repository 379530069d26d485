#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phyloload/errors.hpp"

namespace phyloload {

// Raised when a lexicon yields no qualifying domain tokens.
class EmptyDistributionError : public InputError {
 public:
  using InputError::InputError;
};

// A domain string type: the ordered symbols making up one domain.
using DomainType = std::vector<std::string>;

// Counts of domain string types over a lexicon. Every stored count is >= 1.
class DomainDistribution {
 public:
  using CountMap = std::map<DomainType, std::uint64_t>;

  DomainDistribution() = default;
  explicit DomainDistribution(CountMap counts) : counts_(std::move(counts)) {
    for (const auto& [type, count] : counts_) {
      if (count == 0) throw InputError("domain distribution contains a zero count");
      total_ += count;
    }
  }

  void add(const DomainType& type, std::uint64_t count = 1) {
    if (count == 0) return;
    counts_[type] += count;
    total_ += count;
  }

  const CountMap& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  std::size_t num_types() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

  std::uint64_t count(const DomainType& type) const {
    auto it = counts_.find(type);
    return it == counts_.end() ? 0 : it->second;
  }

  friend bool operator==(const DomainDistribution&, const DomainDistribution&) = default;

 private:
  CountMap counts_;
  std::uint64_t total_ = 0;
};

}  // namespace phyloload
