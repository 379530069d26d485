#pragma once

// Domain entropy and functional load of phonological contrasts.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "phyloload/distribution.hpp"
#include "phyloload/errors.hpp"
#include "phyloload/segmental.hpp"
#include "phyloload/text.hpp"

namespace phyloload {

// Shannon entropy in bits of the type distribution.
//
// The sum runs over the count multiset in ascending order, so the result
// depends only on the multiset of counts and not on how types are labelled.
// Relabelling that merges nothing therefore leaves the entropy bit-identical.
inline double domain_entropy(const DomainDistribution& dist) {
  if (dist.empty()) throw InputError("entropy of an empty distribution");
  std::vector<std::uint64_t> counts;
  counts.reserve(dist.num_types());
  for (const auto& [type, c] : dist.counts()) counts.push_back(c);
  std::sort(counts.begin(), counts.end());
  const double n = static_cast<double>(dist.total());
  double h = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h < 0.0 ? 0.0 : h;
}

// A contrast as a collection of pairwise-disjoint symbol sets, each of size
// >= 2. Collapsing rewrites every member of set k to a reserved symbol.
class ContrastSpec {
 public:
  ContrastSpec(std::string name, std::vector<std::set<std::string>> sets)
      : name_(std::move(name)), sets_(std::move(sets)) {
    for (std::size_t k = 0; k < sets_.size(); ++k) {
      if (sets_[k].size() < 2)
        throw InputError("contrast " + name_ + ": set " + std::to_string(k) + " has fewer than 2 members");
      for (const auto& sym : sets_[k]) {
        if (!owner_.emplace(sym, k).second)
          throw InputError("contrast " + name_ + ": symbol '" + sym + "' appears in more than one set");
      }
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<std::set<std::string>>& sets() const { return sets_; }

  // Symbol replacing members of set k. Cannot occur in any inventory.
  static std::string merged_symbol(std::size_t k) { return kReservedSymbolChar + std::to_string(k); }

  const std::string& map(const std::string& symbol, std::string& scratch) const {
    auto it = owner_.find(symbol);
    if (it == owner_.end()) return symbol;
    scratch = merged_symbol(it->second);
    return scratch;
  }

  void validate_against(const SegmentInventory& inv) const {
    for (const auto& set : sets_)
      for (const auto& sym : set)
        if (!inv.contains(sym))
          throw InputError("contrast " + name_ + ": symbol '" + sym + "' not in inventory");
  }

 private:
  std::string name_;
  std::vector<std::set<std::string>> sets_;
  std::unordered_map<std::string, std::size_t> owner_;
};

inline DomainDistribution collapse_lexicon(const DomainDistribution& dist, const ContrastSpec& spec) {
  DomainDistribution out;
  std::string scratch;
  for (const auto& [type, count] : dist.counts()) {
    DomainType merged;
    merged.reserve(type.size());
    for (const auto& sym : type) merged.push_back(spec.map(sym, scratch));
    out.add(merged, count);
  }
  return out;
}

// Entropy lost by collapsing the contrast. Never negative.
inline double functional_load(const DomainDistribution& dist, const ContrastSpec& spec) {
  const double fl = domain_entropy(dist) - domain_entropy(collapse_lexicon(dist, spec));
  return fl < 0.0 ? 0.0 : fl;
}

// Raised when an inventory offers no contrast of the requested kind.
class NoContrastError : public InputError {
 public:
  using InputError::InputError;
};

inline ContrastSpec make_length_spec(const SegmentInventory& inv) {
  std::vector<std::set<std::string>> sets;
  for (const auto& [quality, pair] : inv.long_counterpart())
    sets.push_back({pair.short_symbol, pair.long_symbol});
  if (sets.empty()) throw NoContrastError("no length contrast");
  return ContrastSpec("FL_V", std::move(sets));
}

namespace detail {

// Groups consonants by one feature; each group collapses the other feature.
template <typename Key>
std::vector<std::set<std::string>> group_consonants(const SegmentInventory& inv, Key key) {
  std::map<std::string, std::set<std::string>> groups;
  for (const auto& s : inv.segments())
    if (s.is_consonant()) groups[key(s)].insert(s.symbol);
  std::vector<std::set<std::string>> sets;
  for (auto& [label, members] : groups)
    if (members.size() >= 2) sets.push_back(std::move(members));
  return sets;
}

}  // namespace detail

// Manner collapses within each place: one set per place label.
inline ContrastSpec make_manner_spec(const SegmentInventory& inv) {
  auto sets = detail::group_consonants(inv, [](const Segment& s) { return *s.place; });
  if (sets.empty()) throw NoContrastError("no manner contrast");
  return ContrastSpec("FL_C", std::move(sets));
}

// Place collapses within each manner: one set per manner label.
inline ContrastSpec make_place_spec(const SegmentInventory& inv) {
  auto sets = detail::group_consonants(inv, [](const Segment& s) { return *s.manner; });
  if (sets.empty()) throw NoContrastError("no place contrast");
  return ContrastSpec("FL_P", std::move(sets));
}

struct FLResult {
  std::string language;
  double fl_v = 0;
  double fl_c = 0;
  double fl_p = 0;
  std::uint64_t n = 0;
};

struct FLExclusion {
  std::string language;
  std::uint64_t n = 0;
  double fl_v = 0;
  std::string reason;
};

struct FLTable {
  std::vector<FLResult> rows;
  std::vector<FLExclusion> excluded;
};

struct LanguageData {
  std::vector<LexicalEntry> entries;
  SegmentInventory inventory;
};

struct FLTableOptions {
  std::uint64_t min_n = 200;
  bool drop_zero_flv = true;
  NormalizeOptions normalize;
};

namespace detail {

inline double fl_or_zero(const DomainDistribution& dist, const SegmentInventory& inv,
                         ContrastSpec (*make)(const SegmentInventory&)) {
  try {
    return functional_load(dist, make(inv));
  } catch (const NoContrastError&) {
    return 0.0;
  }
}

}  // namespace detail

// Per-language FL_V, FL_C, FL_P and N. A language whose inventory lacks a
// contrast gets FL 0 for it. Languages below min_n, or with FL_V = 0 when
// drop_zero_flv is set, go to `excluded` with the reason.
inline FLTable compute_fl_table(const std::map<std::string, LanguageData>& languages,
                                const FLTableOptions& opts = {}) {
  FLTable table;
  for (const auto& [name, data] : languages) {
    DomainDistribution dist;
    try {
      dist = build_distribution(data.entries, data.inventory, nullptr, opts.normalize);
    } catch (const EmptyDistributionError&) {
      table.excluded.push_back({name, 0, 0.0, "no qualifying domain tokens"});
      continue;
    }
    FLResult r;
    r.language = name;
    r.n = dist.total();
    r.fl_v = detail::fl_or_zero(dist, data.inventory, &make_length_spec);
    r.fl_c = detail::fl_or_zero(dist, data.inventory, &make_manner_spec);
    r.fl_p = detail::fl_or_zero(dist, data.inventory, &make_place_spec);
    if (r.n < opts.min_n) {
      table.excluded.push_back({name, r.n, r.fl_v, "fewer than " + std::to_string(opts.min_n) + " domain tokens"});
    } else if (opts.drop_zero_flv && r.fl_v == 0.0) {
      table.excluded.push_back({name, r.n, r.fl_v, "FL_V is zero"});
    } else {
      table.rows.push_back(std::move(r));
    }
  }
  return table;
}

// CSV `language,fl_v,fl_c,fl_p,n`.
inline std::string write_fl_csv(const std::vector<FLResult>& rows) {
  std::string out = "language,fl_v,fl_c,fl_p,n\n";
  for (const auto& r : rows) {
    out += text::csv_field(r.language) + ',' + text::format_fixed(r.fl_v, 6) + ',' +
           text::format_fixed(r.fl_c, 6) + ',' + text::format_fixed(r.fl_p, 6) + ',' + std::to_string(r.n) +
           '\n';
  }
  return out;
}

inline std::vector<FLResult> parse_fl_csv(std::string_view contents) {
  auto rows = text::lines(contents);
  if (rows.empty()) throw InputError("FL table: empty file");
  auto header = text::parse_csv_line(rows[0]);
  for (auto& h : header) h = text::to_lower(text::trim(h));
  if (header != std::vector<std::string>{"language", "fl_v", "fl_c", "fl_p", "n"})
    throw InputError("FL table: expected header 'language,fl_v,fl_c,fl_p,n'");
  std::vector<FLResult> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const std::string where = "FL table line " + std::to_string(i + 1) + ": ";
    auto cells = text::parse_csv_line(rows[i]);
    if (cells.size() != 5) throw InputError(where + "expected 5 fields");
    FLResult r;
    r.language = std::string(text::trim(cells[0]));
    auto v = text::parse_double(cells[1]);
    auto c = text::parse_double(cells[2]);
    auto p = text::parse_double(cells[3]);
    auto n = text::parse_int(cells[4]);
    if (!v || !c || !p || !n || *n < 1) throw InputError(where + "malformed numeric field");
    r.fl_v = *v;
    r.fl_c = *c;
    r.fl_p = *p;
    r.n = static_cast<std::uint64_t>(*n);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace phyloload
