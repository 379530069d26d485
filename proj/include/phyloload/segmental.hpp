#pragma once

// Segment inventories, segmented lexicons, vowel-length normalization and
// extraction of tonic-vowel + post-tonic-consonant domain tokens.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "phyloload/distribution.hpp"
#include "phyloload/errors.hpp"
#include "phyloload/text.hpp"

namespace phyloload {

enum class SegmentCategory { vowel, consonant };
enum class VowelLength { short_, long_ };

struct Segment {
  std::string symbol;
  SegmentCategory category = SegmentCategory::consonant;
  std::optional<VowelLength> length;  // vowels only
  std::optional<std::string> quality;  // vowels only
  std::optional<std::string> place;    // consonants only
  std::optional<std::string> manner;   // consonants only

  bool is_vowel() const { return category == SegmentCategory::vowel; }
  bool is_consonant() const { return category == SegmentCategory::consonant; }
  bool is_short_vowel() const { return is_vowel() && length == VowelLength::short_; }
  bool is_long_vowel() const { return is_vowel() && length == VowelLength::long_; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct LengthPair {
  std::string short_symbol;
  std::string long_symbol;
  friend bool operator==(const LengthPair&, const LengthPair&) = default;
};

// Symbols may not contain whitespace or this character; collapsed contrasts
// use it to mint symbols that cannot clash with an inventory.
inline constexpr char kReservedSymbolChar = '#';

class SegmentInventory {
 public:
  SegmentInventory() = default;

  // Validates every invariant and derives the short/long pairing by quality.
  explicit SegmentInventory(std::vector<Segment> segments) : segments_(std::move(segments)) {
    std::map<std::string, std::vector<const Segment*>> shorts, longs;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& s = segments_[i];
      check_segment(s);
      if (!index_.emplace(s.symbol, i).second)
        throw InputError("duplicate segment symbol '" + s.symbol + "'");
      if (s.is_short_vowel()) shorts[*s.quality].push_back(&s);
      if (s.is_long_vowel()) longs[*s.quality].push_back(&s);
    }
    for (const auto& [quality, ls] : longs) {
      auto it = shorts.find(quality);
      if (it == shorts.end()) continue;
      if (it->second.size() > 1 || ls.size() > 1)
        throw InputError("ambiguous length pairing for vowel quality '" + quality + "'");
      long_counterpart_.emplace(quality, LengthPair{it->second.front()->symbol, ls.front()->symbol});
    }
  }

  const std::vector<Segment>& segments() const { return segments_; }
  const std::map<std::string, LengthPair>& long_counterpart() const { return long_counterpart_; }

  const Segment* find(std::string_view symbol) const {
    auto it = index_.find(std::string(symbol));
    return it == index_.end() ? nullptr : &segments_[it->second];
  }
  const Segment& at(std::string_view symbol) const {
    const Segment* s = find(symbol);
    if (!s) throw InputError("unknown segment symbol '" + std::string(symbol) + "'");
    return *s;
  }
  bool contains(std::string_view symbol) const { return find(symbol) != nullptr; }

  const LengthPair* length_pair(const std::string& quality) const {
    auto it = long_counterpart_.find(quality);
    return it == long_counterpart_.end() ? nullptr : &it->second;
  }

 private:
  static void check_segment(const Segment& s) {
    if (s.symbol.empty()) throw InputError("empty segment symbol");
    for (char c : s.symbol)
      if (text::is_space(c) || c == kReservedSymbolChar)
        throw InputError("segment symbol '" + s.symbol + "' contains a reserved character");
    if (s.is_vowel()) {
      if (!s.length) throw InputError("vowel '" + s.symbol + "' missing length");
      if (!s.quality || s.quality->empty()) throw InputError("vowel '" + s.symbol + "' missing quality");
      if (s.place || s.manner) throw InputError("vowel '" + s.symbol + "' has place/manner");
    } else {
      if (!s.place || s.place->empty() || !s.manner || s.manner->empty())
        throw InputError("consonant '" + s.symbol + "' missing place/manner");
      if (s.length || s.quality) throw InputError("consonant '" + s.symbol + "' has length/quality");
    }
  }

  std::vector<Segment> segments_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, LengthPair> long_counterpart_;
};

struct LexicalEntry {
  std::vector<std::string> form;
  std::optional<std::string> gloss;
  int source_line = 0;
};

struct DomainToken {
  Segment vowel;
  Segment consonant;

  DomainType type() const { return {vowel.symbol, consonant.symbol}; }
};

namespace detail {

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg;
  for (const auto& e : errors) {
    if (!msg.empty()) msg += '\n';
    msg += e;
  }
  return msg;
}

inline std::optional<std::string> nonempty(std::string_view cell) {
  cell = text::trim(cell);
  if (cell.empty()) return std::nullopt;
  return std::string(cell);
}

inline bool is_comment_or_blank(std::string_view line) {
  auto t = text::trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace detail

// Inventory TSV: header `symbol category length quality place manner`, one
// segment per row, empty cells for inapplicable fields. Lines starting with
// '#' are comments. All row errors are collected and reported together.
inline SegmentInventory parse_inventory(std::string_view contents) {
  static const std::vector<std::string> kHeader = {"symbol", "category", "length",
                                                   "quality", "place", "manner"};
  auto rows = text::lines(contents);
  std::size_t i = 0;
  while (i < rows.size() && detail::is_comment_or_blank(rows[i])) ++i;
  if (i == rows.size()) throw InputError("inventory: missing header row");
  {
    auto cells = text::split(rows[i], '\t');
    std::vector<std::string> got;
    for (auto c : cells) got.push_back(text::to_lower(text::trim(c)));
    if (got != kHeader)
      throw InputError("inventory line " + std::to_string(i + 1) +
                       ": expected header 'symbol\\tcategory\\tlength\\tquality\\tplace\\tmanner'");
  }

  std::vector<std::string> errors;
  std::vector<Segment> segments;
  std::map<std::string, int> first_line;
  for (++i; i < rows.size(); ++i) {
    const int line = static_cast<int>(i + 1);
    if (detail::is_comment_or_blank(rows[i])) continue;
    auto cells = text::split(rows[i], '\t');
    const std::string where = "inventory line " + std::to_string(line) + ": ";
    if (cells.size() < 2 || cells.size() > kHeader.size()) {
      errors.push_back(where + "malformed row (expected up to 6 tab-separated cells, got " +
                       std::to_string(cells.size()) + ")");
      continue;
    }
    cells.resize(kHeader.size());
    Segment s;
    s.symbol = std::string(text::trim(cells[0]));
    const std::string cat = text::to_lower(text::trim(cells[1]));
    if (cat == "v" || cat == "vowel") {
      s.category = SegmentCategory::vowel;
    } else if (cat == "c" || cat == "consonant") {
      s.category = SegmentCategory::consonant;
    } else {
      errors.push_back(where + "unknown category '" + std::string(text::trim(cells[1])) + "'");
      continue;
    }
    if (auto len = detail::nonempty(cells[2])) {
      const std::string l = text::to_lower(*len);
      if (l == "short" || l == "s") {
        s.length = VowelLength::short_;
      } else if (l == "long" || l == "l") {
        s.length = VowelLength::long_;
      } else {
        errors.push_back(where + "unknown length '" + *len + "'");
        continue;
      }
    }
    s.quality = detail::nonempty(cells[3]);
    s.place = detail::nonempty(cells[4]);
    s.manner = detail::nonempty(cells[5]);

    if (s.symbol.empty()) {
      errors.push_back(where + "empty symbol");
      continue;
    }
    if (auto [it, fresh] = first_line.emplace(s.symbol, line); !fresh) {
      errors.push_back(where + "duplicate symbol '" + s.symbol + "' (first defined on line " +
                       std::to_string(it->second) + ")");
      continue;
    }
    if (s.symbol.find(kReservedSymbolChar) != std::string::npos)
      errors.push_back(where + "symbol '" + s.symbol + "' contains reserved character '#'");
    else if (s.is_vowel() && !s.quality)
      errors.push_back(where + "vowel '" + s.symbol + "' missing quality");
    else if (s.is_vowel() && !s.length)
      errors.push_back(where + "vowel '" + s.symbol + "' missing length");
    else if (s.is_vowel() && (s.place || s.manner))
      errors.push_back(where + "vowel '" + s.symbol + "' must not have place/manner");
    else if (s.is_consonant() && (!s.place || !s.manner))
      errors.push_back(where + "consonant '" + s.symbol + "' missing place/manner");
    else if (s.is_consonant() && (s.length || s.quality))
      errors.push_back(where + "consonant '" + s.symbol + "' must not have length/quality");
    else
      segments.push_back(std::move(s));
  }
  if (!errors.empty()) throw InputError(detail::join_errors(errors));
  return SegmentInventory(std::move(segments));
}

enum class LexiconMode {
  canonical,  // forms are whitespace-separated segment symbols
  tokenize,   // forms are undelimited strings, segmented by longest match
};

// Left-to-right longest-match segmentation of `s` against the inventory.
// Whitespace inside `s` is ignored. On failure, `bad_offset` receives the
// 1-based code point offset of the first unresolvable character.
inline std::optional<std::vector<std::string>> tokenize_form(std::string_view s,
                                                             const SegmentInventory& inv,
                                                             std::size_t* bad_offset = nullptr) {
  std::size_t max_len = 0;
  for (const auto& seg : inv.segments()) max_len = std::max(max_len, seg.symbol.size());
  std::string compact;
  for (char c : s)
    if (!text::is_space(c)) compact += c;
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < compact.size()) {
    std::size_t best = 0;
    for (std::size_t len = std::min(max_len, compact.size() - pos); len > 0; --len) {
      if (inv.contains(std::string_view(compact).substr(pos, len))) {
        best = len;
        break;
      }
    }
    if (best == 0) {
      if (bad_offset) *bad_offset = text::utf8_length(std::string_view(compact).substr(0, pos)) + 1;
      return std::nullopt;
    }
    out.emplace_back(compact.substr(pos, best));
    pos += best;
  }
  return out;
}

// Lexicon TSV: header `form gloss` (gloss column optional), one entry per line.
inline std::vector<LexicalEntry> parse_lexicon(std::string_view contents, const SegmentInventory& inv,
                                               LexiconMode mode = LexiconMode::canonical) {
  auto rows = text::lines(contents);
  std::size_t i = 0;
  while (i < rows.size() && text::trim(rows[i]).empty()) ++i;
  if (i == rows.size()) throw InputError("lexicon: missing header row");
  {
    auto cells = text::split(rows[i], '\t');
    if (text::to_lower(text::trim(cells[0])) != "form" ||
        (cells.size() > 1 && text::to_lower(text::trim(cells[1])) != "gloss") || cells.size() > 2)
      throw InputError("lexicon line " + std::to_string(i + 1) + ": expected header 'form\\tgloss'");
  }

  std::vector<std::string> errors;
  std::vector<LexicalEntry> entries;
  for (++i; i < rows.size(); ++i) {
    const int line = static_cast<int>(i + 1);
    if (text::trim(rows[i]).empty()) continue;
    auto cells = text::split(rows[i], '\t');
    const std::string where = "lexicon line " + std::to_string(line) + ": ";
    if (cells.size() > 2) {
      errors.push_back(where + "malformed row (more than 2 tab-separated cells)");
      continue;
    }
    const std::string_view raw = text::trim(cells[0]);
    if (raw.empty()) {
      errors.push_back(where + "empty form");
      continue;
    }
    LexicalEntry entry;
    entry.source_line = line;
    if (cells.size() == 2) entry.gloss = detail::nonempty(cells[1]);
    if (mode == LexiconMode::canonical) {
      auto symbols = text::split_ws(raw);
      bool ok = true;
      for (std::size_t k = 0; k < symbols.size(); ++k) {
        if (!inv.contains(symbols[k])) {
          errors.push_back(where + "entry '" + std::string(raw) + "': unknown symbol '" +
                           std::string(symbols[k]) + "' at offset " + std::to_string(k + 1));
          ok = false;
          break;
        }
        entry.form.emplace_back(symbols[k]);
      }
      if (!ok) continue;
    } else {
      std::size_t bad = 0;
      auto form = tokenize_form(raw, inv, &bad);
      if (!form) {
        errors.push_back(where + "entry '" + std::string(raw) + "': no segment matches at offset " +
                         std::to_string(bad));
        continue;
      }
      entry.form = std::move(*form);
    }
    entries.push_back(std::move(entry));
  }
  if (!errors.empty()) throw InputError(detail::join_errors(errors));
  return entries;
}

struct NormalizeOptions {
  // (vowel quality, glide symbol): quality-glide-quality trigraphs of short
  // vowels are read as the long vowel of that quality.
  std::vector<std::pair<std::string, std::string>> glide_trigraphs = {{"u", "w"}, {"i", "j"}};
};

// Rewrites /VgV/ trigraphs (glide rule) and then pairs of adjacent short
// vowels as long vowels, each pass left to right. A pair of unlike short
// vowels takes the first vowel's quality. A trigraph whose quality has no
// long counterpart is left alone; an adjacent short pair whose first quality
// has none is an error.
inline std::vector<std::string> normalize_vowel_length(const std::vector<std::string>& form,
                                                       const SegmentInventory& inv,
                                                       const NormalizeOptions& opts = {}) {
  std::vector<const Segment*> segs;
  segs.reserve(form.size());
  for (const auto& sym : form) segs.push_back(&inv.at(sym));

  std::vector<const Segment*> glided;
  glided.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size();) {
    if (i + 2 < segs.size() && segs[i]->is_short_vowel() && segs[i + 2]->is_short_vowel() &&
        segs[i]->quality == segs[i + 2]->quality) {
      const std::string& q = *segs[i]->quality;
      const LengthPair* pair = inv.length_pair(q);
      bool matched = false;
      if (pair) {
        for (const auto& [quality, glide] : opts.glide_trigraphs)
          if (quality == q && segs[i + 1]->symbol == glide) matched = true;
      }
      if (matched) {
        glided.push_back(&inv.at(pair->long_symbol));
        i += 3;
        continue;
      }
    }
    glided.push_back(segs[i]);
    ++i;
  }

  std::vector<std::string> out;
  out.reserve(glided.size());
  for (std::size_t i = 0; i < glided.size();) {
    if (i + 1 < glided.size() && glided[i]->is_short_vowel() && glided[i + 1]->is_short_vowel()) {
      const LengthPair* pair = inv.length_pair(*glided[i]->quality);
      if (!pair)
        throw InputError("adjacent short vowels '" + glided[i]->symbol + glided[i + 1]->symbol +
                         "' but quality '" + *glided[i]->quality + "' has no long counterpart");
      out.push_back(pair->long_symbol);
      i += 2;
      continue;
    }
    out.push_back(glided[i]->symbol);
    ++i;
  }
  return out;
}

enum class DomainStatus {
  qualifying,
  no_vowel,         // no vowel at all; skipped with a warning
  word_final,       // nothing follows the tonic vowel
  no_consonant,     // a vowel directly follows the tonic vowel
  cluster,          // two or more consonants follow
  not_intervocalic  // the following consonant ends the word
};

struct DomainExtraction {
  DomainStatus status = DomainStatus::no_vowel;
  std::optional<DomainToken> token;
};

// The tonic vowel is the first vowel of the form; the domain is that vowel
// plus a single consonant standing between it and the next vowel.
inline DomainExtraction classify_domain(const std::vector<std::string>& form, const SegmentInventory& inv) {
  std::size_t v = 0;
  while (v < form.size() && !inv.at(form[v]).is_vowel()) ++v;
  if (v == form.size()) return {DomainStatus::no_vowel, std::nullopt};
  if (v + 1 == form.size()) return {DomainStatus::word_final, std::nullopt};
  const Segment& next = inv.at(form[v + 1]);
  if (next.is_vowel()) return {DomainStatus::no_consonant, std::nullopt};
  if (v + 2 == form.size()) return {DomainStatus::not_intervocalic, std::nullopt};
  if (!inv.at(form[v + 2]).is_vowel()) return {DomainStatus::cluster, std::nullopt};
  return {DomainStatus::qualifying, DomainToken{inv.at(form[v]), next}};
}

inline std::optional<DomainToken> extract_domains(const LexicalEntry& entry, const SegmentInventory& inv) {
  return classify_domain(entry.form, inv).token;
}

struct IngestStats {
  std::size_t entries = 0;
  std::size_t qualifying = 0;
  std::size_t no_vowel = 0;
  std::size_t no_domain = 0;  // vowel present but no single intervocalic consonant
};

// Normalizes each entry and counts one domain token per qualifying entry.
inline DomainDistribution build_distribution(const std::vector<LexicalEntry>& entries,
                                             const SegmentInventory& inv, IngestStats* stats = nullptr,
                                             const NormalizeOptions& opts = {}) {
  DomainDistribution dist;
  IngestStats local;
  std::vector<int> vowelless_lines;
  for (const auto& e : entries) {
    ++local.entries;
    auto x = classify_domain(normalize_vowel_length(e.form, inv, opts), inv);
    switch (x.status) {
      case DomainStatus::qualifying:
        ++local.qualifying;
        dist.add(x.token->type());
        break;
      case DomainStatus::no_vowel:
        ++local.no_vowel;
        vowelless_lines.push_back(e.source_line);
        break;
      default:
        ++local.no_domain;
    }
  }
  if (!vowelless_lines.empty()) {
    std::string lines;
    for (std::size_t k = 0; k < vowelless_lines.size() && k < 5; ++k)
      lines += (k ? ", " : "") + std::to_string(vowelless_lines[k]);
    if (vowelless_lines.size() > 5) lines += ", ...";
    warn("skipped " + std::to_string(vowelless_lines.size()) + " entries with no vowel (lines " + lines +
         ")");
  }
  if (stats) *stats = local;
  if (dist.empty()) throw EmptyDistributionError("no qualifying domain tokens in lexicon");
  return dist;
}

}  // namespace phyloload
