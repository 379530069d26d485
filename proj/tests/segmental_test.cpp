#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "phyloload/segmental.hpp"

using namespace phyloload;

namespace {

const char* kInventory =
    "symbol\tcategory\tlength\tquality\tplace\tmanner\n"
    "a\tV\tshort\ta\t\t\n"
    "aa\tV\tlong\ta\t\t\n"
    "i\tV\tshort\ti\t\t\n"
    "ii\tV\tlong\ti\t\t\n"
    "u\tV\tshort\tu\t\t\n"
    "uu\tV\tlong\tu\t\t\n"
    "e\tV\tshort\te\t\t\n"
    "t\tC\t\t\tapical\tstop\n"
    "d\tC\t\t\tapical\tvoiced stop\n"
    "n\tC\t\t\tapical\tnasal\n"
    "r\tC\t\t\tapical\trhotic\n"
    "w\tC\t\t\tlabial\tglide\n"
    "j\tC\t\t\tpalatal\tglide\n";

const SegmentInventory& inv() {
  static const SegmentInventory i = parse_inventory(kInventory);
  return i;
}

std::vector<std::string> F(std::initializer_list<const char*> syms) { return {syms.begin(), syms.end()}; }

LexicalEntry E(std::initializer_list<const char*> syms) { return {F(syms), std::nullopt, 0}; }

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Inventory, ConsonantRowMapsFields) {
  const auto& t = inv().at("t");
  EXPECT_TRUE(t.is_consonant());
  EXPECT_EQ(*t.place, "apical");
  EXPECT_EQ(*t.manner, "stop");
  EXPECT_FALSE(t.length);
}

TEST(Inventory, PairsShortAndLongByQuality) {
  const auto* p = inv().length_pair("a");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->short_symbol, "a");
  EXPECT_EQ(p->long_symbol, "aa");
  EXPECT_EQ(inv().long_counterpart().size(), 3u);
  EXPECT_EQ(inv().length_pair("e"), nullptr);
}

TEST(Inventory, DuplicateSymbolCitesBothLines) {
  auto msg = error_of([] {
    parse_inventory("symbol\tcategory\tlength\tquality\tplace\tmanner\n"
                    "t\tC\t\t\tapical\tstop\n"
                    "a\tV\tshort\ta\t\t\n"
                    "t\tC\t\t\tapical\tstop\n");
  });
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(Inventory, CollectsAllRowErrors) {
  auto msg = error_of([] {
    parse_inventory("symbol\tcategory\tlength\tquality\tplace\tmanner\n"
                    "a\tV\t\ta\t\t\n"
                    "t\tC\t\t\t\tstop\n"
                    "x\tQ\t\t\t\t\n");
  });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
}

TEST(Inventory, RejectsBadHeaderAndReservedCharacter) {
  EXPECT_THROW(parse_inventory("symbol\tcategory\n"), InputError);
  EXPECT_THROW(parse_inventory(""), InputError);
  EXPECT_THROW(parse_inventory("symbol\tcategory\tlength\tquality\tplace\tmanner\n"
                               "t#1\tC\t\t\tapical\tstop\n"),
               InputError);
}

TEST(Inventory, CommentsAndAbbreviationsAccepted) {
  auto i = parse_inventory("# toy\nsymbol\tcategory\tlength\tquality\tplace\tmanner\n"
                           "a\tvowel\ts\ta\n"
                           "aa\tvowel\tl\ta\n"
                           "# consonants\n"
                           "p\tconsonant\t\t\tlabial\tstop\n");
  EXPECT_EQ(i.segments().size(), 3u);
  EXPECT_TRUE(i.at("aa").is_long_vowel());
}

TEST(Inventory, AmbiguousPairingIsAnError) {
  EXPECT_THROW(parse_inventory("symbol\tcategory\tlength\tquality\tplace\tmanner\n"
                               "a\tV\tshort\ta\n"
                               "aa\tV\tlong\ta\n"
                               "a:\tV\tlong\ta\n"),
               InputError);
}

TEST(Lexicon, CanonicalFormsSplitOnWhitespace) {
  auto e = parse_lexicon("form\tgloss\nt a t a\tfather\n", inv());
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].form, F({"t", "a", "t", "a"}));
  EXPECT_EQ(*e[0].gloss, "father");
  EXPECT_EQ(e[0].source_line, 2);
}

TEST(Lexicon, UnknownSymbolReportsEntryAndOffset) {
  auto msg = error_of([] { parse_lexicon("form\tgloss\nt q a\tx\n", inv()); });
  EXPECT_NE(msg.find("'t q a'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("offset 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(Lexicon, TokenizeUsesLongestMatch) {
  auto inv2 = parse_inventory("symbol\tcategory\tlength\tquality\tplace\tmanner\n"
                              "t\tC\t\t\tapical\tstop\n"
                              "a\tV\tshort\ta\n"
                              "aa\tV\tlong\ta\n");
  auto e = parse_lexicon("form\tgloss\ntaa ta\tx\n", inv2, LexiconMode::tokenize);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].form, F({"t", "aa", "t", "a"}));
  std::size_t bad = 0;
  EXPECT_FALSE(tokenize_form("taqa", inv2, &bad));
  EXPECT_EQ(bad, 3u);
}

TEST(Lexicon, TokenizeRoundTripsThroughSeparators) {
  std::mt19937_64 rng(11);
  std::vector<std::string> syms;
  for (const auto& s : inv().segments()) syms.push_back(s.symbol);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> form;
    const int len = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < len; ++k) form.push_back(syms[rng() % syms.size()]);
    std::string raw;
    for (const auto& x : form) raw += x;
    auto tokens = tokenize_form(raw, inv());
    ASSERT_TRUE(tokens);
    // Serialize with separators and parse canonically: same symbol list.
    std::string joined;
    for (const auto& x : *tokens) joined += (joined.empty() ? "" : " ") + x;
    auto reparsed = parse_lexicon("form\n" + joined + "\n", inv());
    EXPECT_EQ(reparsed[0].form, *tokens);
    auto again = tokenize_form(joined, inv());
    EXPECT_EQ(*again, *tokens);
  }
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_vowel_length(F({"t", "a", "a", "t", "a"}), inv()), F({"t", "aa", "t", "a"}));
  EXPECT_EQ(normalize_vowel_length(F({"t", "u", "w", "u"}), inv()), F({"t", "uu"}));
  EXPECT_EQ(normalize_vowel_length(F({"t", "i", "j", "i", "t", "a"}), inv()), F({"t", "ii", "t", "a"}));
  EXPECT_EQ(normalize_vowel_length(F({"t", "a", "t", "a"}), inv()), F({"t", "a", "t", "a"}));
}

TEST(Normalize, UnlikeVowelsTakeFirstQuality) {
  EXPECT_EQ(normalize_vowel_length(F({"t", "a", "u", "t", "a"}), inv()), F({"t", "aa", "t", "a"}));
}

TEST(Normalize, GlideOnlyForMatchingQuality) {
  EXPECT_EQ(normalize_vowel_length(F({"t", "a", "w", "a"}), inv()), F({"t", "a", "w", "a"}));
  EXPECT_EQ(normalize_vowel_length(F({"t", "u", "j", "u"}), inv()), F({"t", "u", "j", "u"}));
}

TEST(Normalize, MissingLongCounterpartIsAnError) {
  EXPECT_THROW(normalize_vowel_length(F({"t", "e", "e"}), inv()), InputError);
  EXPECT_THROW(normalize_vowel_length(F({"t", "e", "a"}), inv()), InputError);
}

TEST(Normalize, GlidesAreConfigurable) {
  NormalizeOptions opts;
  opts.glide_trigraphs = {{"u", "j"}};
  EXPECT_EQ(normalize_vowel_length(F({"t", "u", "j", "u"}), inv(), opts), F({"t", "uu"}));
  EXPECT_EQ(normalize_vowel_length(F({"t", "u", "w", "u"}), inv(), opts), F({"t", "u", "w", "u"}));
}

TEST(Normalize, IsIdempotent) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> pool = {"a", "aa", "i", "ii", "u", "uu", "t", "d", "n", "r", "w", "j"};
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<std::string> form;
    const int len = 1 + static_cast<int>(rng() % 10);
    for (int k = 0; k < len; ++k) form.push_back(pool[rng() % pool.size()]);
    auto once = normalize_vowel_length(form, inv());
    EXPECT_EQ(normalize_vowel_length(once, inv()), once);
  }
}

TEST(Domains, Examples) {
  auto tok = extract_domains(E({"t", "a", "t", "a"}), inv());
  ASSERT_TRUE(tok);
  EXPECT_EQ(tok->vowel.symbol, "a");
  EXPECT_EQ(tok->consonant.symbol, "t");
  EXPECT_FALSE(extract_domains(E({"t", "a", "r", "t", "a"}), inv()));
  EXPECT_FALSE(extract_domains(E({"t", "aa", "t"}), inv()));
}

TEST(Domains, Classification) {
  EXPECT_EQ(classify_domain(F({"t", "n"}), inv()).status, DomainStatus::no_vowel);
  EXPECT_EQ(classify_domain(F({"t", "a"}), inv()).status, DomainStatus::word_final);
  EXPECT_EQ(classify_domain(F({"a", "i", "t", "a"}), inv()).status, DomainStatus::no_consonant);
  EXPECT_EQ(classify_domain(F({"a", "r", "t", "a"}), inv()).status, DomainStatus::cluster);
  EXPECT_EQ(classify_domain(F({"t", "aa", "t"}), inv()).status, DomainStatus::not_intervocalic);
  EXPECT_EQ(classify_domain(F({"a", "n", "a"}), inv()).status, DomainStatus::qualifying);
}

TEST(Distribution, CountsOneTokenPerEntry) {
  auto d = build_distribution({E({"t", "a", "t", "a"}), E({"t", "aa", "t", "a"}), E({"t", "a", "n", "a"})}, inv());
  EXPECT_EQ(d.total(), 3u);
  EXPECT_EQ(d.count({"a", "t"}), 1u);
  EXPECT_EQ(d.count({"aa", "t"}), 1u);
  EXPECT_EQ(d.count({"a", "n"}), 1u);

  auto dup = build_distribution({E({"t", "a", "t", "a"}), E({"t", "a", "t", "a"})}, inv());
  EXPECT_EQ(dup.total(), 2u);
  EXPECT_EQ(dup.count({"a", "t"}), 2u);
}

TEST(Distribution, NormalizesBeforeExtraction) {
  auto d = build_distribution({E({"t", "a", "a", "t", "a"}), E({"t", "u", "w", "u", "t", "a"})}, inv());
  EXPECT_EQ(d.count({"aa", "t"}), 1u);
  EXPECT_EQ(d.count({"uu", "t"}), 1u);
}

TEST(Distribution, VowellessEntriesWarnAndAreSkipped) {
  std::vector<std::string> warnings;
  ScopedWarningHandler h([&](const std::string& m) { warnings.push_back(m); });
  IngestStats stats;
  auto d = build_distribution({E({"t", "a", "t", "a"}), E({"t", "n"})}, inv(), &stats);
  EXPECT_EQ(d.total(), 1u);
  EXPECT_EQ(stats.no_vowel, 1u);
  EXPECT_EQ(stats.qualifying, 1u);
  ASSERT_EQ(warnings.size(), 1u);
}

TEST(Distribution, NoTokensIsAnError) {
  EXPECT_THROW(build_distribution({E({"t", "a"})}, inv()), EmptyDistributionError);
}

TEST(Distribution, ShuffleInvariantAndCountsSum) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> pool = {"a", "aa", "i", "u", "t", "d", "n", "r", "w"};
  std::vector<LexicalEntry> entries;
  for (int k = 0; k < 300; ++k) {
    LexicalEntry e;
    const int len = 2 + static_cast<int>(rng() % 5);
    for (int s = 0; s < len; ++s) e.form.push_back(pool[rng() % pool.size()]);
    entries.push_back(e);
  }
  entries.push_back(E({"t", "a", "t", "a"}));
  const auto base = build_distribution(entries, inv());
  std::uint64_t sum = 0;
  for (const auto& [type, c] : base.counts()) {
    EXPECT_GE(c, 1u);
    sum += c;
  }
  EXPECT_EQ(sum, base.total());
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(entries.begin(), entries.end(), rng);
    EXPECT_EQ(build_distribution(entries, inv()), base);
  }
}
