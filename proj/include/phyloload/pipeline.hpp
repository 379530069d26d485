#pragma once

// Analysis commands behind the `phyloload` CLI. Each command reads its inputs
// from an AnalysisConfig, writes its outputs atomically into the output
// directory and is deterministic given (inputs, config, seed).

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phyloload/errors.hpp"
#include "phyloload/funcload.hpp"
#include "phyloload/phylostats.hpp"
#include "phyloload/phylotree.hpp"
#include "phyloload/segmental.hpp"
#include "phyloload/svg.hpp"
#include "phyloload/text.hpp"

namespace phyloload::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int { kSuccess = 0, kDegenerate = 1, kInputError = 2 };

struct AnalysisConfig {
  fs::path lexicon_dir;
  fs::path inventory_dir;
  fs::path trees;
  fs::path fl_table;
  fs::path out = "out";
  std::uint64_t min_n = 200;
  bool drop_zero_flv = true;
  bool tokenize = false;
  std::uint64_t seed = 1;
  bool jitter = false;
  bool no_phylo = false;
  int n_perm = 0;
  unsigned threads = 0;
  std::string trait = "fl_v";
  std::pair<std::string, std::string> pair = {"fl_v", "fl_c"};
  // simulate
  std::string rate = "1";
  std::string root = "0";
  std::uint32_t replicates = 1;
  std::string columns;  // empty: fl_v for one trait, fl_v,fl_c for two
};

// ---------------------------------------------------------------------------
// Config file: one `key = value` per line, '#' starts a comment.

inline std::pair<std::string, std::string> parse_pair(std::string_view s) {
  auto parts = text::split(s, ',');
  if (parts.size() != 2 || text::trim(parts[0]).empty() || text::trim(parts[1]).empty())
    throw InputError("expected a pair 'a,b', got '" + std::string(s) + "'");
  return {std::string(text::trim(parts[0])), std::string(text::trim(parts[1]))};
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  const std::string l = text::to_lower(text::trim(v));
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw InputError("config: '" + std::string(key) + "' expects a boolean, got '" + std::string(v) + "'");
}

inline std::uint64_t parse_count(std::string_view key, std::string_view v, std::int64_t min) {
  auto n = text::parse_int(v);
  if (!n || *n < min)
    throw InputError("config: '" + std::string(key) + "' expects an integer >= " + std::to_string(min));
  return static_cast<std::uint64_t>(*n);
}

// Applies one setting; shared by the config file and the CLI.
inline void set_option(AnalysisConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k(text::trim(key));
  const std::string_view v = text::trim(value);
  if (k == "lexicons") cfg.lexicon_dir = std::string(v);
  else if (k == "inventories") cfg.inventory_dir = std::string(v);
  else if (k == "trees") cfg.trees = std::string(v);
  else if (k == "fl_table") cfg.fl_table = std::string(v);
  else if (k == "out") cfg.out = std::string(v);
  else if (k == "min_n") cfg.min_n = parse_count(k, v, 1);
  else if (k == "drop_zero_flv") cfg.drop_zero_flv = parse_bool(k, v);
  else if (k == "tokenize") cfg.tokenize = parse_bool(k, v);
  else if (k == "seed") cfg.seed = parse_count(k, v, 0);
  else if (k == "jitter") cfg.jitter = parse_bool(k, v);
  else if (k == "no_phylo") cfg.no_phylo = parse_bool(k, v);
  else if (k == "perm") cfg.n_perm = static_cast<int>(parse_count(k, v, 0));
  else if (k == "threads") cfg.threads = static_cast<unsigned>(parse_count(k, v, 0));
  else if (k == "trait") cfg.trait = std::string(v);
  else if (k == "pair") cfg.pair = parse_pair(v);
  else if (k == "rate") cfg.rate = std::string(v);
  else if (k == "root") cfg.root = std::string(v);
  else if (k == "replicates") cfg.replicates = static_cast<std::uint32_t>(parse_count(k, v, 1));
  else if (k == "columns") cfg.columns = std::string(v);
  else throw InputError("config: unknown key '" + k + "'");
}

inline void apply_config_text(AnalysisConfig& cfg, std::string_view contents) {
  auto rows = text::lines(contents);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string_view line = rows[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (text::trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InputError("config line " + std::to_string(i + 1) + ": expected 'key = value'");
    try {
      set_option(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const InputError& e) {
      throw InputError("config line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary and renames it into place.
inline void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw InputError(std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Trait tables: CSV whose first column names the taxon and whose remaining
// columns are numeric traits. The FL table is one such table.

struct TraitTable {
  std::vector<std::string> columns;  // excluding the taxon column
  std::vector<std::string> taxa;
  std::vector<std::vector<std::string>> cells;

  TraitVector column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw InputError("trait table has no column '" + name + "'");
    const auto c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> values;
    for (std::size_t r = 0; r < taxa.size(); ++r) {
      auto v = text::parse_double(cells[r][c]);
      if (!v) throw InputError("trait table: non-numeric '" + name + "' for '" + taxa[r] + "'");
      values.push_back(*v);
    }
    return {taxa, std::move(values)};
  }
};

inline TraitTable parse_trait_table(std::string_view contents) {
  auto rows = text::lines(contents);
  if (rows.empty()) throw InputError("trait table: empty file");
  TraitTable t;
  auto header = text::parse_csv_line(rows[0]);
  if (header.size() < 2) throw InputError("trait table: need a taxon column and at least one trait");
  for (std::size_t c = 1; c < header.size(); ++c) t.columns.push_back(text::to_lower(text::trim(header[c])));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    auto cells = text::parse_csv_line(rows[i]);
    if (cells.size() != header.size())
      throw InputError("trait table line " + std::to_string(i + 1) + ": expected " +
                       std::to_string(header.size()) + " fields");
    t.taxa.emplace_back(text::trim(cells[0]));
    t.cells.emplace_back(cells.begin() + 1, cells.end());
  }
  if (t.taxa.empty()) throw InputError("trait table: no rows");
  return t;
}

// ---------------------------------------------------------------------------
// fl

struct FLRun {
  FLTable table;
  std::map<std::string, IngestStats> ingest;
};

inline FLRun run_fl(const AnalysisConfig& cfg) {
  if (cfg.lexicon_dir.empty() || !fs::is_directory(cfg.lexicon_dir))
    throw InputError("lexicon directory not found: '" + cfg.lexicon_dir.string() + "'");
  if (cfg.inventory_dir.empty() || !fs::is_directory(cfg.inventory_dir))
    throw InputError("inventory directory not found: '" + cfg.inventory_dir.string() + "'");

  std::vector<fs::path> lexicons;
  for (const auto& e : fs::directory_iterator(cfg.lexicon_dir))
    if (e.is_regular_file() && e.path().extension() == ".tsv") lexicons.push_back(e.path());
  std::sort(lexicons.begin(), lexicons.end());
  if (lexicons.empty()) throw InputError("no .tsv lexicons in '" + cfg.lexicon_dir.string() + "'");

  FLRun run;
  std::map<std::string, LanguageData> languages;
  const auto mode = cfg.tokenize ? LexiconMode::tokenize : LexiconMode::canonical;
  for (const auto& lex : lexicons) {
    const std::string language = lex.stem().string();
    const fs::path inv_path = cfg.inventory_dir / lex.filename();
    if (!fs::is_regular_file(inv_path)) throw InputError("missing inventory file: '" + inv_path.string() + "'");
    try {
      LanguageData data;
      data.inventory = parse_inventory(read_file(inv_path));
      data.entries = parse_lexicon(read_file(lex), data.inventory, mode);
      IngestStats stats;
      try {
        build_distribution(data.entries, data.inventory, &stats);
      } catch (const EmptyDistributionError&) {
      }
      run.ingest[language] = stats;
      languages.emplace(language, std::move(data));
    } catch (const InputError& e) {
      throw InputError(language + ": " + e.what());
    }
  }

  FLTableOptions opts;
  opts.min_n = cfg.min_n;
  opts.drop_zero_flv = cfg.drop_zero_flv;
  run.table = compute_fl_table(languages, opts);

  write_file_atomic(cfg.out / "fl_table.csv", write_fl_csv(run.table.rows));
  std::string excl = "language,n,fl_v,reason\n";
  for (const auto& x : run.table.excluded)
    excl += text::csv_field(x.language) + ',' + std::to_string(x.n) + ',' + text::format_fixed(x.fl_v, 6) + ',' +
            text::csv_field(x.reason) + '\n';
  write_file_atomic(cfg.out / "fl_exclusions.csv", excl);
  std::string ingest = "language,entries,qualifying,no_vowel,no_domain\n";
  for (const auto& [lang, s] : run.ingest)
    ingest += text::csv_field(lang) + ',' + std::to_string(s.entries) + ',' + std::to_string(s.qualifying) + ',' +
              std::to_string(s.no_vowel) + ',' + std::to_string(s.no_domain) + '\n';
  write_file_atomic(cfg.out / "fl_ingest.csv", ingest);
  return run;
}

// ---------------------------------------------------------------------------
// signal / corr

namespace detail {

inline fs::path trait_table_path(const AnalysisConfig& cfg) {
  if (!cfg.fl_table.empty()) return cfg.fl_table;
  return cfg.out / "fl_table.csv";
}

// Loads the tree sample and checks every tree carries every data taxon. On
// failure the three-column report is written before the error propagates.
inline TreeSample load_reconciled_trees(const AnalysisConfig& cfg, const std::vector<std::string>& taxa) {
  require_file(cfg.trees, "tree file");
  TreeSample sample = parse_tree_sample(read_file(cfg.trees));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    auto rec = reconcile_taxa(taxa, sample[i].tip_labels());
    if (i == 0 || !rec.complete()) write_file_atomic(cfg.out / "reconciliation.csv", rec.report_csv());
    if (!rec.complete()) {
      std::string msg = "tree " + std::to_string(i) + " lacks " + std::to_string(rec.data_only.size()) +
                        " data taxa (see reconciliation.csv):";
      for (const auto& t : rec.data_only) msg += " '" + t + "'";
      throw InputError(msg);
    }
  }
  return sample;
}

inline AggregateOptions aggregate_options(const AnalysisConfig& cfg) {
  AggregateOptions o;
  o.gls.jitter = cfg.jitter;
  o.seed = cfg.seed;
  o.n_perm = cfg.n_perm;
  o.threads = cfg.threads;
  return o;
}

inline json summary_json(const SampleSummary& s, std::optional<double> p, std::size_t n_taxa,
                         const AnalysisConfig& cfg) {
  json j;
  j["mean"] = s.mean;
  j["sd"] = s.sd;
  j["lo95"] = s.lo95;
  j["hi95"] = s.hi95;
  j["p"] = p ? json(*p) : json(nullptr);
  j["n_taxa"] = n_taxa;
  j["n_trees"] = s.values.size();
  j["seed"] = cfg.seed;
  j["phylogenetic"] = !cfg.no_phylo;
  return j;
}

inline std::string per_tree_csv(const char* column, const std::vector<double>& values) {
  std::string out = std::string("tree_index,") + column + '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out += std::to_string(i) + ',' + text::format_double(values[i]) + '\n';
  return out;
}

}  // namespace detail

inline std::string signal_stem(const std::string& trait) { return "signal_" + trait; }
inline std::string corr_stem(const std::pair<std::string, std::string>& p) {
  return "corr_" + p.first + "_" + p.second;
}

inline SignalResult run_signal(const AnalysisConfig& cfg) {
  const fs::path table_path = detail::trait_table_path(cfg);
  require_file(table_path, "trait table");
  const TraitVector x = parse_trait_table(read_file(table_path)).column(cfg.trait);
  const auto opts = detail::aggregate_options(cfg);
  SignalResult res;
  if (cfg.no_phylo) {
    const GlsModel model(PhyloCovariance::identity(x.taxa()), opts.gls);
    res.k = summarize({blomberg_k(x, model)});
    if (cfg.n_perm > 0) res.p_perm = k_permutation_test(x, model, cfg.n_perm, cfg.seed);
  } else {
    res = aggregate_signal(detail::load_reconciled_trees(cfg, x.taxa()), x, opts);
  }
  json j = detail::summary_json(res.k, res.p_perm, x.size(), cfg);
  j["statistic"] = "blomberg_k";
  j["trait"] = cfg.trait;
  const std::string stem = signal_stem(cfg.trait);
  write_file_atomic(cfg.out / (stem + "_trees.csv"), detail::per_tree_csv("k", res.k.values));
  write_file_atomic(cfg.out / (stem + "_summary.json"), j.dump(2) + "\n");
  return res;
}

inline CorrResult run_corr(const AnalysisConfig& cfg) {
  const fs::path table_path = detail::trait_table_path(cfg);
  require_file(table_path, "trait table");
  const TraitTable table = parse_trait_table(read_file(table_path));
  const TraitVector x = table.column(cfg.pair.first);
  const TraitVector y = table.column(cfg.pair.second);
  const auto opts = detail::aggregate_options(cfg);
  CorrResult res;
  if (cfg.no_phylo) {
    const GlsModel model(PhyloCovariance::identity(x.taxa()), opts.gls);
    res.r = summarize({phylo_correlation(x, y, model)});
    res.p = correlation_p(res.r.mean, x.size());
  } else {
    res = aggregate_correlation(detail::load_reconciled_trees(cfg, x.taxa()), x, y, opts);
  }
  json j = detail::summary_json(res.r, res.p, x.size(), cfg);
  j["statistic"] = "phylo_pearson_r";
  j["pair"] = {cfg.pair.first, cfg.pair.second};
  const std::string stem = corr_stem(cfg.pair);
  write_file_atomic(cfg.out / (stem + "_trees.csv"), detail::per_tree_csv("r", res.r.values));
  write_file_atomic(cfg.out / (stem + "_summary.json"), j.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------------------
// simulate

// "v" gives a 1x1 rate matrix; "v11,v12,v22" a symmetric 2x2.
inline Eigen::MatrixXd parse_rate_matrix(std::string_view s) {
  std::vector<double> v;
  for (auto part : text::split(s, ',')) {
    auto d = text::parse_double(part);
    if (!d) throw InputError("rate matrix: malformed number '" + std::string(part) + "'");
    v.push_back(*d);
  }
  if (v.size() == 1) return Eigen::MatrixXd::Constant(1, 1, v[0]);
  if (v.size() == 3) {
    Eigen::MatrixXd m(2, 2);
    m << v[0], v[1], v[1], v[2];
    return m;
  }
  throw InputError("rate matrix: expected 1 or 3 comma-separated values");
}

inline Eigen::VectorXd parse_vector(std::string_view s) {
  std::vector<double> v;
  for (auto part : text::split(s, ',')) {
    auto d = text::parse_double(part);
    if (!d) throw InputError("malformed number '" + std::string(part) + "'");
    v.push_back(*d);
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::string replicate_file_name(std::uint32_t rep) {
  std::string s = std::to_string(rep);
  return "sim_" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s + ".csv";
}

// Writes one trait CSV per replicate plus simulate_manifest.json. Returns
// the replicate file paths.
inline std::vector<fs::path> run_simulate(const AnalysisConfig& cfg) {
  require_file(cfg.trees, "tree file");
  const Phylogeny tree = parse_tree_sample(read_file(cfg.trees)).front();
  const Eigen::MatrixXd rate = parse_rate_matrix(cfg.rate);
  Eigen::VectorXd root = parse_vector(cfg.root);
  if (root.size() == 1 && rate.rows() == 2) root = Eigen::VectorXd::Constant(2, root[0]);
  const BmSimulator sim(tree, rate, root);

  std::vector<std::string> names;
  if (cfg.columns.empty()) {
    names = rate.rows() == 1 ? std::vector<std::string>{"fl_v"} : std::vector<std::string>{"fl_v", "fl_c"};
  } else {
    for (auto c : text::split(cfg.columns, ',')) names.emplace_back(text::trim(c));
  }
  if (names.size() != sim.num_traits())
    throw InputError("columns: expected " + std::to_string(sim.num_traits()) + " names");

  std::vector<fs::path> files;
  for (std::uint32_t rep = 0; rep < cfg.replicates; ++rep) {
    CounterRng rng(cfg.seed, rep, kSimulationStream);
    const auto traits = sim.draw(rng);
    std::string out = "language";
    for (const auto& n : names) out += ',' + text::csv_field(n);
    out += '\n';
    for (std::size_t i = 0; i < sim.taxa().size(); ++i) {
      out += text::csv_field(sim.taxa()[i]);
      for (const auto& t : traits) out += ',' + text::format_double(t.values()[i]);
      out += '\n';
    }
    const fs::path path = cfg.out / replicate_file_name(rep);
    write_file_atomic(path, out);
    files.push_back(path);
  }
  json m;
  m["seed"] = cfg.seed;
  m["replicates"] = cfg.replicates;
  m["rate"] = cfg.rate;
  m["root"] = cfg.root;
  m["columns"] = names;
  m["n_taxa"] = sim.taxa().size();
  m["tree_file"] = cfg.trees.filename().string();
  json fl = json::array();
  for (const auto& f : files) fl.push_back(f.filename().string());
  m["files"] = fl;
  write_file_atomic(cfg.out / "simulate_manifest.json", m.dump(2) + "\n");
  return files;
}

// ---------------------------------------------------------------------------
// report

namespace detail {

inline std::vector<double> read_per_tree_column(const fs::path& path) {
  const std::string contents = read_file(path);
  auto rows = text::lines(contents);
  std::vector<double> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto cells = text::split(rows[i], ',');
    if (cells.size() != 2) throw InputError("malformed per-tree CSV '" + path.string() + "'");
    auto v = text::parse_double(cells[1]);
    if (!v) throw InputError("malformed per-tree CSV '" + path.string() + "'");
    out.push_back(*v);
  }
  return out;
}

inline std::string html_escape(const std::string& s) { return svg::detail::escape(s); }

inline std::string fmt3(const json& v) { return v.is_number() ? text::format_fixed(v.get<double>(), 3) : "n/a"; }

}  // namespace detail

// Builds report.html (and the SVGs it embeds) from outputs already present
// in the output directory. Returns the files written.
inline std::vector<fs::path> run_report(const AnalysisConfig& cfg) {
  if (!fs::is_directory(cfg.out)) throw InputError("output directory not found: '" + cfg.out.string() + "'");
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(cfg.out)) {
    const std::string name = e.path().filename().string();
    if (name.ends_with("_summary.json") && (name.starts_with("signal_") || name.starts_with("corr_")))
      summaries.push_back(e.path());
  }
  std::sort(summaries.begin(), summaries.end());
  const fs::path table_path = detail::trait_table_path(cfg);
  const bool have_table = fs::is_regular_file(table_path);
  if (summaries.empty() && !have_table)
    throw InputError("nothing to report in '" + cfg.out.string() +
                     "': expected fl_table.csv or signal_*/corr_* outputs (run fl, signal or corr first)");

  std::vector<std::string> missing;
  for (const auto& s : summaries) {
    std::string trees = s.filename().string();
    trees.replace(trees.size() - std::string("_summary.json").size(), std::string::npos, "_trees.csv");
    if (!fs::is_regular_file(cfg.out / trees)) missing.push_back((cfg.out / trees).string());
  }
  if (!missing.empty()) {
    std::string msg = "report inputs missing:";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw InputError(msg);
  }

  std::vector<fs::path> written;
  std::string signal_rows, corr_rows, figures;
  auto add_svg = [&](const std::string& file, const std::string& content) {
    write_file_atomic(cfg.out / file, content);
    written.push_back(cfg.out / file);
    figures += "<figure>" + content + "<figcaption>" + detail::html_escape(file) + "</figcaption></figure>\n";
  };

  if (have_table) {
    const TraitTable table = parse_trait_table(read_file(table_path));
    auto has = [&](const char* c) { return std::find(table.columns.begin(), table.columns.end(), c) != table.columns.end(); };
    if (has("fl_v")) {
      const auto v = table.column("fl_v").values();
      for (const char* other : {"fl_c", "fl_p"}) {
        if (!has(other)) continue;
        const std::string o(other);
        add_svg("report_scatter_fl_v_" + o + ".svg",
                svg::scatter(v, table.column(o).values(), "fl_v vs " + o, "fl_v", o));
      }
    }
  }

  for (const auto& s : summaries) {
    const json j = json::parse(read_file(s));
    std::string stem = s.filename().string();
    stem.resize(stem.size() - std::string("_summary.json").size());
    const auto values = detail::read_per_tree_column(cfg.out / (stem + "_trees.csv"));
    if (stem.starts_with("signal_")) {
      const std::string trait = j.value("trait", stem.substr(7));
      add_svg("report_" + stem + "_hist.svg", svg::histogram(values, "Blomberg's K: " + trait, "K"));
      signal_rows += "<tr><td>" + detail::html_escape(trait) + "</td><td>" + detail::fmt3(j["mean"]) + "</td><td>" +
                     detail::fmt3(j["sd"]) + "</td><td>" + std::to_string(j.value("n_trees", 0)) + "</td></tr>\n";
    } else {
      const std::string label = stem.substr(5);
      add_svg("report_" + stem + "_hist.svg", svg::histogram(values, "Phylogenetic r: " + label, "r"));
      corr_rows += "<tr><td>" + detail::html_escape(label) + "</td><td>" + detail::fmt3(j["mean"]) + "</td><td>[" +
                   detail::fmt3(j["lo95"]) + ", " + detail::fmt3(j["hi95"]) + "]</td><td>" + detail::fmt3(j["p"]) +
                   "</td></tr>\n";
    }
  }

  std::string html =
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>phyloload report</title>\n"
      "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin-bottom:1.5em}"
      "td,th{border:1px solid #999;padding:4px 10px}figure{display:inline-block;margin:8px}</style>"
      "</head><body>\n<h1>phyloload report</h1>\n";
  if (!signal_rows.empty())
    html += "<h2>Phylogenetic signal</h2>\n<table><tr><th>Measure</th><th>mean K</th><th>std.dev of K</th>"
            "<th>trees</th></tr>\n" + signal_rows + "</table>\n";
  if (!corr_rows.empty())
    html += "<h2>Phylogenetic correlation</h2>\n<table><tr><th>Measures</th><th>r</th><th>95% interval</th>"
            "<th>p</th></tr>\n" + corr_rows + "</table>\n";
  html += "<h2>Figures</h2>\n" + figures + "</body></html>\n";
  write_file_atomic(cfg.out / "report.html", html);
  written.push_back(cfg.out / "report.html");
  return written;
}

}  // namespace phyloload::pipeline
