// phyloload: functional load of phonological contrasts and phylogenetic
// comparative statistics over posterior tree samples.
//
//   phyloload fl       per-language FL_V, FL_C, FL_P from lexicons
//   phyloload signal   Blomberg's K over a tree sample
//   phyloload corr     phylogenetic Pearson correlation over a tree sample
//   phyloload simulate Brownian-motion traits on a tree
//   phyloload report   HTML/SVG report from prior outputs
//
// Exit codes: 0 success, 1 statistical degeneracy, 2 input/IO error.

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "phyloload/pipeline.hpp"

namespace {

namespace pl = phyloload::pipeline;

// Values given on the command line, keyed by config-file key. Applied after
// the config file so flags win.
struct FlagValues {
  std::map<std::string, std::string> values;
  std::string config;
};

void add_value(CLI::App* sub, FlagValues& fv, const std::string& flag, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&fv, key](const std::string& v) { fv.values[key] = v; }, help);
}

void add_switch(CLI::App* sub, FlagValues& fv, const std::string& flag, const std::string& key,
                const std::string& value, const std::string& help) {
  sub->add_flag_function(
      flag, [&fv, key, value](std::int64_t) { fv.values[key] = value; }, help);
}

void add_config(CLI::App* sub, FlagValues& fv) {
  sub->add_option("--config", fv.config, "flat key = value config file (flags override it)");
  add_value(sub, fv, "--out", "out", "output directory (default: out)");
}

void add_stat_flags(CLI::App* sub, FlagValues& fv) {
  add_value(sub, fv, "--fl-table", "fl_table", "trait table CSV (default: <out>/fl_table.csv)");
  add_value(sub, fv, "--trees", "trees", "tree sample (.trees/.nwk, one Newick per line, or Nexus)");
  add_value(sub, fv, "--seed", "seed", "64-bit random seed");
  add_switch(sub, fv, "--jitter", "jitter", "true", "regularize singular covariance matrices");
  add_switch(sub, fv, "--no-phylo", "no_phylo", "true", "use C = identity (no trees)");
  add_value(sub, fv, "--threads", "threads", "worker threads (default: PHYLOLOAD_THREADS or all cores)");
}

pl::AnalysisConfig resolve(const FlagValues& fv) {
  pl::AnalysisConfig cfg;
  if (!fv.config.empty()) pl::apply_config_text(cfg, pl::read_file(fv.config));
  for (const auto& [key, value] : fv.values) pl::set_option(cfg, key, value);
  return cfg;
}

void print_summary(const char* what, const phyloload::SampleSummary& s) {
  std::cout << what << ": mean " << phyloload::text::format_fixed(s.mean, 4) << ", sd "
            << phyloload::text::format_fixed(s.sd, 4) << ", 95% [" << phyloload::text::format_fixed(s.lo95, 4) << ", "
            << phyloload::text::format_fixed(s.hi95, 4) << "] over " << s.values.size() << " tree(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phyloload: functional load and phylogenetic comparative statistics"};
  app.require_subcommand(1);
  FlagValues fv;

  auto* fl = app.add_subcommand("fl", "compute the per-language FL table from lexicons");
  add_config(fl, fv);
  add_value(fl, fv, "--lexicons", "lexicons", "directory of <language>.tsv lexicons");
  add_value(fl, fv, "--inventories", "inventories", "directory of <language>.tsv inventories");
  add_switch(fl, fv, "--tokenize", "tokenize", "true", "segment undelimited forms by longest match");
  add_value(fl, fv, "--min-n", "min_n", "minimum domain tokens per language (default 200)");
  add_switch(fl, fv, "--no-zero-flv-filter", "drop_zero_flv", "false", "keep languages with FL_V = 0");

  auto* signal = app.add_subcommand("signal", "Blomberg's K over a tree sample");
  add_config(signal, fv);
  add_stat_flags(signal, fv);
  add_value(signal, fv, "--trait", "trait", "trait column (fl_v, fl_c or fl_p)");
  add_value(signal, fv, "--perm", "perm", "permutations per tree for the K test (0 = off, else >= 99)");

  auto* corr = app.add_subcommand("corr", "phylogenetic Pearson correlation over a tree sample");
  add_config(corr, fv);
  add_stat_flags(corr, fv);
  add_value(corr, fv, "--pair", "pair", "trait columns, e.g. fl_v,fl_c");

  auto* simulate = app.add_subcommand("simulate", "simulate Brownian-motion traits on the first tree of a file");
  add_config(simulate, fv);
  add_value(simulate, fv, "--trees", "trees", "tree file");
  add_value(simulate, fv, "--seed", "seed", "64-bit random seed");
  add_value(simulate, fv, "--rate", "rate", "rate matrix: 'v' or 'v11,v12,v22'");
  add_value(simulate, fv, "--root", "root", "root state(s), comma-separated");
  add_value(simulate, fv, "--replicates", "replicates", "number of replicate files");
  add_value(simulate, fv, "--columns", "columns", "trait column names, comma-separated");

  auto* report = app.add_subcommand("report", "write report.html and SVG figures from prior outputs");
  add_config(report, fv);
  add_value(report, fv, "--fl-table", "fl_table", "FL table CSV (default: <out>/fl_table.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pl::kInputError;
  }

  try {
    const pl::AnalysisConfig cfg = resolve(fv);
    if (fl->parsed()) {
      auto run = pl::run_fl(cfg);
      std::cout << run.table.rows.size() << " language(s) written to " << (cfg.out / "fl_table.csv").string()
                << ", " << run.table.excluded.size() << " excluded (see fl_exclusions.csv)\n";
    } else if (signal->parsed()) {
      auto res = pl::run_signal(cfg);
      print_summary(("K(" + cfg.trait + ")").c_str(), res.k);
      if (res.p_perm) std::cout << "permutation p: " << phyloload::text::format_fixed(*res.p_perm, 4) << '\n';
    } else if (corr->parsed()) {
      auto res = pl::run_corr(cfg);
      print_summary(("r(" + cfg.pair.first + ", " + cfg.pair.second + ")").c_str(), res.r);
      std::cout << "p: " << phyloload::text::format_fixed(res.p, 4) << '\n';
    } else if (simulate->parsed()) {
      auto files = pl::run_simulate(cfg);
      std::cout << files.size() << " replicate(s) written to " << cfg.out.string() << '\n';
    } else if (report->parsed()) {
      auto files = pl::run_report(cfg);
      std::cout << "wrote " << files.back().string() << " and " << files.size() - 1 << " figure(s)\n";
    }
  } catch (const phyloload::DegenerateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kDegenerate;
  } catch (const phyloload::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kInputError;
  }
  return pl::kSuccess;
}
