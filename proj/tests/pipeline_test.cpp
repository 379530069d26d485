#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "phyloload/pipeline.hpp"
#include "support/oracles.hpp"

using namespace phyloload;
namespace fs = std::filesystem;
namespace pl = phyloload::pipeline;

namespace {

const fs::path kData = PHYLOLOAD_DATA_DIR;
const fs::path kFixture = kData / "fl_table_90.csv";

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("phyloload_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args, const TempDir& scratch) {
  std::string cmd = quote(PHYLOLOAD_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::string> fixture_languages() {
  std::vector<std::string> out;
  for (const auto& r : parse_fl_csv(slurp(kFixture))) out.push_back(r.language);
  return out;
}

// Random ultrametric trees over the 90 fixture languages plus 22 extra tips,
// with underscores in place of spaces as tree files often have.
fs::path write_fixture_trees(const TempDir& dir, int n_trees, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto labels = fixture_languages();
  for (auto& l : labels) std::replace(l.begin(), l.end(), ' ', '_');
  for (int i = 0; i < 22; ++i) labels.push_back("Extra_" + std::to_string(i));
  std::string text;
  for (int i = 0; i < n_trees; ++i) text += oracle::random_newick(rng, labels, {true, false}) + "\n";
  const fs::path p = dir / "fixture.trees";
  spit(p, text);
  return p;
}

pl::AnalysisConfig toy_config(const TempDir& dir) {
  pl::AnalysisConfig cfg;
  cfg.lexicon_dir = kData / "toy" / "lexicons";
  cfg.inventory_dir = kData / "toy" / "inventories";
  cfg.trees = kData / "toy" / "toy.trees";
  cfg.out = dir.path();
  cfg.min_n = 1;
  return cfg;
}

}  // namespace

TEST(Config, FileAndOptions) {
  pl::AnalysisConfig cfg;
  pl::apply_config_text(cfg, "# comment\nmin_n = 50\nseed=9  # trailing\npair = fl_v, fl_p\njitter = yes\n\n");
  EXPECT_EQ(cfg.min_n, 50u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.pair, (std::pair<std::string, std::string>{"fl_v", "fl_p"}));
  EXPECT_TRUE(cfg.jitter);
  EXPECT_THROW(pl::apply_config_text(cfg, "bogus = 1\n"), InputError);
  EXPECT_THROW(pl::apply_config_text(cfg, "min_n = 0\n"), InputError);
  EXPECT_THROW(pl::apply_config_text(cfg, "no equals sign\n"), InputError);
  try {
    pl::apply_config_text(cfg, "seed = 1\nmin_n = x\n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(TraitTableParsing, GenericColumns) {
  auto t = pl::parse_trait_table("language,FL_V,x\n\"A, B\",1,2\nC,3,4\n");
  EXPECT_EQ(t.columns, (std::vector<std::string>{"fl_v", "x"}));
  EXPECT_EQ(t.column("x").values(), (std::vector<double>{2, 4}));
  EXPECT_EQ(t.taxa[0], "A, B");
  EXPECT_THROW(t.column("fl_c"), InputError);
  EXPECT_THROW(pl::parse_trait_table("language,x\nA,1,2\n"), InputError);
}

TEST(Fl, ToyCorpusGivesThreeRows) {
  TempDir dir;
  std::vector<std::string> warnings;
  ScopedWarningHandler h([&](const std::string& m) { warnings.push_back(m); });
  auto run = pl::run_fl(toy_config(dir));
  EXPECT_EQ(run.table.rows.size(), 3u);
  auto rows = parse_fl_csv(slurp(dir / "fl_table.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].language, "Alpha");
  for (const auto& r : rows) {
    EXPECT_GE(r.fl_v, 0.0);
    EXPECT_GE(r.fl_c, 0.0);
    EXPECT_GE(r.fl_p, 0.0);
    EXPECT_GE(r.n, 1u);
  }
  EXPECT_EQ(slurp(dir / "fl_exclusions.csv"), "language,n,fl_v,reason\n");
  EXPECT_FALSE(warnings.empty());  // each toy lexicon has a vowelless entry
}

TEST(Fl, ExclusionsPartitionLanguages) {
  TempDir dir;
  ScopedWarningHandler quiet([](const std::string&) {});
  auto cfg = toy_config(dir);
  auto first = pl::run_fl(cfg);
  const std::uint64_t cut = first.table.rows[1].n;  // exclude languages below Beta's N
  cfg.min_n = cut;
  auto run = pl::run_fl(cfg);
  std::set<std::string> seen;
  for (const auto& r : run.table.rows) {
    EXPECT_GE(r.n, cut);
    EXPECT_TRUE(seen.insert(r.language).second);
  }
  for (const auto& x : run.table.excluded) {
    EXPECT_LT(x.n, cut);
    EXPECT_TRUE(seen.insert(x.language).second);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"Alpha", "Beta", "Gamma"}));

  cfg.min_n = 100000;
  auto none = pl::run_fl(cfg);
  EXPECT_TRUE(none.table.rows.empty());
  const auto excl = slurp(dir / "fl_exclusions.csv");
  EXPECT_NE(excl.find("Alpha"), std::string::npos);
  EXPECT_NE(excl.find("fewer than 100000 domain tokens"), std::string::npos);
  EXPECT_EQ(slurp(dir / "fl_table.csv"), "language,fl_v,fl_c,fl_p,n\n");
}

TEST(FlCli, MissingInventoryExitsTwo) {
  TempDir dir;
  fs::create_directories(dir / "lex");
  fs::create_directories(dir / "inv");
  fs::copy_file(kData / "toy" / "lexicons" / "Alpha.tsv", dir / "lex" / "Alpha.tsv");
  fs::copy_file(kData / "toy" / "lexicons" / "Beta.tsv", dir / "lex" / "Beta.tsv");
  fs::copy_file(kData / "toy" / "inventories" / "Alpha.tsv", dir / "inv" / "Alpha.tsv");
  auto r = cli({"fl", "--lexicons", (dir / "lex").string(), "--inventories", (dir / "inv").string(), "--out",
                (dir / "out").string(), "--min-n", "1"},
               dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find((dir / "inv" / "Beta.tsv").string()), std::string::npos) << r.err;
}

TEST(FlCli, FlagsOverrideConfigFile) {
  TempDir dir;
  spit(dir / "run.conf", "lexicons = " + (kData / "toy" / "lexicons").string() + "\ninventories = " +
                             (kData / "toy" / "inventories").string() + "\nmin_n = 100000\nout = " +
                             (dir / "out").string() + "\n");
  auto r = cli({"fl", "--config", (dir / "run.conf").string()}, dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_fl_csv(slurp(dir / "out" / "fl_table.csv")).size(), 0u);
  r = cli({"fl", "--config", (dir / "run.conf").string(), "--min-n", "1"}, dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_fl_csv(slurp(dir / "out" / "fl_table.csv")).size(), 3u);
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(cli({}, dir).code, 2);
  EXPECT_EQ(cli({"signal", "--bogus"}, dir).code, 2);
  EXPECT_EQ(cli({"signal", "--fl-table", (dir / "nope.csv").string(), "--trees", "x"}, dir).code, 2);
  EXPECT_EQ(cli({"--help"}, dir).code, 0);
}

TEST(SignalCli, FixtureWithHundredTrees) {
  TempDir dir;
  const auto trees = write_fixture_trees(dir, 100, 1);
  auto r = cli({"signal", "--fl-table", kFixture.string(), "--trees", trees.string(), "--trait", "fl_v", "--seed",
                "3", "--out", (dir / "out").string()},
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = pl::json::parse(slurp(dir / "out" / "signal_fl_v_summary.json"));
  EXPECT_EQ(j["n_taxa"], 90);
  EXPECT_EQ(j["n_trees"], 100);
  EXPECT_EQ(j["seed"], 3);
  for (const char* key : {"mean", "sd", "lo95", "hi95", "p"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_LE(j["lo95"].get<double>(), j["mean"].get<double>());
  EXPECT_GE(j["hi95"].get<double>(), j["mean"].get<double>());
  const auto per_tree = slurp(dir / "out" / "signal_fl_v_trees.csv");
  EXPECT_EQ(per_tree.substr(0, 12), "tree_index,k");
  EXPECT_EQ(std::count(per_tree.begin(), per_tree.end(), '\n'), 101);
  EXPECT_TRUE(fs::exists(dir / "out" / "reconciliation.csv"));
}

TEST(SignalCli, SingleTreeHasZeroSd) {
  TempDir dir;
  const auto trees = write_fixture_trees(dir, 1, 2);
  auto r = cli({"signal", "--fl-table", kFixture.string(), "--trees", trees.string(), "--trait", "fl_c", "--out",
                dir.path().string()},
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = pl::json::parse(slurp(dir / "signal_fl_c_summary.json"));
  EXPECT_EQ(j["sd"], 0.0);
  EXPECT_EQ(j["n_trees"], 1);
}

TEST(SignalCli, ConstantTraitExitsOne) {
  TempDir dir;
  spit(dir / "t.csv", "language,fl_v,fl_c,fl_p,n\nAlpha,0.1,1,1,300\nBeta,0.1,2,1,300\nGamma,0.1,3,1,300\n");
  auto r = cli({"signal", "--fl-table", (dir / "t.csv").string(), "--trees", (kData / "toy" / "toy.trees").string(),
                "--out", dir.path().string()},
               dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("degenerate trait"), std::string::npos) << r.err;
}

TEST(SignalCli, MissingTaxaWritesReconciliationAndExitsTwo) {
  TempDir dir;
  spit(dir / "t.csv", "language,fl_v,fl_c,fl_p,n\nAlpha,0.1,1,1,300\nBeta,0.2,2,1,300\nDelta,0.3,3,1,300\n");
  auto r = cli({"signal", "--fl-table", (dir / "t.csv").string(), "--trees", (kData / "toy" / "toy.trees").string(),
                "--out", dir.path().string()},
               dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Delta"), std::string::npos);
  EXPECT_EQ(slurp(dir / "reconciliation.csv"), "in_data_only,in_trees_only,matched\nDelta,Gamma,Alpha\n,,Beta\n");
}

TEST(SignalCli, JitterPolicy) {
  TempDir dir;
  spit(dir / "t.csv", "language,fl_v,fl_c,fl_p,n\nA,0.1,1,1,300\nB,0.2,2,1,300\nC,0.5,3,1,300\n");
  spit(dir / "z.trees", "((A:0,B:0):1,C:1);\n");
  std::vector<std::string> args = {"signal", "--fl-table", (dir / "t.csv").string(), "--trees",
                                   (dir / "z.trees").string(), "--out", dir.path().string()};
  auto r = cli(args, dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--jitter"), std::string::npos) << r.err;
  args.push_back("--jitter");
  r = cli(args, dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Determinism, SignalAndCorrAreByteIdentical) {
  TempDir dir;
  const auto trees = write_fixture_trees(dir, 20, 4);
  for (const char* out : {"a", "b"}) {
    for (const char* threads : {"1", "3"}) {
      const std::string o = (dir / (std::string(out) + threads)).string();
      ASSERT_EQ(cli({"signal", "--fl-table", kFixture.string(), "--trees", trees.string(), "--seed", "11", "--perm",
                     "99", "--threads", threads, "--out", o},
                    dir)
                    .code,
                0);
      ASSERT_EQ(cli({"corr", "--fl-table", kFixture.string(), "--trees", trees.string(), "--pair", "fl_v,fl_p",
                     "--seed", "11", "--out", o},
                    dir)
                    .code,
                0);
    }
  }
  for (const char* f : {"signal_fl_v_trees.csv", "signal_fl_v_summary.json", "corr_fl_v_fl_p_trees.csv",
                        "corr_fl_v_fl_p_summary.json"}) {
    const auto ref = slurp(dir / "a1" / f);
    EXPECT_FALSE(ref.empty());
    for (const char* other : {"a3", "b1", "b3"}) EXPECT_EQ(slurp(dir / other / f), ref) << f << " " << other;
  }
  auto j = pl::json::parse(slurp(dir / "a1" / "signal_fl_v_summary.json"));
  EXPECT_GT(j["p"].get<double>(), 0.0);
  EXPECT_LE(j["p"].get<double>(), 1.0);
}

TEST(CorrCli, IdenticalPairGivesOne) {
  TempDir dir;
  std::vector<std::string> warnings;
  ScopedWarningHandler h([&](const std::string& m) { warnings.push_back(m); });
  auto cfg = toy_config(dir);
  spit(dir / "t.csv", "language,x,y\nAlpha,0.1,0.1\nBeta,0.4,0.4\nGamma,0.2,0.2\n");
  cfg.fl_table = dir / "t.csv";
  cfg.pair = {"x", "y"};
  auto res = pl::run_corr(cfg);
  EXPECT_NEAR(res.r.mean, 1.0, 1e-12);
  EXPECT_LT(res.p, 1e-6);
}

TEST(CorrCli, NoPhyloFixtureCorrelationIsNegative) {
  TempDir dir;
  auto r = cli({"corr", "--fl-table", kFixture.string(), "--no-phylo", "--pair", "fl_v,fl_c", "--out",
                dir.path().string()},
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = pl::json::parse(slurp(dir / "corr_fl_v_fl_c_summary.json"));
  // Ordinary Pearson over the fixture, computed independently (numpy).
  EXPECT_NEAR(j["mean"].get<double>(), -0.44906026253988207, 1e-9);
  EXPECT_EQ(j["n_trees"], 1);
  EXPECT_EQ(j["phylogenetic"], false);
}

TEST(SimulateCli, ZeroRateAndDeterminism) {
  TempDir dir;
  auto r = cli({"simulate", "--trees", (kData / "toy" / "toy.trees").string(), "--rate", "0", "--root", "0.25",
                "--out", (dir / "zero").string()},
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "zero" / "sim_0000.csv"), "language,fl_v\nAlpha,0.25\nBeta,0.25\nGamma,0.25\n");

  for (const char* o : {"a", "b"})
    ASSERT_EQ(cli({"simulate", "--trees", (kData / "toy" / "toy.trees").string(), "--rate", "1,-0.5,1", "--seed",
                   "8", "--replicates", "3", "--out", (dir / o).string()},
                  dir)
                  .code,
              0);
  for (const char* f : {"sim_0000.csv", "sim_0002.csv", "simulate_manifest.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f));
  EXPECT_NE(slurp(dir / "a" / "sim_0000.csv"), slurp(dir / "a" / "sim_0001.csv"));
}

TEST(SimulateCli, NonPsdRateExitsTwo) {
  TempDir dir;
  auto r = cli({"simulate", "--trees", (kData / "toy" / "toy.trees").string(), "--rate", "1,2,1", "--out",
                dir.path().string()},
               dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("positive semidefinite"), std::string::npos) << r.err;
}

TEST(SimulateCli, CorrelationRecoveredEndToEnd) {
  TempDir dir;
  std::mt19937_64 rng(55);
  spit(dir / "t90.nwk", oracle::random_newick(rng, oracle::tip_names(90, "L"), {true, false}) + "\n");
  auto r = cli({"simulate", "--trees", (dir / "t90.nwk").string(), "--rate", "1,-0.5,1", "--seed", "21",
                "--replicates", "500", "--out", (dir / "sim").string()},
               dir);
  ASSERT_EQ(r.code, 0) << r.err;
  double sum = 0;
  for (std::uint32_t rep = 0; rep < 500; ++rep) {
    pl::AnalysisConfig cfg;
    cfg.fl_table = dir / "sim" / pl::replicate_file_name(rep);
    cfg.trees = dir / "t90.nwk";
    cfg.out = dir / "corr";
    cfg.threads = 1;
    sum += pl::run_corr(cfg).r.mean;
  }
  EXPECT_GE(sum / 500, -0.6);
  EXPECT_LE(sum / 500, -0.4);
}

TEST(ReportCli, HistogramsAndDeterminism) {
  TempDir dir;
  const auto trees = write_fixture_trees(dir, 10, 6);
  const std::string out = (dir / "out").string();
  ASSERT_EQ(cli({"signal", "--fl-table", kFixture.string(), "--trees", trees.string(), "--out", out}, dir).code, 0);
  ASSERT_EQ(cli({"corr", "--fl-table", kFixture.string(), "--trees", trees.string(), "--out", out}, dir).code, 0);
  auto r = cli({"report", "--fl-table", kFixture.string(), "--out", out}, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto hist = slurp(dir / "out" / "report_signal_fl_v_hist.svg");
  EXPECT_GT(hist.size(), 100u);
  EXPECT_NE(hist.find("<svg"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "report_corr_fl_v_fl_c_hist.svg"));
  EXPECT_TRUE(fs::exists(dir / "out" / "report_scatter_fl_v_fl_c.svg"));
  const auto html = slurp(dir / "out" / "report.html");
  EXPECT_NE(html.find("report_signal_fl_v_hist.svg"), std::string::npos);
  ASSERT_EQ(cli({"report", "--fl-table", kFixture.string(), "--out", out}, dir).code, 0);
  EXPECT_EQ(slurp(dir / "out" / "report.html"), html);
  EXPECT_EQ(slurp(dir / "out" / "report_signal_fl_v_hist.svg"), hist);
}

TEST(ReportCli, EmptyOrMissingInputsExitTwo) {
  TempDir dir;
  fs::create_directories(dir / "empty");
  auto r = cli({"report", "--out", (dir / "empty").string()}, dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nothing to report"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"report", "--out", (dir / "absent").string()}, dir).code, 2);

  fs::create_directories(dir / "partial");
  spit(dir / "partial" / "signal_fl_v_summary.json", "{}");
  r = cli({"report", "--out", (dir / "partial").string()}, dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("signal_fl_v_trees.csv"), std::string::npos) << r.err;
}

TEST(Files, AtomicWriteLeavesNoTemporaries) {
  TempDir dir;
  pl::write_file_atomic(dir / "x.txt", "one");
  pl::write_file_atomic(dir / "x.txt", "two");
  EXPECT_EQ(slurp(dir / "x.txt"), "two");
  int n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++n;
  EXPECT_EQ(n, 1);
}
