#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ladder/app.hpp"
#include "ladder/basis.hpp"
#include "ladder/run_config.hpp"

namespace fs = std::filesystem;
using namespace ladder;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ladder_cli_io_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

RunConfig small(const std::string& dir, const std::string& extra = "") {
  RunConfig c = parse_config("rungs = 4\nt_max = 20\ndt = 0.5\n" + extra);
  c.output_dir = dir;
  return c;
}

}  // namespace

TEST(ConfigParse, EmptyTextYieldsDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.ladder.rungs, 8);
  EXPECT_EQ(c.ladder.sites(), 16);
  EXPECT_DOUBLE_EQ(c.ladder.rung_coupling, 0.2);
  EXPECT_DOUBLE_EQ(c.ladder.anisotropy, 0.6);
  EXPECT_DOUBLE_EQ(c.ladder.beam_coupling, 1.0);
  EXPECT_DOUBLE_EQ(c.t_max, 150.0);
  EXPECT_DOUBLE_EQ(c.dt, 0.5);
  EXPECT_DOUBLE_EQ(c.corr_dt, 0.02);
  EXPECT_DOUBLE_EQ(c.plateau_start, 3.0);
  EXPECT_DOUBLE_EQ(c.plateau_end, 10.0);
  EXPECT_FALSE(c.gamma.has_value());
}

TEST(ConfigParse, NegativeKappaRejectedWithLineNumber) {
  const std::string e = error_of("# comment\n\nkappa = -1\n");
  EXPECT_NE(e.find("line 3"), std::string::npos) << e;
  EXPECT_NE(e.find("kappa"), std::string::npos) << e;
}

TEST(ConfigParse, UnknownKeyMalformedLineAndDuplicates) {
  EXPECT_NE(error_of("rungs = 6\nkapa = 0.1\n").find("line 2: unknown key 'kapa'"), std::string::npos);
  EXPECT_NE(error_of("rungs 6\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("kappa = 0.1\nkappa = 0.2\n").find("already set on line 1"), std::string::npos);
  EXPECT_NE(error_of("kappa =\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("dt = abc\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("convention = spin\n").find("line 1"), std::string::npos);
}

TEST(ConfigParse, CrossFieldRulesIgnoreKeyOrder) {
  const RunConfig c = parse_config("plateau_end = 20\ncorr_t_max = 30\n");
  EXPECT_DOUBLE_EQ(c.plateau_end, 20.0);
  EXPECT_NE(error_of("plateau_end = 20\n").find("plateau"), std::string::npos);
}

TEST(ConfigParse, CommentsAndWhitespace) {
  const RunConfig c = parse_config("  rungs=6   # twelve sites\n\tgamma = 0.5\r\n");
  EXPECT_EQ(c.ladder.sites(), 12);
  ASSERT_TRUE(c.gamma.has_value());
  EXPECT_DOUBLE_EQ(*c.gamma, 0.5);
}

TEST(ConfigParse, EchoRoundTrips) {
  const RunConfig c = parse_config("rungs = 6\nkappa = 0.15\ngamma = 0.4\ninitial = entangled_random\nseed = 77\n");
  const std::string echo = echo_config(c);
  EXPECT_EQ(echo_config(parse_config(echo)), echo);
  EXPECT_EQ(fnv1a(echo), fnv1a(echo_config(parse_config(echo))));
  EXPECT_NE(fnv1a(echo), fnv1a(echo_config(RunConfig{})));
}

TEST(ConfigParse, SixRungsGivesTwelveSitePipeline) {
  const fs::path dir = scratch("rungs6");
  RunConfig c = parse_config("rungs = 6\n");
  c.output_dir = dir.string();
  std::ostringstream out, err;
  ASSERT_EQ(run_subcommand("info", c, out, err), exit_ok) << err.str();
  EXPECT_NE(out.str().find("sector dimension " + std::to_string(static_cast<long>(binomial(12, 6)))), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(slurp(dir / "effective_config.txt"), echo_config(c));
}

TEST(Csv, FormatAndSchema) {
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  CsvWriter w(dir / "a.csv", {"t", "value"});
  w.row({0.1, 1.0 / 3.0});
  w.row({2.0, -1.5e-20});
  EXPECT_THROW(w.row(std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(w.row(std::vector<std::string>{"a,b", "c"}), ValidationError);
  EXPECT_THROW(format_number(std::nan("")), ValidationError);
  w.close();
  EXPECT_EQ(slurp(dir / "a.csv"), "t,value\n0.1,0.333333333333\n2,-1.5e-20\n");
}

TEST(Csv, SeriesHeaderNamesEveryX) {
  const auto h = series_header({-2, -1, 0, 1, 2});
  const std::vector<std::string> expected{"t", "P_-2", "P_-1", "P_0", "P_1", "P_2", "mean", "variance"};
  EXPECT_EQ(h, expected);
}

TEST(Subcommands, RerunsAreByteIdentical) {
  for (const std::string cmd : {"compare", "delta", "tcl", "eth", "block-structure"}) {
    SCOPED_TRACE(cmd);
    const std::string extra = "mixed_mode = typicality\nsamples = 3\ndraws = 2\nseed = 11\nfine_size = 6\n";
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    std::ostringstream out, err;
    ASSERT_EQ(run_subcommand(cmd, small(a.string(), extra), out, err), exit_ok) << err.str();
    ASSERT_EQ(run_subcommand(cmd, small(b.string(), extra), out, err), exit_ok) << err.str();
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      const std::string bytes = slurp(entry.path());
      EXPECT_EQ(bytes, slurp(b / entry.path().filename())) << entry.path();
      ASSERT_FALSE(bytes.empty());
      EXPECT_EQ(bytes.back(), '\n');
      EXPECT_NE(bytes.substr(bytes.size() - 2), "\n\n");
      ++compared;
    }
    EXPECT_GT(compared, 0);
  }
}

TEST(Subcommands, DifferentSeedsChangeRandomStates) {
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  std::ostringstream out, err;
  ASSERT_EQ(run_subcommand("evolve-quantum", small(a.string(), "initial = product_random\nseed = 1\n"), out, err), exit_ok);
  ASSERT_EQ(run_subcommand("evolve-quantum", small(b.string(), "initial = product_random\nseed = 2\n"), out, err), exit_ok);
  EXPECT_NE(slurp(a / "quantum.csv"), slurp(b / "quantum.csv"));
}

TEST(Subcommands, ExitCodes) {
  std::ostringstream out, err;
  EXPECT_EQ(run_subcommand("nonsense", small(scratch("x1").string()), out, err), exit_validation);
  EXPECT_EQ(run_subcommand("reproduce-figure", small(scratch("x2").string()), out, err, 9), exit_validation);
  // A plateau window on the initial rise of R(t) has no plateau.
  EXPECT_EQ(run_subcommand("fit-gamma", small(scratch("x3").string(), "plateau_start = 0\nplateau_end = 0.5\n"), out, err),
            exit_numerical);
  EXPECT_NE(err.str().find("no TCL2 plateau"), std::string::npos) << err.str();
  RunConfig tiny_window = small(scratch("x4").string(), "window_center = 100\nwindow_width = 0.1\n");
  EXPECT_EQ(run_subcommand("evolve-quantum", tiny_window, out, err), exit_validation);
  EXPECT_EQ(run_subcommand("evolve-stochastic", small(scratch("x5").string(), "gamma = 0.5\n"), out, err), exit_ok);
}

TEST(Subcommands, StochasticModelsShareTheirStart) {
  for (const std::string model : {"naive", "tcl_plateau", "tcl_time"}) {
    SCOPED_TRACE(model);
    const fs::path dir = scratch("model_" + model);
    std::ostringstream out, err;
    ASSERT_EQ(run_subcommand("evolve-stochastic", small(dir.string(), "stochastic_model = " + model + "\n"), out, err),
              exit_ok)
        << err.str();
    std::istringstream csv(slurp(dir / "stochastic.csv"));
    std::string header, first;
    std::getline(csv, header);
    std::getline(csv, first);
    EXPECT_EQ(header, "t,P_-2,P_-1,P_0,P_1,P_2,mean,variance");
    EXPECT_EQ(first, "0,0,0,0,1,0,1,0");
  }
}

TEST(Subcommands, FigureBlockArtifacts) {
  const fs::path dir = scratch("fig4");
  std::ostringstream out, err;
  RunConfig c = small(dir.string(), "fine_size = 5\n");
  ASSERT_EQ(run_subcommand("reproduce-figure", c, out, err, 4), exit_ok) << err.str();
  std::istringstream csv(slurp(dir / "block_fine.csv"));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "row_energy,col_energy,value");
  EXPECT_FALSE(fs::exists(dir / "block_coarse.csv"));
}
