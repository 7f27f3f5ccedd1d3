#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "barfiq/fringe.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BARFIQ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("barfiq_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("train --help"), 0);
}

TEST(Cli, UnknownOptionIsUsageError) {
  EXPECT_EQ(run("train --bogus"), 1);
  EXPECT_EQ(run("train --set nope=1"), 1);
}

TEST(Cli, ThreeShotFitIsAllMissing) {
  const fs::path dir = scratch("fit");
  {
    std::ofstream f(dir / "shots.csv");
    f << "iter,theta,rho,phi_rt,a,c,r\n0,0,0.5,0,0.4,0.2,0.5\n1,0.3,0.6,0,0.4,0.2,0.6\n2,0.6,0.7,0,0.4,0.2,0.7\n";
  }
  EXPECT_EQ(run("fit-fringe --input " + (dir / "shots.csv").string() + " --out " + dir.string()), 0);
  std::ifstream in(dir / "phases.csv");
  const auto phases = barfiq::fringe::read_phases_csv(in);
  ASSERT_EQ(phases.size(), 3u);
  for (const auto& p : phases) EXPECT_EQ(p.status, barfiq::fringe::PhaseStatus::missing_insufficient_window);
}

TEST(Cli, GenerateThenFit) {
  const fs::path dir = scratch("gen");
  EXPECT_EQ(run("gen-data --out " + dir.string() + " --set gen.n_shots=100"), 0);
  EXPECT_TRUE(fs::exists(dir / "shots.csv"));
  EXPECT_TRUE(fs::exists(dir / "truth.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(run("fit-fringe --input " + (dir / "shots.csv").string() + " --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "phases.csv"));
}

TEST(Cli, MalformedInputIsDataError) {
  const fs::path dir = scratch("bad");
  {
    std::ofstream f(dir / "shots.csv");
    f << "iter,theta\n1,2\n";
  }
  EXPECT_EQ(run("fit-fringe --input " + (dir / "shots.csv").string() + " --out " + dir.string()), 2);
}

TEST(Cli, ReportOnEmptyDirectory) {
  const fs::path dir = scratch("empty");
  EXPECT_EQ(run("report " + dir.string()), 2);
}

TEST(Cli, TinyTrainEvalReport) {
  const fs::path dir = scratch("train");
  {
    std::ofstream f(dir / "cfg.txt");
    f << "gen.n_shots = 160\nmodel.d_model = 8\nmodel.n_experts = 2\nmodel.top_k = 1\nmodel.d_r = 4\n"
         "model.expert_hidden = 8\nfusion.d_out = 8\nqfm.n_qubits = 2\nqfm.n_heads = 2\nqfm.d_q = 4\n"
         "qfm.post_hidden = 8\nhead.hidden = 8\ntrain.max_epochs = 2\ntrain.batch_size = 16\n";
  }
  const std::string common = "--config " + (dir / "cfg.txt").string() + " --out " + dir.string();
  ASSERT_EQ(run("train --quiet " + common), 0);
  for (const char* f : {"checkpoint.bin", "metrics.json", "epochs.csv", "config.txt", "run_log.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(run("eval " + common + " --checkpoint " + (dir / "checkpoint.bin").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "eval_metrics.json"));
  EXPECT_EQ(run("diagnose-correlation " + common + " --checkpoint " + (dir / "checkpoint.bin").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "corr_post_head0.csv"));
  EXPECT_EQ(run("report " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
  // a checkpoint from another architecture is refused
  EXPECT_EQ(run("eval " + common + " --set fusion.variant=none --checkpoint " + (dir / "checkpoint.bin").string()), 2);
}
