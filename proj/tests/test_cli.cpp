#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "adinf/config.hpp"
#include "adinf/population.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

std::string g_cli;

std::string temp_dir() {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("adinf_cli_test_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string capture = temp_dir() + "/out.txt";
  const std::string cmd = g_cli + " " + args + " >" + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = slurp(capture);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json small_study_config() {
  return json{
      {"population", {{"dgp", "Linear51"}, {"T", 30}, {"seed", 3}}},
      {"design", {{"kind", "bernoulli"}, {"probs", {0.5, 0.5}}}},
      {"strategies",
       json::array({
           {{"name", "ipw"}},
           {{"name", "aipw"},
            {"model", {{"kind", "running_mean"}}},
            {"variance", "vtilde"}},
       })},
      {"contrast", {{-1.0, 1.0}}},
      {"replications", 25},
      {"base_seed", 7},
  };
}

adinf::ExperimentLog alternating_log() {
  adinf::ExperimentLog log;
  log.num_arms = 2;
  for (int t = 0; t < 4; ++t) {
    adinf::UnitRecord u;
    u.z = 1 + t % 2;
    u.y = static_cast<double>(t + 1);
    u.probs = {0.5, 0.5};
    u.mhat = {0.0, 0.0};
    log.units.push_back(u);
  }
  return log;
}

TEST(GenPopulation, WritesParsableCsv) {
  const std::string dir = temp_dir();
  const std::string out = dir + "/pop.csv";
  ASSERT_EQ(run_cli("gen-population --dgp Linear51 --T 30 --seed 4 --out " + out), 0);
  const adinf::FinitePopulation pop = adinf::read_population_csv(out);
  EXPECT_EQ(pop.size(), 30);
  EXPECT_EQ(pop.num_arms, 2);
  EXPECT_FALSE(pop.blocked());
}

TEST(GenPopulation, BlockDgpCarriesBlockSizes) {
  const std::string dir = temp_dir();
  const std::string out = dir + "/pop.csv";
  ASSERT_EQ(
      run_cli("gen-population --dgp SeqRR52 --T-blocks 3 --block-size 4 --out " + out),
      0);
  const adinf::FinitePopulation pop = adinf::read_population_csv(out);
  EXPECT_EQ(pop.size(), 12);
  EXPECT_TRUE(pop.blocked());
  EXPECT_EQ(pop.block_sizes.size(), 3u);
}

TEST(GenPopulation, MissingOutputPathFails) {
  EXPECT_EQ(run_cli("gen-population --dgp Linear51 --T 10"), 2);
}

TEST(Simulate, StudyModeWritesSummaryDeviationsReport) {
  const std::string dir = temp_dir();
  const std::string cfg = dir + "/study.json";
  write_text(cfg, small_study_config().dump(2));
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out-dir " + dir), 0);

  const std::string summary = slurp(dir + "/summary.csv");
  EXPECT_EQ(summary.rfind("strategy,metric,value", 0), 0u);
  EXPECT_NE(summary.find("ipw,coverage,"), std::string::npos);
  EXPECT_NE(summary.find("aipw,avg_ci_length,"), std::string::npos);

  EXPECT_TRUE(std::filesystem::exists(dir + "/deviations.csv"));
  const json rep = json::parse(slurp(dir + "/report.json"));
  ASSERT_EQ(rep.at("strategies").size(), 2u);
  EXPECT_EQ(rep.at("strategies")[0].at("strategy"), "ipw");
  EXPECT_EQ(rep.at("strategies")[0].at("replications"), 25);
}

TEST(Simulate, ReplicationOverrideShrinksRun) {
  const std::string dir = temp_dir();
  const std::string cfg = dir + "/study.json";
  write_text(cfg, small_study_config().dump(2));
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out-dir " + dir +
                    " --replications 9"),
            0);
  const json rep = json::parse(slurp(dir + "/report.json"));
  EXPECT_EQ(rep.at("strategies")[0].at("replications"), 9);
}

TEST(Simulate, SrdComparisonModeReportsReductions) {
  const std::string dir = temp_dir();
  const json cfg_json{
      {"mode", "srd_comparison"},
      {"population",
       {{"dgp", "SeqRR52"}, {"T_blocks", 5}, {"block_size", 4}, {"seed", 2}}},
      {"design",
       {{"kind", "sequential_rerandomization"},
        {"accept_count", 3},
        {"treated_per_block", 2}}},
      {"strategies", json::array({{{"name", "ipw"}}})},
      {"contrast", {{-1.0, 1.0}}},
      {"replications", 20},
      {"base_seed", 11},
  };
  const std::string cfg = dir + "/srd.json";
  write_text(cfg, cfg_json.dump(2));
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out-dir " + dir), 0);

  const json rep = json::parse(slurp(dir + "/report.json"));
  EXPECT_TRUE(rep.contains("rmse_reduction_pct"));
  EXPECT_TRUE(rep.contains("length_reduction_pct"));
  EXPECT_TRUE(std::isfinite(rep.at("rmse_reduction_pct").get<double>()));

  const std::string summary = slurp(dir + "/summary.csv");
  EXPECT_NE(summary.find("srd_ipw,"), std::string::npos);
  EXPECT_NE(summary.find("crd_sm,"), std::string::npos);
  EXPECT_NE(summary.find("comparison,rmse_reduction_pct,"), std::string::npos);
}

TEST(Simulate, MissingConfigFlagFails) {
  EXPECT_EQ(run_cli("simulate"), 2);
}

TEST(Simulate, MalformedConfigFails) {
  const std::string dir = temp_dir();
  const std::string cfg = dir + "/bad.json";
  write_text(cfg, "{ this is not json");
  std::string out;
  EXPECT_EQ(run_cli("simulate --config " + cfg, &out), 2);
  EXPECT_NE(out.find("error:"), std::string::npos);
}

TEST(Simulate, PerReplicationNoiseModeRuns) {
  const std::string dir = temp_dir();
  json cfg_json = small_study_config();
  cfg_json["population"]["noise"] = "per_replication";
  const std::string cfg = dir + "/study.json";
  write_text(cfg, cfg_json.dump(2));
  EXPECT_EQ(run_cli("simulate --config " + cfg + " --out-dir " + dir), 0);
  EXPECT_NE(slurp(dir + "/summary.csv").find("aipw,coverage,"),
            std::string::npos);
}

TEST(Simulate, UnknownNoiseModeFails) {
  const std::string dir = temp_dir();
  json cfg_json = small_study_config();
  cfg_json["population"]["noise"] = "bogus";
  const std::string cfg = dir + "/study.json";
  write_text(cfg, cfg_json.dump(2));
  std::string out;
  EXPECT_EQ(run_cli("simulate --config " + cfg + " --out-dir " + dir, &out), 2);
  EXPECT_NE(out.find("noise"), std::string::npos);
}

TEST(Simulate, UnknownModeFails) {
  const std::string dir = temp_dir();
  json cfg_json = small_study_config();
  cfg_json["mode"] = "bogus";
  const std::string cfg = dir + "/study.json";
  write_text(cfg, cfg_json.dump(2));
  std::string out;
  EXPECT_EQ(run_cli("simulate --config " + cfg + " --out-dir " + dir, &out), 2);
  EXPECT_NE(out.find("unknown mode: bogus"), std::string::npos);
}

TEST(Cli, NoSubcommandFails) {
  EXPECT_EQ(run_cli(""), 2);
}

TEST(Cli, UnknownSubcommandFails) {
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Analyze, RoundTripMatchesHandComputation) {
  const std::string dir = temp_dir();
  const std::string log_path = dir + "/log.csv";
  adinf::write_log_csv(alternating_log(), log_path);

  const json cfg_json{
      {"log", log_path},
      {"contrast", {{-1.0, 1.0}}},
      {"estimator", "aipw"},
      {"variance", "vhat"},
  };
  const std::string cfg = dir + "/analyze.json";
  write_text(cfg, cfg_json.dump(2));
  const std::string report = dir + "/report.json";
  ASSERT_EQ(run_cli("analyze --config " + cfg + " --out " + report), 0);

  const json rep = json::parse(slurp(report));
  ASSERT_EQ(rep.at("tau_hat").size(), 1u);
  EXPECT_DOUBLE_EQ(rep.at("tau_hat")[0].get<double>(), 1.0);
  ASSERT_EQ(rep.at("ci_lower").size(), 1u);
  EXPECT_LT(rep.at("ci_lower")[0].get<double>(), 1.0);
  EXPECT_GT(rep.at("ci_upper")[0].get<double>(), 1.0);
  EXPECT_TRUE(rep.at("diagnostics").contains("lindeberg_proxy"));
}

TEST(Analyze, SingularCovarianceIsNumericFailure) {
  const std::string dir = temp_dir();
  adinf::ExperimentLog log = alternating_log();
  for (auto& u : log.units) u.z = 1;
  const std::string log_path = dir + "/log.csv";
  adinf::write_log_csv(log, log_path);

  const json cfg_json{
      {"log", log_path},
      {"contrast", {{1.0, 0.0}, {0.0, 1.0}}},
      {"estimator", "ipw"},
  };
  const std::string cfg = dir + "/analyze.json";
  write_text(cfg, cfg_json.dump(2));
  std::string out;
  EXPECT_EQ(run_cli("analyze --config " + cfg + " --out " + dir + "/rep.json", &out),
            3);
  EXPECT_NE(out.find("singular"), std::string::npos);
}

TEST(Analyze, MissingLogFileFails) {
  const std::string dir = temp_dir();
  const json cfg_json{
      {"log", dir + "/absent.csv"},
      {"contrast", {{-1.0, 1.0}}},
  };
  const std::string cfg = dir + "/analyze.json";
  write_text(cfg, cfg_json.dump(2));
  EXPECT_EQ(run_cli("analyze --config " + cfg + " --out " + dir + "/rep.json"), 2);
}

TEST(Certify, AllIdentityChecksPass) {
  const std::string dir = temp_dir();
  std::string out;
  ASSERT_EQ(run_cli("certify --out-dir " + dir, &out), 0);
  EXPECT_NE(out.find("PASS"), std::string::npos);
  EXPECT_EQ(out.find("FAIL"), std::string::npos);

  const json rep = json::parse(slurp(dir + "/report.json"));
  EXPECT_TRUE(rep.at("all_pass").get<bool>());
  EXPECT_GE(rep.at("checks").size(), 10u);
}

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  if (argc > 1) g_cli = argv[1];
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-adinf-binary>\n");
    return 1;
  }
  return RUN_ALL_TESTS();
}
