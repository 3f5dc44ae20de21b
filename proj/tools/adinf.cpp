#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adinf/config.hpp"
#include "adinf/errors.hpp"
#include "adinf/harness.hpp"
#include "adinf/oracle.hpp"
#include "adinf/population.hpp"

namespace {

struct GenArgs {
  std::string dgp = "Linear51";
  int t = 0;
  int t_blocks = 0;
  int block_size = 0;
  std::uint64_t seed = 1;
  std::string out;
};

struct SimulateArgs {
  std::string config;
  std::string out_dir = ".";
  bool quick = false;
  std::int64_t seed = -1;
  long replications = 0;
  int parallelism = 0;
};

struct AnalyzeArgs {
  std::string config;
  std::string out = "report.json";
};

struct CertifyArgs {
  std::string out_dir = ".";
};

adinf::DgpSpec dgp_from_args(const GenArgs& a) {
  if (a.dgp == "Linear51") return adinf::Linear51{a.t > 0 ? a.t : 2000};
  if (a.dgp == "SeqRR52")
    return adinf::SeqRR52{a.t_blocks > 0 ? a.t_blocks : 200,
                          a.block_size > 0 ? a.block_size : 8};
  if (a.dgp == "Trend53") return adinf::Trend53{a.t > 0 ? a.t : 200};
  if (a.dgp == "BiasS12") return adinf::BiasS12{a.t > 0 ? a.t : 200};
  throw adinf::config_error("unknown dgp tag: " + a.dgp);
}

void apply_quick_profile(adinf::StudySpec& spec) {
  spec.replications = std::min<long>(spec.replications, 300);
  if (spec.population.dgp) {
    if (auto* d = std::get_if<adinf::Linear51>(&*spec.population.dgp))
      d->T = std::min(d->T, 500);
    else if (auto* d = std::get_if<adinf::SeqRR52>(&*spec.population.dgp))
      d->T_blocks = std::min(d->T_blocks, 50);
    else if (auto* d = std::get_if<adinf::Trend53>(&*spec.population.dgp))
      d->T = std::min(d->T, 200);
    else if (auto* d = std::get_if<adinf::BiasS12>(&*spec.population.dgp))
      d->T = std::min(d->T, 200);
  }
}

int run_gen(const GenArgs& a) {
  const adinf::FinitePopulation pop =
      adinf::generate_population(dgp_from_args(a), a.seed);
  adinf::write_population_csv(pop, a.out);
  std::cout << "wrote population of " << pop.size() << " units to " << a.out
            << "\n";
  return 0;
}

int run_simulate(const SimulateArgs& a) {
  const nlohmann::json j = adinf::load_json_file(a.config);
  adinf::StudySpec spec = adinf::parse_study_spec(j);
  const std::string mode = j.value("mode", "study");
  if (a.seed >= 0) spec.base_seed = static_cast<std::uint64_t>(a.seed);
  if (a.replications > 0) spec.replications = a.replications;
  if (a.parallelism > 0) spec.parallelism = a.parallelism;
  if (a.quick) apply_quick_profile(spec);

  std::filesystem::create_directories(a.out_dir);
  const std::string summary_path = a.out_dir + "/summary.csv";
  const std::string deviations_path = a.out_dir + "/deviations.csv";
  const std::string report_path = a.out_dir + "/report.json";

  if (mode == "srd_comparison") {
    const adinf::SrdComparison cmp = adinf::run_srd_comparison(spec);
    adinf::StudyResult merged;
    merged.truth = cmp.rerandomized.truth;
    merged.strategies = cmp.rerandomized.strategies;
    merged.strategies[0].label = "srd_ipw";
    for (auto s : cmp.complete.strategies) {
      s.label = "crd_" + s.label;
      merged.strategies.push_back(s);
    }
    merged.deviations = cmp.rerandomized.deviations;
    merged.deviations.push_back(cmp.complete.deviations[0]);
    adinf::summarize_to_csv(merged, summary_path);
    {
      std::ofstream app_out(summary_path, std::ios::app);
      app_out << "comparison,rmse_reduction_pct,"
              << adinf::detail::format_sig17(cmp.rmse_reduction_pct) << "\n";
      app_out << "comparison,length_reduction_pct,"
              << adinf::detail::format_sig17(cmp.length_reduction_pct) << "\n";
    }
    adinf::emit_plot_data(merged, {"srd_ipw", "crd_sm"}, deviations_path);
    adinf::write_json_file(adinf::to_json(cmp), report_path);
    std::cout << "rmse reduction: " << cmp.rmse_reduction_pct << "%\n"
              << "length reduction: " << cmp.length_reduction_pct << "%\n";
  } else if (mode == "study") {
    const adinf::StudyResult res = adinf::run_study(spec);
    adinf::summarize_to_csv(res, summary_path);
    std::vector<std::string> labels;
    for (const auto& s : spec.strategies) labels.push_back(s.label);
    adinf::emit_plot_data(res, labels, deviations_path);
    adinf::write_json_file(adinf::to_json(res), report_path);
    for (const auto& s : res.strategies)
      std::cout << s.label << ": coverage=" << s.coverage
                << " avg_ci_length=" << s.avg_ci_length << " mse=" << s.mse[0]
                << "\n";
  } else {
    throw adinf::config_error("unknown mode: " + mode);
  }
  std::cout << "wrote " << summary_path << ", " << deviations_path << ", "
            << report_path << "\n";
  return 0;
}

int run_analyze(const AnalyzeArgs& a) {
  const nlohmann::json j = adinf::load_json_file(a.config);
  const adinf::AnalyzeSpec spec = adinf::parse_analyze_spec(j);
  adinf::ExperimentLog log = adinf::read_log_csv(spec.log_path);
  log.validate();
  const adinf::InferenceReport rep = adinf::make_inference_report(
      log, spec.estimand, spec.estimator, spec.variance, spec.alpha);
  adinf::write_json_file(adinf::to_json(rep), a.out);
  std::cout << adinf::to_json(rep).dump(2) << "\n";
  return 0;
}

int run_certify(const CertifyArgs& a) {
  const std::vector<adinf::IdentityCheck> checks = adinf::certify_suite();
  std::filesystem::create_directories(a.out_dir);
  adinf::write_json_file(adinf::to_json(checks), a.out_dir + "/report.json");
  bool all_pass = true;
  for (const auto& c : checks) {
    std::printf("%-42s %s  (max deviation %.3e, tolerance %.1e)\n",
                c.name.c_str(), c.pass ? "PASS" : "FAIL", c.max_deviation,
                c.tolerance);
    all_pass = all_pass && c.pass;
  }
  return all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design-based inference for adaptive experiments"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-population",
                                     "generate a potential-outcome table");
  gen->add_option("--dgp", gen_args.dgp,
                  "Linear51 | SeqRR52 | Trend53 | BiasS12");
  gen->add_option("--T", gen_args.t, "unit count (unit-level dgps)");
  gen->add_option("--T-blocks", gen_args.t_blocks, "block count (SeqRR52)");
  gen->add_option("--block-size", gen_args.block_size, "block size (SeqRR52)");
  gen->add_option("--seed", gen_args.seed, "generation seed");
  gen->add_option("--out", gen_args.out, "output csv path")->required();

  SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo study");
  sim->add_option("--config", sim_args.config, "study config json")->required();
  sim->add_option("--out-dir", sim_args.out_dir, "output directory");
  sim->add_flag("--quick", sim_args.quick, "smaller population and replications");
  sim->add_option("--seed", sim_args.seed, "override base_seed");
  sim->add_option("--replications", sim_args.replications,
                  "override replication count");
  sim->add_option("--parallelism", sim_args.parallelism,
                  "override worker thread count");

  AnalyzeArgs an_args;
  CLI::App* an = app.add_subcommand("analyze",
                                    "estimate and report from a logged experiment");
  an->add_option("--config", an_args.config, "analysis config json")->required();
  an->add_option("--out", an_args.out, "output report path");

  CertifyArgs cert_args;
  CLI::App* cert = app.add_subcommand(
      "certify", "run exact finite-sample identity checks by enumeration");
  cert->add_option("--out-dir", cert_args.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (sim->parsed()) return run_simulate(sim_args);
    if (an->parsed()) return run_analyze(an_args);
    if (cert->parsed()) return run_certify(cert_args);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const adinf::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const adinf::numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
