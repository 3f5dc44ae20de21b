#ifndef ADINF_CONFIG_HPP
#define ADINF_CONFIG_HPP

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "adinf/errors.hpp"
#include "adinf/estimators.hpp"
#include "adinf/harness.hpp"
#include "adinf/oracle.hpp"
#include "adinf/population.hpp"

namespace adinf {

namespace detail {

using nlohmann::json;

inline Matrix parse_matrix(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw config_error("contrast must be an array of arrays");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols)
      throw config_error("contrast rows have unequal length");
    for (int c = 0; c < cols; ++c) m.at(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline OutcomeModelSpec parse_model(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return ZeroModel{};
  if (kind == "running_mean") return RunningMeanModel{};
  if (kind == "least_squares") {
    OnlineLeastSquaresModel m;
    m.min_obs = j.value("min_obs", 0);
    return m;
  }
  if (kind == "knn") {
    KNearestNeighborsModel m;
    m.k = j.value("k", 5);
    return m;
  }
  throw config_error("unknown model kind: " + kind);
}

inline DesignSpec parse_design(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "bernoulli") {
    BernoulliDesign d;
    d.probs = j.at("probs").get<std::vector<double>>();
    return d;
  }
  if (kind == "epsilon_greedy") {
    EpsilonGreedyDesign d;
    d.warmup = j.value("warmup", 50);
    const json& e = j.at("explore");
    if (e.contains("constant")) {
      d.explore = {ExploreSchedule::Kind::Constant, e.at("constant").get<double>()};
    } else if (e.contains("power_delta")) {
      d.explore = {ExploreSchedule::Kind::PowerDecay,
                   e.at("power_delta").get<double>()};
    } else {
      throw config_error("explore needs either constant or power_delta");
    }
    return d;
  }
  if (kind == "efron_biased_coin") {
    EfronBiasedCoinDesign d;
    d.bias = j.value("bias", 2.0 / 3.0);
    return d;
  }
  if (kind == "pairwise_sequential") {
    PairwiseSequentialDesign d;
    d.bias = j.value("bias", 0.75);
    return d;
  }
  if (kind == "sequential_rerandomization") {
    SequentialRerandomizationDesign d;
    d.accept_count = j.at("accept_count").get<int>();
    d.treated_per_block = j.at("treated_per_block").get<int>();
    return d;
  }
  throw config_error("unknown design kind: " + kind);
}

inline PopulationSpec parse_population(const json& j) {
  PopulationSpec ps;
  ps.seed = j.value("seed", 1ULL);
  const std::string noise = j.value("noise", "fixed");
  if (noise == "per_replication")
    ps.fresh_noise = true;
  else if (noise != "fixed")
    throw config_error("population noise must be 'fixed' or 'per_replication'");
  if (j.contains("csv")) {
    ps.csv_path = j.at("csv").get<std::string>();
    return ps;
  }
  const std::string dgp = j.at("dgp").get<std::string>();
  if (dgp == "Linear51")
    ps.dgp = Linear51{j.value("T", 2000)};
  else if (dgp == "SeqRR52")
    ps.dgp = SeqRR52{j.value("T_blocks", 200), j.value("block_size", 8)};
  else if (dgp == "Trend53")
    ps.dgp = Trend53{j.value("T", 200)};
  else if (dgp == "BiasS12")
    ps.dgp = BiasS12{j.value("T", 200)};
  else
    throw config_error("unknown dgp tag: " + dgp);
  return ps;
}

inline CovarianceKind parse_variance(const std::string& v) {
  if (v == "vhat") return CovarianceKind::VhatAipw;
  if (v == "vtilde") return CovarianceKind::VtildeAipw;
  if (v == "vhat_b") return CovarianceKind::VhatAipwB;
  if (v == "vtilde_b") return CovarianceKind::VtildeAipwB;
  if (v == "vhat_ipw") return CovarianceKind::VhatIpw;
  throw config_error("unknown variance kind: " + v);
}

inline StrategySpec parse_strategy(const json& j) {
  StrategySpec s;
  const std::string name = j.at("name").get<std::string>();
  s.label = j.value("label", name);
  if (name == "ipw") {
    s.kind = StrategySpec::Kind::Ipw;
  } else if (name == "aipw") {
    s.kind = StrategySpec::Kind::Aipw;
    s.model = parse_model(j.at("model"));
    s.variance = parse_variance(j.value("variance", "vhat"));
  } else if (name == "sm") {
    s.kind = StrategySpec::Kind::SampleMean;
  } else if (name == "all") {
    s.kind = StrategySpec::Kind::AllUnits;
    s.model = parse_model(j.at("model"));
  } else if (name == "cf") {
    s.kind = StrategySpec::Kind::CrossFit;
    s.model = parse_model(j.at("model"));
    s.folds = j.value("folds", 2);
    s.bonferroni = j.value("bonferroni", false);
  } else {
    throw config_error("unknown strategy name: " + name);
  }
  return s;
}

}  // namespace detail

inline StudySpec parse_study_spec(const nlohmann::json& j) {
  try {
    StudySpec spec;
    spec.population = detail::parse_population(j.at("population"));
    spec.design = detail::parse_design(j.at("design"));
    for (const auto& s : j.at("strategies"))
      spec.strategies.push_back(detail::parse_strategy(s));
    spec.estimand.contrast = detail::parse_matrix(j.at("contrast"));
    spec.alpha = j.value("alpha", 0.05);
    spec.replications = j.value("replications", 1000L);
    spec.base_seed = j.value("base_seed", 1ULL);
    spec.parallelism = j.value("parallelism", 1);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

struct AnalyzeSpec {
  std::string log_path;
  Estimand estimand;
  double alpha = 0.05;
  EstimatorKind estimator = EstimatorKind::Aipw;
  CovarianceKind variance = CovarianceKind::VhatAipw;
};

inline AnalyzeSpec parse_analyze_spec(const nlohmann::json& j) {
  try {
    AnalyzeSpec spec;
    spec.log_path = j.at("log").get<std::string>();
    spec.estimand.contrast = detail::parse_matrix(j.at("contrast"));
    spec.alpha = j.value("alpha", 0.05);
    const std::string est = j.value("estimator", "aipw");
    if (est == "ipw")
      spec.estimator = EstimatorKind::Ipw;
    else if (est == "aipw")
      spec.estimator = EstimatorKind::Aipw;
    else
      throw config_error("unknown estimator: " + est);
    spec.variance = detail::parse_variance(j.value("variance", "vhat"));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
}

// ---- serialization -----------------------------------------------------------

inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const InferenceReport& rep) {
  nlohmann::json j;
  j["tau_hat"] = rep.tau_hat;
  j["cov"] = to_json(rep.cov);
  j["ci_lower"] = rep.ci_lower;
  j["ci_upper"] = rep.ci_upper;
  j["chi2_threshold"] = rep.chi2_threshold;
  j["diagnostics"] = {
      {"realized_min_prob", rep.diagnostics.realized_min_prob},
      {"max_abs_outcome", rep.diagnostics.max_abs_outcome},
      {"max_abs_model", rep.diagnostics.max_abs_model},
      {"lindeberg_proxy", rep.diagnostics.lindeberg_proxy},
      {"cs_proxy", rep.diagnostics.cs_proxy},
  };
  return j;
}

inline nlohmann::json to_json(const StudyResult& res) {
  nlohmann::json j;
  j["truth"] = res.truth;
  nlohmann::json strategies = nlohmann::json::array();
  for (const auto& s : res.strategies) {
    strategies.push_back({
        {"strategy", s.label},
        {"bias", s.bias},
        {"mse", s.mse},
        {"skewness", s.skewness},
        {"coverage", s.coverage},
        {"avg_ci_length", s.avg_ci_length},
        {"replications", s.replications},
    });
  }
  j["strategies"] = strategies;
  return j;
}

inline nlohmann::json to_json(const SrdComparison& cmp) {
  nlohmann::json j;
  j["rerandomized"] = to_json(cmp.rerandomized);
  j["complete"] = to_json(cmp.complete);
  j["rmse_reduction_pct"] = cmp.rmse_reduction_pct;
  j["length_reduction_pct"] = cmp.length_reduction_pct;
  return j;
}

inline nlohmann::json to_json(const std::vector<IdentityCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all_pass = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"max_deviation", c.max_deviation},
                   {"tolerance", c.tolerance},
                   {"pass", c.pass}});
    all_pass = all_pass && c.pass;
  }
  return {{"checks", arr}, {"all_pass", all_pass}};
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw config_error("failed writing: " + path);
}

}  // namespace adinf

#endif
