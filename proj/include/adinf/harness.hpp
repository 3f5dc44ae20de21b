#ifndef ADINF_HARNESS_HPP
#define ADINF_HARNESS_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "adinf/chi_square.hpp"
#include "adinf/designs.hpp"
#include "adinf/errors.hpp"
#include "adinf/estimators.hpp"
#include "adinf/experiment.hpp"
#include "adinf/outcome_models.hpp"
#include "adinf/population.hpp"
#include "adinf/rng.hpp"

namespace adinf {

struct StrategySpec {
  enum class Kind { Ipw, Aipw, SampleMean, AllUnits, CrossFit };
  Kind kind = Kind::Ipw;
  std::string label;
  OutcomeModelSpec model = ZeroModel{};
  CovarianceKind variance = CovarianceKind::VhatAipw;  // aipw strategies
  int folds = 2;                                       // cross-fit strategies
  bool bonferroni = false;                             // cross-fit strategies
};

struct PopulationSpec {
  std::optional<DgpSpec> dgp;
  std::string csv_path;
  std::uint64_t seed = 1;
  // When set, each replication redraws the outcome noise around the fixed
  // conditional-mean table and metrics target the mean-table contrast.
  bool fresh_noise = false;
};

struct StudySpec {
  PopulationSpec population;
  DesignSpec design = BernoulliDesign{};
  std::vector<StrategySpec> strategies;
  Estimand estimand;
  double alpha = 0.05;
  long replications = 1000;
  std::uint64_t base_seed = 1;
  int parallelism = 1;
};

struct StrategyMetrics {
  std::string label;
  std::vector<double> bias;
  std::vector<double> mse;
  std::vector<double> skewness;
  double coverage = 0.0;
  double avg_ci_length = 0.0;
  long replications = 0;
};

struct StudyResult {
  std::vector<double> truth;
  std::vector<StrategyMetrics> strategies;
  // deviations[s][r] is the length-Q deviation vector of strategy s in
  // replication r
  std::vector<std::vector<std::vector<double>>> deviations;
  std::vector<std::uint64_t> assignment_hashes;  // per replication
};

inline FinitePopulation resolve_population(const PopulationSpec& ps) {
  if (!ps.csv_path.empty()) {
    if (ps.fresh_noise)
      throw config_error("per-replication noise requires a generated population");
    FinitePopulation pop = read_population_csv(ps.csv_path);
    pop.validate();
    return pop;
  }
  if (!ps.dgp) throw config_error("population needs either a dgp or a csv path");
  if (ps.fresh_noise) return generate_conditional_means(*ps.dgp, ps.seed);
  return generate_population(*ps.dgp, ps.seed);
}

namespace detail {

inline std::string model_cache_key(const OutcomeModelSpec& m) {
  if (std::holds_alternative<ZeroModel>(m)) return "zero";
  if (std::holds_alternative<RunningMeanModel>(m)) return "running_mean";
  if (const auto* ls = std::get_if<OnlineLeastSquaresModel>(&m))
    return "least_squares:" + std::to_string(ls->min_obs);
  const auto& kn = std::get<KNearestNeighborsModel>(m);
  return "knn:" + std::to_string(kn.k);
}

// Computations shared by strategies within one replication.
struct ReplicationCache {
  const ExperimentLog* log = nullptr;
  std::map<std::string, Matrix> adaptive;
  std::map<std::string, AllUnitsPrediction> all_units;
  std::map<std::string, CrossFitResult> crossfit;

  const Matrix& adaptive_matrix(const OutcomeModelSpec& m) {
    const std::string key = model_cache_key(m);
    auto it = adaptive.find(key);
    if (it == adaptive.end())
      it = adaptive.emplace(key, adaptive_prediction_matrix(*log, m)).first;
    return it->second;
  }

  const AllUnitsPrediction& all_units_prediction(const OutcomeModelSpec& m) {
    const std::string key = model_cache_key(m);
    auto it = all_units.find(key);
    if (it == all_units.end())
      it = all_units.emplace(key, predict_all_units(*log, m)).first;
    return it->second;
  }

  const CrossFitResult& crossfit_result(int folds, const OutcomeModelSpec& m) {
    const std::string key = std::to_string(folds) + "/" + model_cache_key(m);
    auto it = crossfit.find(key);
    if (it == crossfit.end())
      it = crossfit.emplace(key, crossfit_estimate(*log, folds, m)).first;
    return it->second;
  }
};

struct EvalRow {
  std::vector<double> tau;
  bool covered = false;
  double length = 0.0;
};

inline double mean_interval_length(const ConfidenceSet& cs) {
  double s = 0.0;
  for (size_t q = 0; q < cs.ci_lower.size(); ++q)
    s += cs.ci_upper[q] - cs.ci_lower[q];
  return s / cs.ci_lower.size();
}

// Per-arm observed means, variances, and counts.
struct ArmSummary {
  std::vector<double> mean;
  std::vector<double> var;  // sample variance, n-1 denominator
  std::vector<int> count;
};

inline ArmSummary arm_summary(const ExperimentLog& log, const Matrix* resid) {
  const int k_n = log.num_arms;
  ArmSummary s;
  s.mean.assign(k_n, 0.0);
  s.var.assign(k_n, 0.0);
  s.count.assign(k_n, 0);
  for (int t = 0; t < log.size(); ++t) {
    const auto& u = log.units[t];
    const int z = u.z - 1;
    const double v = resid ? u.y - resid->at(t, z) : u.y;
    s.mean[z] += v;
    ++s.count[z];
  }
  for (int z = 0; z < k_n; ++z) {
    if (s.count[z] < 2)
      throw numeric_error("arm with fewer than two observations");
    s.mean[z] /= s.count[z];
  }
  for (int t = 0; t < log.size(); ++t) {
    const auto& u = log.units[t];
    const int z = u.z - 1;
    const double v = resid ? u.y - resid->at(t, z) : u.y;
    s.var[z] += (v - s.mean[z]) * (v - s.mean[z]);
  }
  for (int z = 0; z < k_n; ++z) s.var[z] /= (s.count[z] - 1);
  return s;
}

inline EvalRow finish_row(const std::vector<double>& tau, const ConfidenceSet& cs,
                          const std::vector<double>& truth) {
  EvalRow row;
  row.tau = tau;
  row.covered = cs.contains(truth);
  row.length = mean_interval_length(cs);
  return row;
}

inline EvalRow eval_strategy(const StrategySpec& s, const ExperimentLog& log,
                             const Estimand& estimand,
                             const std::vector<double>& truth, double alpha,
                             ReplicationCache& cache) {
  const auto& c = estimand.contrast;
  const int k_n = log.num_arms;

  switch (s.kind) {
    case StrategySpec::Kind::Ipw: {
      const PseudoOutcomeTrace tr = pseudo_outcomes(log);
      const std::vector<double> tau =
          point_estimate(tr, estimand, EstimatorKind::Ipw);
      const Matrix v = covariance_estimate(tr, CovarianceKind::VhatIpw);
      return finish_row(tau, confidence_set(tau, v, estimand, alpha, tr.num_groups),
                        truth);
    }
    case StrategySpec::Kind::Aipw: {
      const Matrix& mhat = cache.adaptive_matrix(s.model);
      const PseudoOutcomeTrace tr = pseudo_outcomes(log, &mhat);
      const std::vector<double> tau =
          point_estimate(tr, estimand, EstimatorKind::Aipw);
      const Matrix v = covariance_estimate(tr, s.variance);
      return finish_row(tau, confidence_set(tau, v, estimand, alpha, tr.num_groups),
                        truth);
    }
    case StrategySpec::Kind::SampleMean: {
      const ArmSummary as = arm_summary(log, nullptr);
      const std::vector<double> tau = matvec(c, as.mean);
      Matrix d(k_n, k_n);
      for (int z = 0; z < k_n; ++z) d.at(z, z) = as.var[z] / as.count[z];
      Matrix p = sandwich(c, d);
      return finish_row(tau, wald_confidence_set(tau, p, alpha), truth);
    }
    case StrategySpec::Kind::AllUnits: {
      const AllUnitsPrediction& pred = cache.all_units_prediction(s.model);
      const ArmSummary as = arm_summary(log, &pred.mhat);
      const int t_n = log.size();
      std::vector<double> est(k_n, 0.0);
      for (int z = 0; z < k_n; ++z) {
        double pred_mean = 0.0;
        for (int t = 0; t < t_n; ++t) pred_mean += pred.mhat.at(t, z);
        est[z] = as.mean[z] + pred_mean / t_n;
      }
      const std::vector<double> tau = matvec(c, est);
      Matrix d(k_n, k_n);
      for (int z = 0; z < k_n; ++z) d.at(z, z) = as.var[z] / as.count[z];
      Matrix p = sandwich(c, d);
      return finish_row(tau, wald_confidence_set(tau, p, alpha), truth);
    }
    case StrategySpec::Kind::CrossFit: {
      if (c.rows != 1)
        throw config_error("cross-fit strategies require a single-row contrast");
      if (log.blocked())
        throw config_error("cross-fit strategies require unit-level logs");
      const CrossFitResult& cf = cache.crossfit_result(s.folds, s.model);
      const int g_n = static_cast<int>(cf.fold_ranges.size());
      const int t_n = log.size();
      const double tau = matvec(c, cf.estimate)[0];

      std::vector<double> fold_tau(g_n), fold_se(g_n), w(g_n);
      for (int g = 0; g < g_n; ++g) {
        const auto [begin, end] = cf.fold_ranges[g];
        const int len = end - begin;
        w[g] = static_cast<double>(len) / t_n;
        std::vector<double> est_g(k_n);
        for (int z = 0; z < k_n; ++z) est_g[z] = cf.fold_estimates.at(g, z);
        fold_tau[g] = matvec(c, est_g)[0];

        ExperimentLog sub;
        sub.num_arms = k_n;
        sub.num_covariates = log.num_covariates;
        sub.units.assign(log.units.begin() + begin, log.units.begin() + end);
        Matrix sub_mhat(len, k_n);
        for (int t = 0; t < len; ++t)
          for (int z = 0; z < k_n; ++z)
            sub_mhat.at(t, z) = cf.mhat.at(begin + t, z);
        const PseudoOutcomeTrace tr = pseudo_outcomes(sub, &sub_mhat);
        const Matrix v = covariance_estimate(tr, CovarianceKind::VtildeAipw);
        const double var_g = sandwich(c, v).at(0, 0) / len;
        if (!(var_g >= 0.0))
          throw numeric_error("negative fold variance");
        fold_se[g] = std::sqrt(var_g);
      }

      double lower, upper;
      if (s.bonferroni) {
        const double zq = normal_quantile_upper(1.0 - alpha / (2.0 * g_n));
        lower = upper = 0.0;
        for (int g = 0; g < g_n; ++g) {
          lower += w[g] * (fold_tau[g] - zq * fold_se[g]);
          upper += w[g] * (fold_tau[g] + zq * fold_se[g]);
        }
      } else {
        double var = 0.0;
        for (int g = 0; g < g_n; ++g) var += w[g] * w[g] * fold_se[g] * fold_se[g];
        const double zq = normal_quantile_upper(1.0 - alpha / 2.0);
        lower = tau - zq * std::sqrt(var);
        upper = tau + zq * std::sqrt(var);
      }
      EvalRow row;
      row.tau = {tau};
      row.covered = truth[0] >= lower && truth[0] <= upper;
      row.length = upper - lower;
      return row;
    }
  }
  throw config_error("unknown strategy kind");
}

inline std::uint64_t assignment_hash(const ExperimentLog& log) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& u : log.units) {
    h ^= static_cast<std::uint64_t>(u.z);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline void validate_study(const StudySpec& spec, const FinitePopulation& pop) {
  pop.validate();
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
    throw config_error("alpha must lie in (0, 1)");
  if (spec.replications < 1)
    throw config_error("replications must be >= 1");
  if (spec.parallelism < 1)
    throw config_error("parallelism must be >= 1");
  if (spec.strategies.empty())
    throw config_error("at least one strategy is required");
  spec.estimand.validate(pop.num_arms);
  validate_design(spec.design, pop.num_arms, pop.block_sizes);
  for (size_t i = 0; i < spec.strategies.size(); ++i) {
    const auto& s = spec.strategies[i];
    if (s.label.empty()) throw config_error("strategy label must not be empty");
    for (size_t j = 0; j < i; ++j)
      if (spec.strategies[j].label == s.label)
        throw config_error("duplicate strategy label: " + s.label);
    validate_model(s.model, pop.num_covariates);
    if (s.kind == StrategySpec::Kind::CrossFit) {
      if (s.folds < 2)
        throw config_error("cross-fitting requires at least two folds");
      if (spec.estimand.contrast.rows != 1)
        throw config_error("cross-fit strategies require a single-row contrast");
      if (pop.blocked())
        throw config_error("cross-fit strategies require unit-level logs");
    }
  }
}

// Runs the full Monte Carlo study. One simulated experiment per replication
// is shared by all strategies; replication r uses an rng keyed on
// (base_seed, r), so results do not depend on the parallelism level. With
// fresh_noise the outcome noise is rekeyed on (population seed, r) and the
// metrics target the conditional-mean contrast.
inline StudyResult run_study(const StudySpec& spec) {
  const FinitePopulation pop = resolve_population(spec.population);
  validate_study(spec, pop);
  const std::vector<double> truth =
      true_estimand(pop, spec.estimand.contrast);

  const long reps = spec.replications;
  const int n_strat = static_cast<int>(spec.strategies.size());
  std::vector<std::vector<detail::EvalRow>> rows(reps);
  std::vector<std::uint64_t> hashes(reps, 0);
  std::vector<std::string> errors(reps);

  auto run_one = [&](long r) {
    Rng rng(spec.base_seed, static_cast<std::uint64_t>(r));
    FinitePopulation redrawn;
    const FinitePopulation* realized = &pop;
    if (spec.population.fresh_noise) {
      redrawn = pop;
      add_outcome_noise(redrawn, *spec.population.dgp,
                        mix_keys(spec.population.seed,
                                 static_cast<std::uint64_t>(r)));
      realized = &redrawn;
    }
    const ExperimentLog log = simulate_experiment(*realized, spec.design, rng);
    hashes[r] = detail::assignment_hash(log);
    detail::ReplicationCache cache;
    cache.log = &log;
    auto& out = rows[r];
    out.reserve(n_strat);
    for (const auto& s : spec.strategies)
      out.push_back(detail::eval_strategy(s, log, spec.estimand, truth,
                                          spec.alpha, cache));
  };

  const int workers =
      static_cast<int>(std::min<long>(spec.parallelism, reps));
  if (workers <= 1) {
    for (long r = 0; r < reps; ++r) {
      try {
        run_one(r);
      } catch (const std::exception& e) {
        errors[r] = e.what();
        break;
      }
    }
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        long r;
        while ((r = next.fetch_add(1)) < reps) {
          try {
            run_one(r);
          } catch (const std::exception& e) {
            errors[r] = e.what();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (long r = 0; r < reps; ++r)
    if (!errors[r].empty())
      throw numeric_error("replication " + std::to_string(r) +
                          " failed: " + errors[r]);

  const int q_n = spec.estimand.contrast.rows;
  StudyResult res;
  res.truth = truth;
  res.assignment_hashes = std::move(hashes);
  res.deviations.assign(n_strat, {});
  for (int s = 0; s < n_strat; ++s) {
    auto& devs = res.deviations[s];
    devs.resize(reps);
    StrategyMetrics m;
    m.label = spec.strategies[s].label;
    m.replications = reps;
    m.bias.assign(q_n, 0.0);
    m.mse.assign(q_n, 0.0);
    m.skewness.assign(q_n, 0.0);
    long covered = 0;
    double length_sum = 0.0;
    for (long r = 0; r < reps; ++r) {
      devs[r].resize(q_n);
      for (int q = 0; q < q_n; ++q) {
        const double d = rows[r][s].tau[q] - truth[q];
        devs[r][q] = d;
        m.bias[q] += d;
        m.mse[q] += d * d;
      }
      covered += rows[r][s].covered ? 1 : 0;
      length_sum += rows[r][s].length;
    }
    for (int q = 0; q < q_n; ++q) {
      m.bias[q] /= reps;
      m.mse[q] /= reps;
    }
    for (int q = 0; q < q_n; ++q) {
      double m2 = 0.0, m3 = 0.0;
      for (long r = 0; r < reps; ++r) {
        const double cdev = devs[r][q] - m.bias[q];
        m2 += cdev * cdev;
        m3 += cdev * cdev * cdev;
      }
      m2 /= reps;
      m3 /= reps;
      m.skewness[q] = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    }
    m.coverage = static_cast<double>(covered) / reps;
    m.avg_ci_length = length_sum / reps;
    res.strategies.push_back(std::move(m));
  }
  return res;
}

struct SrdComparison {
  StudyResult rerandomized;
  StudyResult complete;
  double rmse_reduction_pct = 0.0;
  double length_reduction_pct = 0.0;
};

// Head-to-head of the rerandomized block design (inverse-weighted estimator,
// design-based intervals) against within-block complete randomization
// (difference in means, Welch intervals) on the same population and seeds.
inline SrdComparison run_srd_comparison(const StudySpec& spec) {
  if (!std::holds_alternative<SequentialRerandomizationDesign>(spec.design))
    throw config_error("comparison mode requires a rerandomization design");

  StudySpec srd = spec;
  srd.strategies = {StrategySpec{StrategySpec::Kind::Ipw, "ipw", ZeroModel{},
                                 CovarianceKind::VhatIpw, 2, false}};

  StudySpec crd = spec;
  auto base = std::get<SequentialRerandomizationDesign>(spec.design);
  crd.design = SequentialRerandomizationDesign{
      std::numeric_limits<int>::max() / 2, base.treated_per_block};
  crd.strategies = {StrategySpec{StrategySpec::Kind::SampleMean, "sm",
                                 ZeroModel{}, CovarianceKind::VhatAipw, 2,
                                 false}};

  SrdComparison cmp;
  cmp.rerandomized = run_study(srd);
  cmp.complete = run_study(crd);

  const double srd_rmse = std::sqrt(cmp.rerandomized.strategies[0].mse[0]);
  const double crd_rmse = std::sqrt(cmp.complete.strategies[0].mse[0]);
  const double srd_len = cmp.rerandomized.strategies[0].avg_ci_length;
  const double crd_len = cmp.complete.strategies[0].avg_ci_length;
  cmp.rmse_reduction_pct = 100.0 * (1.0 - srd_rmse / crd_rmse);
  cmp.length_reduction_pct = 100.0 * (1.0 - srd_len / crd_len);
  return cmp;
}

// ---- CSV emission -----------------------------------------------------------

inline void summarize_to_csv(const StudyResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open for writing: " + path);
  out << "strategy,metric,value\n";
  auto emit = [&](const std::string& label, const std::string& metric,
                  double value) {
    out << label << "," << metric << "," << detail::format_sig17(value) << "\n";
  };
  const int q_n = static_cast<int>(res.truth.size());
  for (const auto& s : res.strategies) {
    for (int q = 0; q < q_n; ++q) {
      const std::string suffix = q_n > 1 ? "_" + std::to_string(q + 1) : "";
      emit(s.label, "bias" + suffix, s.bias[q]);
      emit(s.label, "mse" + suffix, s.mse[q]);
      emit(s.label, "skewness" + suffix, s.skewness[q]);
    }
    emit(s.label, "coverage", s.coverage);
    emit(s.label, "avg_ci_length", s.avg_ci_length);
    emit(s.label, "replications", static_cast<double>(s.replications));
  }
  if (!out) throw config_error("failed writing: " + path);
}

inline void emit_plot_data(const StudyResult& res,
                           const std::vector<std::string>& labels,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open for writing: " + path);
  out << "strategy,replication,deviation\n";
  const int q_n = static_cast<int>(res.truth.size());
  for (size_t s = 0; s < res.deviations.size(); ++s) {
    for (size_t r = 0; r < res.deviations[s].size(); ++r) {
      for (int q = 0; q < q_n; ++q) {
        const std::string label =
            q_n > 1 ? labels[s] + "_" + std::to_string(q + 1) : labels[s];
        out << label << "," << r << ","
            << detail::format_sig17(res.deviations[s][r][q]) << "\n";
      }
    }
  }
  if (!out) throw config_error("failed writing: " + path);
}

}  // namespace adinf

#endif
