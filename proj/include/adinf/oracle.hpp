#ifndef ADINF_ORACLE_HPP
#define ADINF_ORACLE_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adinf/designs.hpp"
#include "adinf/errors.hpp"
#include "adinf/estimators.hpp"
#include "adinf/linalg.hpp"
#include "adinf/outcome_models.hpp"
#include "adinf/population.hpp"

namespace adinf {

struct EnumerationOptions {
  long max_paths = 1L << 20;
  bool reverse_order = false;  // visit arms/candidates in reverse, for checking
                               // that results do not depend on traversal order
};

namespace detail {

// Depth-first walk over every assignment path with its exact probability.
// The log buffer is preallocated; records before the recursion depth are
// always complete, which is all HistoryView consumers may read.
class PathWalker {
 public:
  PathWalker(const FinitePopulation& pop, const DesignSpec& design,
             const OutcomeModelSpec& model, const EnumerationOptions& opts)
      : pop_(pop), design_(design), model_(model), opts_(opts) {
    validate_design(design, pop.num_arms, pop.block_sizes);
    const int t_n = pop.size();
    const int k_n = pop.num_arms;
    const int j_n = pop.num_covariates;
    log_.num_arms = k_n;
    log_.num_covariates = j_n;
    log_.block_sizes = pop.block_sizes;
    log_.units.resize(t_n);
    for (int t = 0; t < t_n; ++t) {
      auto& u = log_.units[t];
      u.x.resize(j_n);
      for (int j = 0; j < j_n; ++j) u.x[j] = pop.covariate(t, j);
      u.probs.assign(k_n, 0.0);
      u.mhat.assign(k_n, 0.0);
    }
  }

  long run(const std::function<void(const ExperimentLog&, double)>& cb) {
    cb_ = &cb;
    paths_ = 0;
    if (is_block_design(design_)) {
      if (!pop_.blocked())
        throw config_error("block design requires a blocked population");
      walk_block(0, 0, 1.0);
    } else {
      double est = 1.0;
      for (int t = 0; t < pop_.size(); ++t) est *= pop_.num_arms;
      if (est > static_cast<double>(opts_.max_paths))
        throw numeric_error("enumeration support exceeds path cap");
      walk_unit(0, 1.0);
    }
    return paths_;
  }

 private:
  void leaf(double p) {
    if (++paths_ > opts_.max_paths)
      throw numeric_error("enumeration support exceeds path cap");
    (*cb_)(log_, p);
  }

  void walk_unit(int t, double p) {
    if (t == pop_.size()) {
      leaf(p);
      return;
    }
    auto& u = log_.units[t];
    HistoryView hv{&log_, t, u.x.data()};
    const AssignmentProbs ap = assignment_probs(design_, hv);
    const std::vector<double> mh = predict_adaptive(model_, hv);
    u.probs = ap.probs;
    u.mhat = mh;
    const int k_n = pop_.num_arms;
    for (int step = 0; step < k_n; ++step) {
      const int zi = opts_.reverse_order ? k_n - 1 - step : step;
      u.z = zi + 1;
      u.y = pop_.outcome(t, u.z);
      walk_unit(t + 1, p * ap.probs[zi]);
    }
  }

  void walk_block(int g, int offset, double p) {
    if (g == static_cast<int>(pop_.block_sizes.size())) {
      leaf(p);
      return;
    }
    const int n = pop_.block_sizes[g];
    const int j_n = pop_.num_covariates;
    const double* block_x =
        j_n > 0 ? pop_.covariates.data() + static_cast<size_t>(offset) * j_n
                : nullptr;
    BlockHistoryView hv{&log_, offset, g, block_x, n};
    const BlockAssignmentProbs bap = block_assignment_probs(design_, hv);
    for (int i = 0; i < n; ++i) {
      auto& u = log_.units[offset + i];
      HistoryView unit_hv{&log_, offset, u.x.data()};
      u.mhat = predict_adaptive(model_, unit_hv);
      for (int z = 1; z <= pop_.num_arms; ++z)
        u.probs[z - 1] = bap.marginal(i, z);
    }
    const int m = static_cast<int>(bap.support.size());
    for (int step = 0; step < m; ++step) {
      const int c = opts_.reverse_order ? m - 1 - step : step;
      for (int i = 0; i < n; ++i) {
        auto& u = log_.units[offset + i];
        u.z = bap.support[c][i];
        u.y = pop_.outcome(offset + i, u.z);
      }
      walk_block(g + 1, offset + n, p * bap.joint[c]);
    }
  }

  const FinitePopulation& pop_;
  const DesignSpec& design_;
  const OutcomeModelSpec& model_;
  EnumerationOptions opts_;
  ExperimentLog log_;
  const std::function<void(const ExperimentLog&, double)>* cb_ = nullptr;
  long paths_ = 0;
};

}  // namespace detail

inline long enumerate_paths(
    const FinitePopulation& pop, const DesignSpec& design,
    const OutcomeModelSpec& model, const EnumerationOptions& opts,
    const std::function<void(const ExperimentLog&, double)>& cb) {
  detail::PathWalker walker(pop, design, model, opts);
  return walker.run(cb);
}

struct EnumerationResult {
  long num_paths = 0;
  double total_prob = 0.0;
  std::vector<double> mean;
  Matrix cov;
};

// Exact mean and covariance of an arbitrary path statistic. Two passes:
// the second accumulates centered outer products, avoiding the cancellation
// of a raw second-moment formula.
inline EnumerationResult enumerate_statistic(
    const FinitePopulation& pop, const DesignSpec& design,
    const OutcomeModelSpec& model,
    const std::function<std::vector<double>(const ExperimentLog&)>& stat,
    const EnumerationOptions& opts = {}) {
  EnumerationResult res;
  KahanSum prob;
  std::optional<KahanVec> mean_acc;
  res.num_paths = enumerate_paths(pop, design, model, opts,
                                  [&](const ExperimentLog& log, double p) {
                                    const std::vector<double> s = stat(log);
                                    if (!mean_acc) mean_acc.emplace(s.size());
                                    mean_acc->add(s, p);
                                    prob.add(p);
                                  });
  if (!mean_acc) throw numeric_error("enumeration produced no paths");
  res.total_prob = prob.sum;
  res.mean = mean_acc->value();
  for (double& v : res.mean) v /= res.total_prob;

  const int dim = static_cast<int>(res.mean.size());
  std::vector<KahanSum> m2(static_cast<size_t>(dim) * dim);
  enumerate_paths(pop, design, model, opts,
                  [&](const ExperimentLog& log, double p) {
                    const std::vector<double> s = stat(log);
                    for (int a = 0; a < dim; ++a)
                      for (int b = 0; b < dim; ++b)
                        m2[static_cast<size_t>(a) * dim + b].add(
                            p * (s[a] - res.mean[a]) * (s[b] - res.mean[b]));
                  });
  res.cov = Matrix(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b)
      res.cov.at(a, b) = m2[static_cast<size_t>(a) * dim + b].sum / res.total_prob;
  return res;
}

struct ExactConditionQuantities {
  std::vector<double> e_floor;        // min over histories and arms of e_t(z)
  std::vector<double> v_t;            // max over arms of Var(1/e_t(z))
  std::vector<double> omega_t;        // max over arms of Var(mhat_t(z))
  std::vector<double> outcome_bound;  // max over arms of |Y_t(z)|
  std::vector<double> model_bound;    // max over histories and arms of |mhat|
};

struct ExactMoments {
  Matrix inv_e_mean;                  // T x K, E[1/e_t(z)]
  Matrix inv_e_sq_mean;               // T x K, E[1/e_t(z)^2]
  Matrix a2_over_e_mean;              // T x K, E[(Y_t(z)-mhat_t(z))^2/e_t(z)]
  std::vector<Matrix> residual_cross; // per t: E[(Y_t-mhat_t)(Y_t-mhat_t)']
  Matrix mhat_mean;                   // T x K
  Matrix mhat_sq_mean;                // T x K
  ExactConditionQuantities conditions;
  long num_paths = 0;
  double total_prob = 0.0;
};

// Per-step exact moments for unit-level designs, accumulated over complete
// paths (each path weight multiplies its prefix's contribution, which sums
// to the history expectation).
inline ExactMoments exact_moments(const FinitePopulation& pop,
                                  const DesignSpec& design,
                                  const OutcomeModelSpec& model,
                                  const EnumerationOptions& opts = {}) {
  if (is_block_design(design))
    throw config_error("closed-form moments are defined for unit-level designs");
  const int t_n = pop.size();
  const int k_n = pop.num_arms;

  std::vector<KahanSum> inv_e(static_cast<size_t>(t_n) * k_n),
      inv_e2(static_cast<size_t>(t_n) * k_n),
      a2e(static_cast<size_t>(t_n) * k_n),
      mh1(static_cast<size_t>(t_n) * k_n), mh2(static_cast<size_t>(t_n) * k_n);
  std::vector<KahanSum> cross(static_cast<size_t>(t_n) * k_n * k_n);
  KahanSum prob;

  ExactMoments em;
  em.conditions.e_floor.assign(t_n, 1.0);
  em.conditions.model_bound.assign(t_n, 0.0);

  em.num_paths = enumerate_paths(
      pop, design, model, opts, [&](const ExperimentLog& log, double p) {
        prob.add(p);
        for (int t = 0; t < t_n; ++t) {
          const auto& u = log.units[t];
          std::vector<double> a(k_n);
          for (int z = 0; z < k_n; ++z) {
            const double e = u.probs[z];
            const double m = u.mhat[z];
            a[z] = pop.outcome(t, z + 1) - m;
            const size_t at = static_cast<size_t>(t) * k_n + z;
            inv_e[at].add(p / e);
            inv_e2[at].add(p / (e * e));
            a2e[at].add(p * a[z] * a[z] / e);
            mh1[at].add(p * m);
            mh2[at].add(p * m * m);
            em.conditions.e_floor[t] = std::min(em.conditions.e_floor[t], e);
            em.conditions.model_bound[t] =
                std::max(em.conditions.model_bound[t], std::fabs(m));
          }
          for (int za = 0; za < k_n; ++za)
            for (int zb = 0; zb < k_n; ++zb)
              cross[(static_cast<size_t>(t) * k_n + za) * k_n + zb].add(
                  p * a[za] * a[zb]);
        }
      });
  em.total_prob = prob.sum;

  em.inv_e_mean = Matrix(t_n, k_n);
  em.inv_e_sq_mean = Matrix(t_n, k_n);
  em.a2_over_e_mean = Matrix(t_n, k_n);
  em.mhat_mean = Matrix(t_n, k_n);
  em.mhat_sq_mean = Matrix(t_n, k_n);
  em.residual_cross.assign(t_n, Matrix(k_n, k_n));
  for (int t = 0; t < t_n; ++t) {
    for (int z = 0; z < k_n; ++z) {
      const size_t at = static_cast<size_t>(t) * k_n + z;
      em.inv_e_mean.at(t, z) = inv_e[at].sum / em.total_prob;
      em.inv_e_sq_mean.at(t, z) = inv_e2[at].sum / em.total_prob;
      em.a2_over_e_mean.at(t, z) = a2e[at].sum / em.total_prob;
      em.mhat_mean.at(t, z) = mh1[at].sum / em.total_prob;
      em.mhat_sq_mean.at(t, z) = mh2[at].sum / em.total_prob;
    }
    for (int za = 0; za < k_n; ++za)
      for (int zb = 0; zb < k_n; ++zb)
        em.residual_cross[t].at(za, zb) =
            cross[(static_cast<size_t>(t) * k_n + za) * k_n + zb].sum /
            em.total_prob;
  }

  em.conditions.v_t.assign(t_n, 0.0);
  em.conditions.omega_t.assign(t_n, 0.0);
  em.conditions.outcome_bound.assign(t_n, 0.0);
  for (int t = 0; t < t_n; ++t) {
    for (int z = 0; z < k_n; ++z) {
      const double ve = em.inv_e_sq_mean.at(t, z) -
                        em.inv_e_mean.at(t, z) * em.inv_e_mean.at(t, z);
      const double vm = em.mhat_sq_mean.at(t, z) -
                        em.mhat_mean.at(t, z) * em.mhat_mean.at(t, z);
      em.conditions.v_t[t] = std::max(em.conditions.v_t[t], std::max(ve, 0.0));
      em.conditions.omega_t[t] =
          std::max(em.conditions.omega_t[t], std::max(vm, 0.0));
      em.conditions.outcome_bound[t] = std::max(
          em.conditions.outcome_bound[t], std::fabs(pop.outcome(t, z + 1)));
    }
  }
  return em;
}

// Closed-form design covariance of the arm-mean vector under inverse-weighted
// pseudo-outcomes, assembled from exact moments; multiply by 1/T for the
// covariance of the estimator.
inline Matrix exact_vipw(const FinitePopulation& pop, const ExactMoments& em) {
  const int t_n = pop.size();
  const int k_n = pop.num_arms;
  Matrix v(k_n, k_n);
  for (int t = 0; t < t_n; ++t) {
    for (int z = 0; z < k_n; ++z) {
      const double y = pop.outcome(t, z + 1);
      v.at(z, z) += em.inv_e_mean.at(t, z) * y * y;
    }
    for (int za = 0; za < k_n; ++za)
      for (int zb = 0; zb < k_n; ++zb)
        v.at(za, zb) -= pop.outcome(t, za + 1) * pop.outcome(t, zb + 1);
  }
  for (auto& x : v.a) x /= t_n;
  return v;
}

// Augmented analog built from model residuals.
inline Matrix exact_vaipw(const FinitePopulation& pop, const ExactMoments& em) {
  const int t_n = pop.size();
  const int k_n = pop.num_arms;
  Matrix v(k_n, k_n);
  for (int t = 0; t < t_n; ++t) {
    for (int z = 0; z < k_n; ++z) v.at(z, z) += em.a2_over_e_mean.at(t, z);
    for (int za = 0; za < k_n; ++za)
      for (int zb = 0; zb < k_n; ++zb)
        v.at(za, zb) -= em.residual_cross[t].at(za, zb);
  }
  for (auto& x : v.a) x /= t_n;
  return v;
}

// (G-1)^{-1} sum over units (or groups) of centered outcome outer products.
inline Matrix population_dispersion(const FinitePopulation& pop) {
  const int t_n = pop.size();
  const int k_n = pop.num_arms;
  std::vector<double> mean(k_n, 0.0);
  for (int t = 0; t < t_n; ++t)
    for (int z = 0; z < k_n; ++z) mean[z] += pop.outcome(t, z + 1);
  for (double& v : mean) v /= t_n;
  Matrix s(k_n, k_n);
  for (int t = 0; t < t_n; ++t)
    for (int za = 0; za < k_n; ++za)
      for (int zb = 0; zb < k_n; ++zb)
        s.at(za, zb) += (pop.outcome(t, za + 1) - mean[za]) *
                        (pop.outcome(t, zb + 1) - mean[zb]);
  for (auto& v : s.a) v /= (t_n - 1);
  return s;
}

// Group mean outcome vectors, rows indexed by group.
inline Matrix group_mean_outcomes(const FinitePopulation& pop) {
  const std::vector<int> sizes =
      pop.blocked() ? pop.block_sizes : std::vector<int>(pop.size(), 1);
  const int g_n = static_cast<int>(sizes.size());
  const int k_n = pop.num_arms;
  Matrix gm(g_n, k_n);
  int offset = 0;
  for (int g = 0; g < g_n; ++g) {
    for (int i = 0; i < sizes[g]; ++i)
      for (int z = 0; z < k_n; ++z)
        gm.at(g, z) += pop.outcome(offset + i, z + 1);
    for (int z = 0; z < k_n; ++z) gm.at(g, z) /= sizes[g];
    offset += sizes[g];
  }
  return gm;
}

// sum_g w_g (Ybar_g - Ybar)(Ybar_g - Ybar)' with Ybar the population mean.
inline Matrix weighted_group_dispersion(const FinitePopulation& pop,
                                        const std::vector<double>& w) {
  const Matrix gm = group_mean_outcomes(pop);
  const int k_n = pop.num_arms;
  std::vector<double> mean(k_n, 0.0);
  for (int t = 0; t < pop.size(); ++t)
    for (int z = 0; z < k_n; ++z) mean[z] += pop.outcome(t, z + 1);
  for (double& v : mean) v /= pop.size();
  Matrix s(k_n, k_n);
  for (int g = 0; g < gm.rows; ++g)
    for (int za = 0; za < k_n; ++za)
      for (int zb = 0; zb < k_n; ++zb)
        s.at(za, zb) +=
            w[g] * (gm.at(g, za) - mean[za]) * (gm.at(g, zb) - mean[zb]);
  return s;
}

// ---- certification suite -------------------------------------------------------

struct IdentityCheck {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.a.size(); ++i)
    m = std::max(m, std::fabs(a.a[i] - b.a[i]));
  return m;
}

inline std::vector<double> flatten(const Matrix& m) { return m.a; }

inline FinitePopulation toy_unit_population() {
  FinitePopulation pop;
  pop.num_arms = 2;
  pop.num_covariates = 0;
  pop.outcomes = {4, 1, 2, 5, 3, 3};
  return pop;
}

inline FinitePopulation toy_efron_population() {
  FinitePopulation pop;
  pop.num_arms = 2;
  pop.num_covariates = 1;
  pop.outcomes = {4, 1, 2, 5, 3, 3, 1, 2};
  pop.covariates = {1, -1, 2, -2};
  return pop;
}

inline FinitePopulation toy_block_population() {
  FinitePopulation pop;
  pop.num_arms = 2;
  pop.num_covariates = 1;
  pop.covariates = {10, -10, 1, 2};
  pop.outcomes = {10, 13, -10, -7, 1, 4, 2, 5};
  pop.block_sizes = {2, 2};
  return pop;
}

inline FinitePopulation toy_unequal_block_population() {
  FinitePopulation pop;
  pop.num_arms = 2;
  pop.num_covariates = 1;
  pop.block_sizes = {3, 4, 5};
  const int t_n = 12;
  pop.covariates.resize(t_n);
  pop.outcomes.resize(2 * t_n);
  for (int t = 0; t < t_n; ++t) {
    pop.covariates[t] = (t % 5) - 2;
    pop.outcomes[2 * t + 0] = 2 + (t % 3);
    pop.outcomes[2 * t + 1] = 5 + (t % 4) - 2 * (t % 2);
  }
  return pop;
}

inline FinitePopulation toy_equal_block_population() {
  FinitePopulation pop;
  pop.num_arms = 2;
  pop.num_covariates = 1;
  pop.block_sizes = {2, 2, 2, 2};
  const int t_n = 8;
  pop.covariates.resize(t_n);
  pop.outcomes.resize(2 * t_n);
  for (int t = 0; t < t_n; ++t) {
    pop.covariates[t] = (t % 4) - 1.5;
    pop.outcomes[2 * t + 0] = 1 + (t % 2) + 0.5 * (t % 3);
    pop.outcomes[2 * t + 1] = 4 - (t % 3);
  }
  return pop;
}

}  // namespace detail

// Exact finite-sample identities checked by full enumeration against the
// production estimator code. Every identity here holds with equality, so the
// tolerances are numerical only.
inline std::vector<IdentityCheck> certify_suite() {
  std::vector<IdentityCheck> checks;
  auto record = [&](const std::string& name, double dev, double tol) {
    checks.push_back({name, dev, tol, dev <= tol});
  };
  const double tol = 1e-9;

  const OutcomeModelSpec zero = ZeroModel{};
  const OutcomeModelSpec rmean = RunningMeanModel{};

  {
    const FinitePopulation pop = detail::toy_unit_population();
    const DesignSpec design = EpsilonGreedyDesign{
        1, ExploreSchedule{ExploreSchedule::Kind::Constant, 0.2}};
    const std::vector<double> truth = mean_outcomes(pop);
    const Matrix s = population_dispersion(pop);

    auto ipw_stat = [](const ExperimentLog& log) {
      return arm_estimates(pseudo_outcomes(log), EstimatorKind::Ipw);
    };
    const EnumerationResult ipw = enumerate_statistic(pop, design, zero, ipw_stat);
    record("inverse_weighted_mean_unbiased",
           detail::max_abs_diff(ipw.mean, truth), tol);

    const ExactMoments em0 = exact_moments(pop, design, zero);
    Matrix vipw = exact_vipw(pop, em0);
    Matrix vipw_scaled = vipw;
    for (auto& v : vipw_scaled.a) v /= pop.size();
    record("inverse_weighted_cov_closed_form",
           detail::max_abs_diff(ipw.cov, vipw_scaled), tol);

    auto aipw_stat = [](const ExperimentLog& log) {
      return arm_estimates(pseudo_outcomes(log), EstimatorKind::Aipw);
    };
    const EnumerationResult aipw =
        enumerate_statistic(pop, design, rmean, aipw_stat);
    record("augmented_mean_unbiased", detail::max_abs_diff(aipw.mean, truth),
           tol);

    const ExactMoments em1 = exact_moments(pop, design, rmean);
    Matrix vaipw = exact_vaipw(pop, em1);
    for (auto& v : vaipw.a) v /= pop.size();
    record("augmented_cov_closed_form", detail::max_abs_diff(aipw.cov, vaipw),
           tol);

    auto vhat_ipw_stat = [](const ExperimentLog& log) {
      return detail::flatten(
          covariance_estimate(pseudo_outcomes(log), CovarianceKind::VhatIpw));
    };
    const EnumerationResult ev =
        enumerate_statistic(pop, design, zero, vhat_ipw_stat);
    Matrix expect = exact_vipw(pop, em0);
    for (size_t i = 0; i < expect.a.size(); ++i) expect.a[i] += s.a[i];
    record("inverse_weighted_cov_estimator_bias",
           detail::max_abs_diff(ev.mean, expect.a), tol);

    auto vhat_aipw_stat = [](const ExperimentLog& log) {
      return detail::flatten(
          covariance_estimate(pseudo_outcomes(log), CovarianceKind::VhatAipw));
    };
    const EnumerationResult eva =
        enumerate_statistic(pop, design, rmean, vhat_aipw_stat);
    Matrix expect_a = exact_vaipw(pop, em1);
    for (size_t i = 0; i < expect_a.a.size(); ++i) expect_a.a[i] += s.a[i];
    record("augmented_cov_estimator_bias",
           detail::max_abs_diff(eva.mean, expect_a.a), tol);

    auto gap_stat = [](const ExperimentLog& log) {
      const PseudoOutcomeTrace tr = pseudo_outcomes(log);
      double m = 0.0;
      for (size_t i = 0; i < tr.unit_ipw.size(); ++i)
        m = std::max(m, std::fabs(tr.unit_aipw[i] - tr.unit_ipw[i]));
      return std::vector<double>{m};
    };
    const EnumerationResult gap = enumerate_statistic(pop, design, zero, gap_stat);
    record("zero_model_reduces_to_inverse_weighting", gap.mean[0], 0.0);
  }

  {
    const FinitePopulation pop = detail::toy_efron_population();
    const DesignSpec design = EfronBiasedCoinDesign{2.0 / 3.0};
    auto ipw_stat = [](const ExperimentLog& log) {
      return arm_estimates(pseudo_outcomes(log), EstimatorKind::Ipw);
    };
    const EnumerationResult ipw = enumerate_statistic(pop, design, zero, ipw_stat);
    record("biased_coin_mean_unbiased",
           detail::max_abs_diff(ipw.mean, mean_outcomes(pop)), tol);
  }

  {
    const FinitePopulation pop = detail::toy_block_population();
    const DesignSpec design = SequentialRerandomizationDesign{2, 1};
    auto aipw_stat = [](const ExperimentLog& log) {
      return arm_estimates(pseudo_outcomes(log), EstimatorKind::Aipw);
    };
    const EnumerationResult aipw =
        enumerate_statistic(pop, design, rmean, aipw_stat);
    record("block_augmented_mean_unbiased",
           detail::max_abs_diff(aipw.mean, mean_outcomes(pop)), tol);
  }

  {
    const FinitePopulation pop = detail::toy_block_population();
    const DesignSpec design = PairwiseSequentialDesign{0.75};
    auto ipw_stat = [](const ExperimentLog& log) {
      return arm_estimates(pseudo_outcomes(log), EstimatorKind::Ipw);
    };
    const EnumerationResult ipw = enumerate_statistic(pop, design, zero, ipw_stat);
    record("paired_design_mean_unbiased",
           detail::max_abs_diff(ipw.mean, mean_outcomes(pop)), tol);
  }

  {
    const FinitePopulation pop = detail::toy_unequal_block_population();
    const DesignSpec design = SequentialRerandomizationDesign{2, 1};
    auto est_stat = [](const ExperimentLog& log) {
      return arm_estimates(pseudo_outcomes(log), EstimatorKind::Aipw);
    };
    const EnumerationResult est =
        enumerate_statistic(pop, design, rmean, est_stat);
    record("unequal_block_mean_unbiased",
           detail::max_abs_diff(est.mean, mean_outcomes(pop)), tol);

    auto vb_stat = [](const ExperimentLog& log) {
      return detail::flatten(
          covariance_estimate(pseudo_outcomes(log), CovarianceKind::VhatAipwB));
    };
    const EnumerationResult evb =
        enumerate_statistic(pop, design, rmean, vb_stat);
    const std::vector<double> b = bt_weights(pop.block_sizes);
    const int g_n = static_cast<int>(pop.block_sizes.size());
    Matrix rhs = est.cov;
    for (auto& v : rhs.a) v *= g_n;
    const Matrix disp = weighted_group_dispersion(pop, b);
    for (size_t i = 0; i < rhs.a.size(); ++i) rhs.a[i] += disp.a[i];
    record("size_weighted_cov_estimator_bias",
           detail::max_abs_diff(evb.mean, rhs.a), tol);
  }

  {
    const FinitePopulation pop = detail::toy_equal_block_population();
    const DesignSpec design = SequentialRerandomizationDesign{3, 1};
    auto collapse_stat = [](const ExperimentLog& log) {
      const PseudoOutcomeTrace tr = pseudo_outcomes(log);
      const Matrix a = covariance_estimate(tr, CovarianceKind::VhatAipw);
      const Matrix b = covariance_estimate(tr, CovarianceKind::VhatAipwB);
      return std::vector<double>{detail::max_abs_diff(a, b)};
    };
    const EnumerationResult collapse =
        enumerate_statistic(pop, design, rmean, collapse_stat);
    record("equal_blocks_collapse_size_weights", collapse.mean[0], 0.0);
  }

  return checks;
}

}  // namespace adinf

#endif
