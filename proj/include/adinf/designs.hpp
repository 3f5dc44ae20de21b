#ifndef ADINF_DESIGNS_HPP
#define ADINF_DESIGNS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "adinf/errors.hpp"
#include "adinf/linalg.hpp"
#include "adinf/population.hpp"
#include "adinf/rng.hpp"

namespace adinf {

// Read-only view of everything a design may condition on when assigning the
// next unit: completed records plus the current unit's covariates.
struct HistoryView {
  const ExperimentLog* log = nullptr;
  int units_done = 0;
  const double* x_current = nullptr;  // num_covariates values, may be null if J=0
};

// Block analog: completed groups plus the whole incoming block's covariates.
struct BlockHistoryView {
  const ExperimentLog* log = nullptr;
  int units_done = 0;   // units inside completed groups
  int groups_done = 0;
  const double* block_x = nullptr;  // block_n x J row-major
  int block_n = 0;
};

struct AssignmentProbs {
  std::vector<double> probs;

  void validate() const {
    if (probs.empty()) throw numeric_error("assignment probabilities empty");
    double sum = 0.0;
    for (double p : probs) {
      if (!(p > 0.0 && p < 1.0))
        throw numeric_error("assignment probability outside (0,1)");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw numeric_error("assignment probabilities do not sum to one");
  }
};

struct BlockAssignmentProbs {
  int block_n = 0;
  int num_arms = 0;
  std::vector<std::vector<int>> support;  // candidate arm vectors, 1-based arms
  std::vector<double> joint;              // one probability per candidate
  std::vector<double> marginals;          // block_n x num_arms row-major

  double marginal(int i, int arm) const {
    return marginals[static_cast<size_t>(i) * num_arms + (arm - 1)];
  }

  void validate() const {
    if (support.empty() || support.size() != joint.size())
      throw numeric_error("block assignment support malformed");
    double sum = 0.0;
    for (double p : joint) {
      if (!(p > 0.0))
        throw numeric_error("block assignment joint probability not positive");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw numeric_error("block joint probabilities do not sum to one");
    for (int i = 0; i < block_n; ++i) {
      double msum = 0.0;
      for (int z = 1; z <= num_arms; ++z) {
        const double m = marginal(i, z);
        if (!(m > 0.0 && m < 1.0))
          throw numeric_error("block marginal probability outside (0,1)");
        msum += m;
      }
      if (std::fabs(msum - 1.0) > 1e-12)
        throw numeric_error("block marginals do not sum to one");
    }
  }
};

// ---- design specifications -------------------------------------------------

struct ExploreSchedule {
  enum class Kind { Constant, PowerDecay };
  Kind kind = Kind::PowerDecay;
  double value = 0.0;  // epsilon for Constant, delta for PowerDecay

  // Exploration probability at 1-based time t, capped at 1/2 so the leading
  // arm always keeps the majority and every arm stays >= eps/K.
  double at(int t) const {
    double eps = kind == Kind::Constant ? value
                                        : std::pow(static_cast<double>(t), -0.5 + value);
    return std::min(eps, 0.5);
  }

  void validate() const {
    if (kind == Kind::Constant) {
      if (!(value > 0.0 && value <= 0.5))
        throw config_error("exploration probability must be in (0, 0.5]");
    } else {
      if (!(value < 0.5))
        throw config_error("exploration decay exponent requires delta < 1/2");
    }
  }
};

struct BernoulliDesign {
  std::vector<double> probs;
};

struct EpsilonGreedyDesign {
  int warmup = 50;
  ExploreSchedule explore;
};

struct EfronBiasedCoinDesign {
  double bias = 2.0 / 3.0;
};

struct PairwiseSequentialDesign {
  double bias = 0.75;
};

struct SequentialRerandomizationDesign {
  int accept_count = 7;
  int treated_per_block = 4;
};

using DesignSpec =
    std::variant<BernoulliDesign, EpsilonGreedyDesign, EfronBiasedCoinDesign,
                 PairwiseSequentialDesign, SequentialRerandomizationDesign>;

inline bool is_block_design(const DesignSpec& d) {
  return std::holds_alternative<PairwiseSequentialDesign>(d) ||
         std::holds_alternative<SequentialRerandomizationDesign>(d);
}

inline void validate_design(const DesignSpec& design, int num_arms,
                            const std::vector<int>& block_sizes) {
  if (const auto* b = std::get_if<BernoulliDesign>(&design)) {
    if (static_cast<int>(b->probs.size()) != num_arms)
      throw config_error("bernoulli probabilities must have one entry per arm");
    AssignmentProbs ap{b->probs};
    try {
      ap.validate();
    } catch (const numeric_error& e) {
      throw config_error(std::string("bernoulli design: ") + e.what());
    }
  } else if (const auto* g = std::get_if<EpsilonGreedyDesign>(&design)) {
    if (g->warmup < 1) throw config_error("epsilon-greedy warmup must be >= 1");
    g->explore.validate();
  } else if (const auto* e = std::get_if<EfronBiasedCoinDesign>(&design)) {
    if (num_arms != 2)
      throw config_error("biased-coin design requires exactly two arms");
    if (!(e->bias > 0.5 && e->bias < 1.0))
      throw config_error("biased-coin bias must lie in (1/2, 1)");
  } else if (const auto* p = std::get_if<PairwiseSequentialDesign>(&design)) {
    if (num_arms != 2)
      throw config_error("pairwise design requires exactly two arms");
    if (!(p->bias > 0.5 && p->bias < 1.0))
      throw config_error("pairwise bias must lie in (1/2, 1)");
    for (int n : block_sizes)
      if (n != 2) throw config_error("pairwise design requires blocks of exactly two units");
    if (block_sizes.empty())
      throw config_error("pairwise design requires a blocked population");
  } else if (const auto* s = std::get_if<SequentialRerandomizationDesign>(&design)) {
    if (num_arms != 2)
      throw config_error("rerandomization design requires exactly two arms");
    if (s->accept_count < 1) throw config_error("accept_count must be >= 1");
    if (block_sizes.empty())
      throw config_error("rerandomization design requires a blocked population");
    for (int n : block_sizes)
      if (s->treated_per_block < 1 || s->treated_per_block > n - 1)
        throw config_error("treated_per_block must lie in [1, block size - 1]");
  }
}

// ---- covariate imbalance ----------------------------------------------------

// d' Sigma^{-1} d with the documented ridge fallback when Sigma is singular.
inline double mahalanobis_imbalance(const std::vector<double>& treated_mean,
                                    const std::vector<double>& control_mean,
                                    Matrix pooled_cov) {
  const int j_n = static_cast<int>(treated_mean.size());
  if (static_cast<int>(control_mean.size()) != j_n || pooled_cov.rows != j_n ||
      pooled_cov.cols != j_n)
    throw numeric_error("mahalanobis_imbalance: dimension mismatch");
  if (j_n == 0) return 0.0;
  std::vector<double> d(j_n);
  bool all_zero = true;
  for (int j = 0; j < j_n; ++j) {
    d[j] = treated_mean[j] - control_mean[j];
    if (d[j] != 0.0) all_zero = false;
  }
  if (all_zero) return 0.0;
  double out = 0.0;
  if (quad_form_inv(pooled_cov, d, out, 1e-12)) return out;
  double trace = 0.0;
  for (int j = 0; j < j_n; ++j) trace += pooled_cov.at(j, j);
  const double ridge = 1e-8 * trace / j_n;
  if (!(ridge > 0.0)) return std::numeric_limits<double>::infinity();
  for (int j = 0; j < j_n; ++j) pooled_cov.at(j, j) += ridge;
  if (quad_form_inv(pooled_cov, d, out, 1e-12)) return out;
  return std::numeric_limits<double>::infinity();
}

namespace detail {

// Running treated/control covariate sums over completed units; arm 2 is the
// treated arm in the two-arm block designs.
struct RunningGroups {
  std::vector<double> treated_sum;
  std::vector<double> control_sum;
  int treated_n = 0;
  int control_n = 0;
};

inline RunningGroups running_groups(const ExperimentLog& log, int units_done,
                                    int j_n) {
  RunningGroups g;
  g.treated_sum.assign(j_n, 0.0);
  g.control_sum.assign(j_n, 0.0);
  for (int s = 0; s < units_done; ++s) {
    const auto& u = log.units[s];
    if (u.z == 2) {
      ++g.treated_n;
      for (int j = 0; j < j_n; ++j) g.treated_sum[j] += u.x[j];
    } else {
      ++g.control_n;
      for (int j = 0; j < j_n; ++j) g.control_sum[j] += u.x[j];
    }
  }
  return g;
}

// Sample covariance of covariates over completed units plus the incoming
// block; this is the scaling matrix for all imbalance scores at this block.
inline Matrix pooled_covariate_cov(const BlockHistoryView& hv, int j_n) {
  const int m = hv.units_done + hv.block_n;
  Matrix cov(j_n, j_n);
  if (j_n == 0 || m < 2) return cov;
  std::vector<double> mean(j_n, 0.0);
  for (int s = 0; s < hv.units_done; ++s)
    for (int j = 0; j < j_n; ++j) mean[j] += hv.log->units[s].x[j];
  for (int i = 0; i < hv.block_n; ++i)
    for (int j = 0; j < j_n; ++j) mean[j] += hv.block_x[static_cast<size_t>(i) * j_n + j];
  for (double& v : mean) v /= m;
  auto accumulate = [&](const double* x) {
    for (int a = 0; a < j_n; ++a)
      for (int b = 0; b < j_n; ++b)
        cov.at(a, b) += (x[a] - mean[a]) * (x[b] - mean[b]);
  };
  for (int s = 0; s < hv.units_done; ++s) accumulate(hv.log->units[s].x.data());
  for (int i = 0; i < hv.block_n; ++i)
    accumulate(hv.block_x + static_cast<size_t>(i) * j_n);
  for (auto& v : cov.a) v /= (m - 1);
  return cov;
}

// Imbalance score of one candidate treated-index set for the incoming block,
// given the running groups from earlier blocks.
inline double candidate_score(const RunningGroups& prior,
                              const BlockHistoryView& hv, int j_n,
                              const std::vector<bool>& treated_mask,
                              const Matrix& pooled_cov) {
  std::vector<double> tsum = prior.treated_sum;
  std::vector<double> csum = prior.control_sum;
  int tn = prior.treated_n;
  int cn = prior.control_n;
  for (int i = 0; i < hv.block_n; ++i) {
    const double* x = hv.block_x + static_cast<size_t>(i) * j_n;
    if (treated_mask[i]) {
      ++tn;
      for (int j = 0; j < j_n; ++j) tsum[j] += x[j];
    } else {
      ++cn;
      for (int j = 0; j < j_n; ++j) csum[j] += x[j];
    }
  }
  for (int j = 0; j < j_n; ++j) {
    tsum[j] /= tn;
    csum[j] /= cn;
  }
  return mahalanobis_imbalance(tsum, csum, pooled_cov);
}

inline void for_each_combination(int n, int k,
                                 const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

// ---- unit-level designs ------------------------------------------------------

inline AssignmentProbs assignment_probs(const DesignSpec& design,
                                        const HistoryView& hv) {
  const int k_n = hv.log->num_arms;
  const int j_n = hv.log->num_covariates;
  AssignmentProbs out;

  if (const auto* b = std::get_if<BernoulliDesign>(&design)) {
    out.probs = b->probs;
  } else if (const auto* g = std::get_if<EpsilonGreedyDesign>(&design)) {
    const int t1 = hv.units_done + 1;  // 1-based time of the current unit
    if (t1 <= g->warmup) {
      out.probs.assign(k_n, 1.0 / k_n);
    } else {
      std::vector<double> sum(k_n, 0.0);
      std::vector<int> count(k_n, 0);
      for (int s = 0; s < hv.units_done; ++s) {
        const auto& u = hv.log->units[s];
        sum[u.z - 1] += u.y;
        ++count[u.z - 1];
      }
      // unobserved arms never lead unless every arm is unobserved; ties go
      // to the lowest arm index
      int leader = 0;
      double best = -std::numeric_limits<double>::infinity();
      bool any_observed = false;
      for (int z = 0; z < k_n; ++z) {
        if (count[z] == 0) continue;
        any_observed = true;
        const double m = sum[z] / count[z];
        if (m > best) {
          best = m;
          leader = z;
        }
      }
      if (!any_observed) leader = 0;
      const double eps = g->explore.at(t1);
      out.probs.assign(k_n, eps / (k_n - 1));
      out.probs[leader] = 1.0 - eps;
    }
  } else if (const auto* e = std::get_if<EfronBiasedCoinDesign>(&design)) {
    // stratify on the sign pattern of the covariates; within the stratum
    // favor whichever arm is behind
    auto stratum = [&](const double* x) {
      std::uint32_t s = 0;
      for (int j = 0; j < j_n; ++j)
        if (x[j] >= 0.0) s |= (1u << j);
      return s;
    };
    const std::uint32_t mine = j_n > 0 ? stratum(hv.x_current) : 0;
    int d = 0;
    for (int s = 0; s < hv.units_done; ++s) {
      const auto& u = hv.log->units[s];
      if (j_n > 0 && stratum(u.x.data()) != mine) continue;
      d += (u.z == 1) ? 1 : -1;
    }
    if (d > 0)
      out.probs = {1.0 - e->bias, e->bias};
    else if (d < 0)
      out.probs = {e->bias, 1.0 - e->bias};
    else
      out.probs = {0.5, 0.5};
  } else {
    throw config_error("design is block-level; use block_assignment_probs");
  }

  out.validate();
  return out;
}

// ---- block-level designs ------------------------------------------------------

inline BlockAssignmentProbs block_assignment_probs(const DesignSpec& design,
                                                   const BlockHistoryView& hv) {
  const int j_n = hv.log->num_covariates;
  BlockAssignmentProbs out;
  out.block_n = hv.block_n;
  out.num_arms = hv.log->num_arms;

  const auto prior = detail::running_groups(*hv.log, hv.units_done, j_n);
  const Matrix pooled = detail::pooled_covariate_cov(hv, j_n);

  if (const auto* p = std::get_if<PairwiseSequentialDesign>(&design)) {
    if (hv.block_n != 2)
      throw config_error("pairwise design requires blocks of exactly two units");
    // candidate 0 treats the second unit, candidate 1 the first
    const std::vector<std::vector<int>> cands = {{1, 2}, {2, 1}};
    std::vector<double> score(2);
    for (int c = 0; c < 2; ++c) {
      std::vector<bool> mask = {cands[c][0] == 2, cands[c][1] == 2};
      score[c] = detail::candidate_score(prior, hv, j_n, mask, pooled);
    }
    double p0;
    if (score[0] < score[1])
      p0 = p->bias;
    else if (score[0] > score[1])
      p0 = 1.0 - p->bias;
    else
      p0 = 0.5;
    out.support = cands;
    out.joint = {p0, 1.0 - p0};
    out.marginals = {p0, 1.0 - p0, 1.0 - p0, p0};
  } else if (const auto* s = std::get_if<SequentialRerandomizationDesign>(&design)) {
    const int n = hv.block_n;
    const int k = s->treated_per_block;
    if (k < 1 || k > n - 1)
      throw config_error("treated_per_block must lie in [1, block size - 1]");
    std::vector<std::vector<int>> cand_treated;
    std::vector<double> score;
    detail::for_each_combination(n, k, [&](const std::vector<int>& idx) {
      std::vector<bool> mask(n, false);
      for (int i : idx) mask[i] = true;
      cand_treated.push_back(idx);
      score.push_back(detail::candidate_score(prior, hv, j_n, mask, pooled));
    });
    const int total = static_cast<int>(cand_treated.size());
    std::vector<int> order(total);
    for (int i = 0; i < total; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (score[a] != score[b]) return score[a] < score[b];
      return a < b;  // ties resolve by enumeration index for determinism
    });
    int accepted = std::min(s->accept_count, total);
    // grow the accepted set until every unit can land on both arms
    auto positivity_ok = [&](int m) {
      std::vector<int> treated_count(n, 0);
      for (int r = 0; r < m; ++r)
        for (int i : cand_treated[order[r]]) ++treated_count[i];
      for (int i = 0; i < n; ++i)
        if (treated_count[i] == 0 || treated_count[i] == m) return false;
      return true;
    };
    while (!positivity_ok(accepted) && accepted < total) ++accepted;
    if (!positivity_ok(accepted))
      throw numeric_error("rerandomization cannot satisfy positivity");

    std::vector<int> treated_count(n, 0);
    for (int r = 0; r < accepted; ++r) {
      const auto& idx = cand_treated[order[r]];
      std::vector<int> arms(n, 1);
      for (int i : idx) {
        arms[i] = 2;
        ++treated_count[i];
      }
      out.support.push_back(std::move(arms));
      out.joint.push_back(1.0 / accepted);
    }
    out.marginals.resize(static_cast<size_t>(n) * 2);
    for (int i = 0; i < n; ++i) {
      const double e2 = static_cast<double>(treated_count[i]) / accepted;
      out.marginals[2 * static_cast<size_t>(i) + 0] = 1.0 - e2;
      out.marginals[2 * static_cast<size_t>(i) + 1] = e2;
    }
  } else {
    throw config_error("design is unit-level; use assignment_probs");
  }

  out.validate();
  return out;
}

// ---- sampling -----------------------------------------------------------------

inline int sample_assignment(const AssignmentProbs& probs, Rng& rng) {
  return rng.categorical(probs.probs) + 1;
}

inline const std::vector<int>& sample_assignment(const BlockAssignmentProbs& probs,
                                                 Rng& rng) {
  return probs.support[rng.categorical(probs.joint)];
}

}  // namespace adinf

#endif
