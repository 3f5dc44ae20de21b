#ifndef ADINF_EXPERIMENT_HPP
#define ADINF_EXPERIMENT_HPP

#include <vector>

#include "adinf/designs.hpp"
#include "adinf/errors.hpp"
#include "adinf/population.hpp"
#include "adinf/rng.hpp"

namespace adinf {

// Runs one assignment pass over the population. The log keeps the population's
// block structure; model predictions are left at zero because estimation
// strategies attach their own.
inline ExperimentLog simulate_experiment(const FinitePopulation& pop,
                                         const DesignSpec& design, Rng& rng) {
  validate_design(design, pop.num_arms, pop.block_sizes);
  const int t_n = pop.size();
  const int k_n = pop.num_arms;
  const int j_n = pop.num_covariates;

  ExperimentLog log;
  log.num_arms = k_n;
  log.num_covariates = j_n;
  log.block_sizes = pop.block_sizes;
  log.units.reserve(t_n);

  auto unit_x = [&](int t) {
    std::vector<double> x(j_n);
    for (int j = 0; j < j_n; ++j) x[j] = pop.covariate(t, j);
    return x;
  };

  if (is_block_design(design)) {
    if (!pop.blocked())
      throw config_error("block design requires a blocked population");
    int offset = 0;
    for (int g = 0; g < static_cast<int>(pop.block_sizes.size()); ++g) {
      const int n = pop.block_sizes[g];
      const double* block_x =
          j_n > 0 ? pop.covariates.data() + static_cast<size_t>(offset) * j_n
                  : nullptr;
      BlockHistoryView hv{&log, offset, g, block_x, n};
      const BlockAssignmentProbs bap = block_assignment_probs(design, hv);
      const std::vector<int>& arms = sample_assignment(bap, rng);
      for (int i = 0; i < n; ++i) {
        UnitRecord u;
        u.x = unit_x(offset + i);
        u.z = arms[i];
        u.y = pop.outcome(offset + i, u.z);
        u.probs.resize(k_n);
        for (int z = 1; z <= k_n; ++z) u.probs[z - 1] = bap.marginal(i, z);
        u.mhat.assign(k_n, 0.0);
        log.units.push_back(std::move(u));
      }
      offset += n;
    }
  } else {
    for (int t = 0; t < t_n; ++t) {
      std::vector<double> x = unit_x(t);
      HistoryView hv{&log, t, x.data()};
      const AssignmentProbs ap = assignment_probs(design, hv);
      UnitRecord u;
      u.z = sample_assignment(ap, rng);
      u.y = pop.outcome(t, u.z);
      u.x = std::move(x);
      u.probs = ap.probs;
      u.mhat.assign(k_n, 0.0);
      log.units.push_back(std::move(u));
    }
  }
  log.validate();
  return log;
}

}  // namespace adinf

#endif
