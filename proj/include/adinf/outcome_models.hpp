#ifndef ADINF_OUTCOME_MODELS_HPP
#define ADINF_OUTCOME_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "adinf/designs.hpp"
#include "adinf/errors.hpp"
#include "adinf/linalg.hpp"
#include "adinf/population.hpp"

namespace adinf {

struct ZeroModel {};

struct RunningMeanModel {};

struct OnlineLeastSquaresModel {
  int min_obs = 0;  // 0 means the default of num_covariates + 2

  int effective_min_obs(int num_covariates) const {
    return min_obs > 0 ? min_obs : num_covariates + 2;
  }
};

struct KNearestNeighborsModel {
  int k = 5;
};

using OutcomeModelSpec = std::variant<ZeroModel, RunningMeanModel,
                                      OnlineLeastSquaresModel, KNearestNeighborsModel>;

inline void validate_model(const OutcomeModelSpec& model, int num_covariates) {
  if (const auto* ls = std::get_if<OnlineLeastSquaresModel>(&model)) {
    if (ls->min_obs != 0 && ls->min_obs < num_covariates + 2)
      throw config_error("min_obs must be at least the covariate count plus two");
  } else if (const auto* kn = std::get_if<KNearestNeighborsModel>(&model)) {
    if (kn->k < 1) throw config_error("neighbor count must be >= 1");
  }
}

namespace detail {

struct ArmSample {
  const double* x;
  double y;
};

// Regression of y on (1, x) via normal equations; declines when the sample is
// too small or the Gram matrix is near singular.
inline std::optional<std::vector<double>> fit_least_squares(
    const std::vector<ArmSample>& pts, int j_n, int min_obs) {
  if (static_cast<int>(pts.size()) < min_obs) return std::nullopt;
  const int d = j_n + 1;
  Matrix gram(d, d);
  std::vector<double> rhs(d, 0.0);
  std::vector<double> phi(d);
  for (const auto& p : pts) {
    phi[0] = 1.0;
    for (int j = 0; j < j_n; ++j) phi[j + 1] = p.x[j];
    for (int a = 0; a < d; ++a) {
      rhs[a] += phi[a] * p.y;
      for (int b = 0; b < d; ++b) gram.at(a, b) += phi[a] * phi[b];
    }
  }
  std::vector<double> beta;
  if (!solve_sym(gram, rhs, beta, 1e-10)) return std::nullopt;
  return beta;
}

inline double predict_linear(const std::vector<double>& beta, const double* x,
                             int j_n) {
  double v = beta[0];
  for (int j = 0; j < j_n; ++j) v += beta[j + 1] * x[j];
  return v;
}

inline double arm_mean(const std::vector<ArmSample>& pts) {
  if (pts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : pts) s += p.y;
  return s / static_cast<double>(pts.size());
}

// Mean outcome of the k nearest points by squared Euclidean distance, with
// ties broken by insertion index; fewer than k points means all of them.
inline double knn_mean(const std::vector<ArmSample>& pts, const double* x,
                       int j_n, int k) {
  const int n = static_cast<int>(pts.size());
  if (n == 0) return 0.0;
  if (n <= k) return arm_mean(pts);
  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (int j = 0; j < j_n; ++j) {
      const double dj = pts[i].x[j] - x[j];
      d2 += dj * dj;
    }
    dist[i] = {d2, i};
  }
  std::nth_element(dist.begin(), dist.begin() + k, dist.end());
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += pts[dist[i].second].y;
  return s / k;
}

inline double predict_one(const OutcomeModelSpec& model,
                          const std::vector<ArmSample>& pts, const double* x,
                          int j_n) {
  if (std::holds_alternative<ZeroModel>(model)) return 0.0;
  if (std::holds_alternative<RunningMeanModel>(model)) return arm_mean(pts);
  if (const auto* ls = std::get_if<OnlineLeastSquaresModel>(&model)) {
    auto beta = fit_least_squares(pts, j_n, ls->effective_min_obs(j_n));
    if (beta) return predict_linear(*beta, x, j_n);
    return arm_mean(pts);
  }
  const auto& kn = std::get<KNearestNeighborsModel>(model);
  return knn_mean(pts, x, j_n, kn.k);
}

}  // namespace detail

// Predictions for the current unit on every arm, using only completed records.
inline std::vector<double> predict_adaptive(const OutcomeModelSpec& model,
                                            const HistoryView& hv) {
  const int k_n = hv.log->num_arms;
  const int j_n = hv.log->num_covariates;
  std::vector<double> out(k_n, 0.0);
  if (std::holds_alternative<ZeroModel>(model)) return out;
  std::vector<std::vector<detail::ArmSample>> pts(k_n);
  for (int s = 0; s < hv.units_done; ++s) {
    const auto& u = hv.log->units[s];
    pts[u.z - 1].push_back({u.x.data(), u.y});
  }
  for (int z = 0; z < k_n; ++z)
    out[z] = detail::predict_one(model, pts[z], hv.x_current, j_n);
  return out;
}

// Full prefix-causal prediction matrix for a completed log; row t matches
// predict_adaptive at history length t.
inline Matrix adaptive_prediction_matrix(const ExperimentLog& log,
                                         const OutcomeModelSpec& model) {
  const int t_n = log.size();
  const int k_n = log.num_arms;
  const int j_n = log.num_covariates;
  Matrix out(t_n, k_n);
  if (std::holds_alternative<ZeroModel>(model)) return out;
  std::vector<std::vector<detail::ArmSample>> pts(k_n);
  for (int t = 0; t < t_n; ++t) {
    const auto& u = log.units[t];
    for (int z = 0; z < k_n; ++z)
      out.at(t, z) = detail::predict_one(model, pts[z], u.x.data(), j_n);
    pts[u.z - 1].push_back({u.x.data(), u.y});
  }
  return out;
}

struct AllUnitsPrediction {
  Matrix mhat;                 // T x K
  std::vector<bool> empty_arm; // arms with no assigned units predict zero
};

// Predictions fit on the whole log at once (not prefix-causal); used by the
// full-sample regression strategy.
inline AllUnitsPrediction predict_all_units(const ExperimentLog& log,
                                            const OutcomeModelSpec& model) {
  const int t_n = log.size();
  const int k_n = log.num_arms;
  const int j_n = log.num_covariates;
  AllUnitsPrediction out;
  out.mhat = Matrix(t_n, k_n);
  out.empty_arm.assign(k_n, false);
  std::vector<std::vector<detail::ArmSample>> pts(k_n);
  for (const auto& u : log.units) pts[u.z - 1].push_back({u.x.data(), u.y});
  for (int z = 0; z < k_n; ++z)
    if (pts[z].empty() && !std::holds_alternative<ZeroModel>(model))
      out.empty_arm[z] = true;
  for (int t = 0; t < t_n; ++t) {
    const auto& u = log.units[t];
    for (int z = 0; z < k_n; ++z) {
      if (out.empty_arm[z]) continue;
      out.mhat.at(t, z) = detail::predict_one(model, pts[z], u.x.data(), j_n);
    }
  }
  return out;
}

struct CrossFitResult {
  std::vector<std::pair<int, int>> fold_ranges;  // [begin, end) unit indices
  Matrix fold_estimates;                         // folds x K
  std::vector<double> estimate;                  // length K
  Matrix mhat;                                   // T x K out-of-fold predictions
};

// Contiguous near-equal folds; the first T mod G folds take one extra unit.
inline std::vector<std::pair<int, int>> crossfit_fold_ranges(int t_n, int folds) {
  std::vector<std::pair<int, int>> ranges;
  const int base = t_n / folds;
  const int extra = t_n % folds;
  int begin = 0;
  for (int g = 0; g < folds; ++g) {
    const int len = base + (g < extra ? 1 : 0);
    ranges.emplace_back(begin, begin + len);
    begin += len;
  }
  return ranges;
}

inline CrossFitResult crossfit_estimate(const ExperimentLog& log, int folds,
                                        const OutcomeModelSpec& model) {
  const int t_n = log.size();
  const int k_n = log.num_arms;
  const int j_n = log.num_covariates;
  if (folds < 2) throw config_error("cross-fitting requires at least two folds");
  if (folds > t_n) throw config_error("cross-fitting requires folds <= units");

  CrossFitResult out;
  out.fold_ranges = crossfit_fold_ranges(t_n, folds);
  out.fold_estimates = Matrix(folds, k_n);
  out.estimate.assign(k_n, 0.0);
  out.mhat = Matrix(t_n, k_n);

  for (int g = 0; g < folds; ++g) {
    const auto [begin, end] = out.fold_ranges[g];
    std::vector<std::vector<detail::ArmSample>> pts(k_n);
    for (int s = 0; s < t_n; ++s) {
      if (s >= begin && s < end) continue;
      const auto& u = log.units[s];
      pts[u.z - 1].push_back({u.x.data(), u.y});
    }
    for (int t = begin; t < end; ++t) {
      const auto& u = log.units[t];
      for (int z = 0; z < k_n; ++z)
        out.mhat.at(t, z) = detail::predict_one(model, pts[z], u.x.data(), j_n);
    }
    // within-fold augmented means: per-arm mean residual among assigned units
    // plus the fold-average prediction
    const int fold_len = end - begin;
    for (int z = 0; z < k_n; ++z) {
      double resid_sum = 0.0;
      int assigned = 0;
      double pred_sum = 0.0;
      for (int t = begin; t < end; ++t) {
        const auto& u = log.units[t];
        pred_sum += out.mhat.at(t, z);
        if (u.z == z + 1) {
          resid_sum += u.y - out.mhat.at(t, z);
          ++assigned;
        }
      }
      if (assigned == 0)
        throw numeric_error("empty fold-arm cell; increase fold size");
      out.fold_estimates.at(g, z) =
          resid_sum / assigned + pred_sum / fold_len;
    }
    const double w = static_cast<double>(fold_len) / t_n;
    for (int z = 0; z < k_n; ++z)
      out.estimate[z] += w * out.fold_estimates.at(g, z);
  }
  return out;
}

}  // namespace adinf

#endif
