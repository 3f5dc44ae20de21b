#ifndef ADINF_ESTIMATORS_HPP
#define ADINF_ESTIMATORS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "adinf/chi_square.hpp"
#include "adinf/errors.hpp"
#include "adinf/linalg.hpp"
#include "adinf/population.hpp"

namespace adinf {

enum class EstimatorKind { Ipw, Aipw };

enum class CovarianceKind { VhatIpw, VhatAipw, VtildeAipw, VhatAipwB, VtildeAipwB };

inline const char* covariance_kind_name(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::VhatIpw: return "vhat_ipw";
    case CovarianceKind::VhatAipw: return "vhat";
    case CovarianceKind::VtildeAipw: return "vtilde";
    case CovarianceKind::VhatAipwB: return "vhat_b";
    case CovarianceKind::VtildeAipwB: return "vtilde_b";
  }
  return "unknown";
}

// Per-unit and per-group pseudo-outcomes. Groups are blocks when the log is
// blocked and single units otherwise, so every estimator downstream works on
// the group arrays uniformly.
struct PseudoOutcomeTrace {
  int num_arms = 0;
  int num_units = 0;
  int num_groups = 0;
  bool blocked = false;
  std::vector<int> group_sizes;
  std::vector<double> unit_ipw;    // num_units x K
  std::vector<double> unit_aipw;   // num_units x K
  std::vector<double> unit_mhat;   // num_units x K
  std::vector<double> group_ipw;   // num_groups x K, within-group means
  std::vector<double> group_aipw;  // num_groups x K
  std::vector<double> group_mhat;  // num_groups x K
  std::vector<double> rho;         // num_groups, = G * n_g / N
  std::vector<double> pi;          // num_groups, = n_g / N
};

// mhat_override, when given, replaces the per-unit model predictions stored
// in the log (rows are units, columns arms).
inline PseudoOutcomeTrace pseudo_outcomes(const ExperimentLog& log,
                                          const Matrix* mhat_override = nullptr) {
  const int t_n = log.size();
  const int k_n = log.num_arms;
  if (t_n == 0) throw numeric_error("experiment log is empty");
  if (mhat_override &&
      (mhat_override->rows != t_n || mhat_override->cols != k_n))
    throw numeric_error("model prediction matrix shape mismatch");

  PseudoOutcomeTrace tr;
  tr.num_arms = k_n;
  tr.num_units = t_n;
  tr.blocked = log.blocked();
  tr.group_sizes = tr.blocked ? log.block_sizes : std::vector<int>(t_n, 1);
  tr.num_groups = static_cast<int>(tr.group_sizes.size());

  tr.unit_ipw.assign(static_cast<size_t>(t_n) * k_n, 0.0);
  tr.unit_aipw.assign(static_cast<size_t>(t_n) * k_n, 0.0);
  tr.unit_mhat.assign(static_cast<size_t>(t_n) * k_n, 0.0);

  for (int t = 0; t < t_n; ++t) {
    const auto& u = log.units[t];
    for (int z = 0; z < k_n; ++z) {
      const double e = u.probs[z];
      if (!(e > 0.0))
        throw numeric_error("nonpositive assignment probability in log");
      const double m = mhat_override ? mhat_override->at(t, z) : u.mhat[z];
      const size_t at = static_cast<size_t>(t) * k_n + z;
      if (u.z == z + 1) {
        const double ipw = u.y / e;
        tr.unit_ipw[at] = ipw;
        tr.unit_aipw[at] = ipw + (1.0 - 1.0 / e) * m;
      } else {
        tr.unit_ipw[at] = 0.0;
        tr.unit_aipw[at] = m;
      }
      tr.unit_mhat[at] = m;
    }
  }

  const int g_n = tr.num_groups;
  tr.group_ipw.assign(static_cast<size_t>(g_n) * k_n, 0.0);
  tr.group_aipw.assign(static_cast<size_t>(g_n) * k_n, 0.0);
  tr.group_mhat.assign(static_cast<size_t>(g_n) * k_n, 0.0);
  tr.rho.resize(g_n);
  tr.pi.resize(g_n);
  int offset = 0;
  for (int g = 0; g < g_n; ++g) {
    const int n_g = tr.group_sizes[g];
    for (int i = 0; i < n_g; ++i) {
      const size_t at = static_cast<size_t>(offset + i) * k_n;
      for (int z = 0; z < k_n; ++z) {
        tr.group_ipw[static_cast<size_t>(g) * k_n + z] += tr.unit_ipw[at + z];
        tr.group_aipw[static_cast<size_t>(g) * k_n + z] += tr.unit_aipw[at + z];
        tr.group_mhat[static_cast<size_t>(g) * k_n + z] += tr.unit_mhat[at + z];
      }
    }
    for (int z = 0; z < k_n; ++z) {
      tr.group_ipw[static_cast<size_t>(g) * k_n + z] /= n_g;
      tr.group_aipw[static_cast<size_t>(g) * k_n + z] /= n_g;
      tr.group_mhat[static_cast<size_t>(g) * k_n + z] /= n_g;
    }
    // integer product first so equal-size groups give exactly 1.0
    tr.rho[g] = static_cast<double>(static_cast<long long>(g_n) * n_g) / t_n;
    tr.pi[g] = static_cast<double>(n_g) / t_n;
    offset += n_g;
  }
  return tr;
}

namespace detail {

inline const std::vector<double>& group_vectors(const PseudoOutcomeTrace& tr,
                                                EstimatorKind kind) {
  return kind == EstimatorKind::Ipw ? tr.group_ipw : tr.group_aipw;
}

// (1/G) sum_g rho_g * u_g; the single mean routine shared by the point
// estimator and every covariance kind.
inline std::vector<double> scaled_group_mean(const PseudoOutcomeTrace& tr,
                                             const std::vector<double>& groups) {
  std::vector<double> mean(tr.num_arms, 0.0);
  for (int g = 0; g < tr.num_groups; ++g)
    for (int z = 0; z < tr.num_arms; ++z)
      mean[z] += tr.rho[g] * groups[static_cast<size_t>(g) * tr.num_arms + z];
  for (double& v : mean) v /= tr.num_groups;
  return mean;
}

}  // namespace detail

// Estimated mean potential outcomes (length K).
inline std::vector<double> arm_estimates(const PseudoOutcomeTrace& tr,
                                         EstimatorKind kind) {
  return detail::scaled_group_mean(tr, detail::group_vectors(tr, kind));
}

inline std::vector<double> point_estimate(const PseudoOutcomeTrace& tr,
                                          const Estimand& estimand,
                                          EstimatorKind kind) {
  return matvec(estimand.contrast, arm_estimates(tr, kind));
}

// Group-size weights for the unequal-size covariance estimator; requires
// every group below half the sample and returns exactly 1/(G-1) when all
// groups share one size.
inline std::vector<double> bt_weights(const std::vector<int>& group_sizes) {
  const int g_n = static_cast<int>(group_sizes.size());
  long long total = 0;
  for (int n : group_sizes) {
    if (n < 1) throw numeric_error("group sizes must be positive");
    total += n;
  }
  for (int n : group_sizes)
    if (2LL * n >= total)
      throw numeric_error("group proportion must be below one half");
  bool equal = true;
  for (int n : group_sizes)
    if (n != group_sizes[0]) equal = false;
  if (equal) return std::vector<double>(g_n, 1.0 / (g_n - 1));
  std::vector<double> x(g_n);
  double x_sum = 0.0;
  for (int g = 0; g < g_n; ++g) {
    const double p = static_cast<double>(group_sizes[g]) / total;
    x[g] = p * p / (1.0 - 2.0 * p);
    x_sum += x[g];
  }
  std::vector<double> b(g_n);
  for (int g = 0; g < g_n; ++g) b[g] = g_n * x[g] / (1.0 + x_sum);
  return b;
}

// All five covariance estimators share one accumulation: a weighted sum of
// outer products of deviations from the common scaled group mean. The hat
// and tilde kinds scale each group vector by rho_g and weight by 1/(G-1);
// the _b kinds leave vectors unscaled and weight by bt_weights.
inline Matrix covariance_estimate(const PseudoOutcomeTrace& tr,
                                  CovarianceKind kind) {
  const int g_n = tr.num_groups;
  const int k_n = tr.num_arms;
  if (g_n < 2)
    throw numeric_error("covariance estimate requires at least two groups");

  std::vector<double> groups;
  switch (kind) {
    case CovarianceKind::VhatIpw:
      groups = tr.group_ipw;
      break;
    case CovarianceKind::VhatAipw:
    case CovarianceKind::VhatAipwB:
      groups = tr.group_aipw;
      break;
    case CovarianceKind::VtildeAipw:
    case CovarianceKind::VtildeAipwB:
      groups.resize(static_cast<size_t>(g_n) * k_n);
      for (size_t i = 0; i < groups.size(); ++i)
        groups[i] = tr.group_aipw[i] - tr.group_mhat[i];
      break;
  }

  const bool size_weighted =
      kind == CovarianceKind::VhatAipwB || kind == CovarianceKind::VtildeAipwB;
  const std::vector<double> w =
      size_weighted ? bt_weights(tr.group_sizes)
                    : std::vector<double>(g_n, 1.0 / (g_n - 1));
  const std::vector<double> mean = detail::scaled_group_mean(tr, groups);

  Matrix v(k_n, k_n);
  std::vector<double> d(k_n);
  for (int g = 0; g < g_n; ++g) {
    const double scale = size_weighted ? 1.0 : tr.rho[g];
    for (int z = 0; z < k_n; ++z)
      d[z] = scale * groups[static_cast<size_t>(g) * k_n + z] - mean[z];
    for (int a = 0; a < k_n; ++a)
      for (int b = a; b < k_n; ++b) v.at(a, b) += w[g] * d[a] * d[b];
  }
  for (int a = 0; a < k_n; ++a)
    for (int b = 0; b < a; ++b) v.at(a, b) = v.at(b, a);
  return v;
}

// Wald ellipsoid { tau : (c - tau)' S^{-1} (c - tau) <= threshold } where S
// is the estimated covariance of the contrast estimate.
struct ConfidenceSet {
  std::vector<double> center;
  Matrix shape_inv;   // inverse of C Vhat C' / G
  double threshold = 0.0;
  std::vector<double> ci_lower;  // per-coordinate bounding interval
  std::vector<double> ci_upper;

  bool contains(const std::vector<double>& tau) const {
    const int q = static_cast<int>(center.size());
    double quad = 0.0;
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b)
        quad += (center[a] - tau[a]) * shape_inv.at(a, b) * (center[b] - tau[b]);
    return quad <= threshold;
  }
};

// Builds the ellipsoid directly from the estimated covariance of tau_hat.
inline ConfidenceSet wald_confidence_set(const std::vector<double>& tau_hat,
                                         const Matrix& m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw config_error("alpha must lie in (0, 1)");
  const int q = m.rows;
  if (static_cast<int>(tau_hat.size()) != q || m.cols != q)
    throw numeric_error("estimate length does not match covariance shape");

  const SymEigen eig = eigen_sym(m);
  const double max_ev = eig.values[q - 1];
  if (!(max_ev > 0.0) || eig.values[0] <= 1e-12 * max_ev)
    throw numeric_error("singular projected covariance");

  ConfidenceSet cs;
  cs.center = tau_hat;
  cs.threshold = chi_square_quantile(q, 1.0 - alpha);
  cs.shape_inv = Matrix(q, q);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      double s = 0.0;
      for (int r = 0; r < q; ++r)
        s += eig.vectors.at(a, r) * eig.vectors.at(b, r) / eig.values[r];
      cs.shape_inv.at(a, b) = s;
    }
  cs.ci_lower.resize(q);
  cs.ci_upper.resize(q);
  for (int a = 0; a < q; ++a) {
    const double half = std::sqrt(cs.threshold * m.at(a, a));
    cs.ci_lower[a] = tau_hat[a] - half;
    cs.ci_upper[a] = tau_hat[a] + half;
  }
  return cs;
}

inline ConfidenceSet confidence_set(const std::vector<double>& tau_hat,
                                    const Matrix& vhat, const Estimand& estimand,
                                    double alpha, int num_groups) {
  const auto& c = estimand.contrast;
  if (static_cast<int>(tau_hat.size()) != c.rows)
    throw numeric_error("estimate length does not match contrast rows");
  Matrix m = sandwich(c, vhat);
  for (auto& v : m.a) v /= num_groups;
  return wald_confidence_set(tau_hat, m, alpha);
}

struct DiagnosticsSummary {
  double realized_min_prob = 0.0;
  double max_abs_outcome = 0.0;
  double max_abs_model = 0.0;
  double lindeberg_proxy = 0.0;
  double cs_proxy = 0.0;
};

inline DiagnosticsSummary diagnostics(const ExperimentLog& log,
                                      const Matrix* mhat_override = nullptr) {
  const int t_n = log.size();
  const int k_n = log.num_arms;
  DiagnosticsSummary d;
  d.realized_min_prob = 1.0;
  double lind_max = 0.0;
  double cs_sum = 0.0;
  for (int t = 0; t < t_n; ++t) {
    const auto& u = log.units[t];
    double e_floor = 1.0;
    for (int z = 0; z < k_n; ++z) e_floor = std::min(e_floor, u.probs[z]);
    d.realized_min_prob = std::min(d.realized_min_prob, e_floor);
    const double l_t = std::fabs(u.y);
    double m_t = 0.0;
    for (int z = 0; z < k_n; ++z) {
      const double m = mhat_override ? mhat_override->at(t, z) : u.mhat[z];
      m_t = std::max(m_t, std::fabs(m));
    }
    d.max_abs_outcome = std::max(d.max_abs_outcome, l_t);
    d.max_abs_model = std::max(d.max_abs_model, m_t);
    const double s = l_t + m_t;
    lind_max = std::max(lind_max, (s / e_floor) * (s / e_floor));
    cs_sum += s * s * s * s / (e_floor * e_floor * e_floor);
  }
  d.lindeberg_proxy = lind_max / t_n;
  d.cs_proxy = cs_sum / (static_cast<double>(t_n) * t_n);
  return d;
}

struct InferenceReport {
  std::vector<double> tau_hat;
  Matrix cov;  // estimated covariance of tau_hat, C Vhat C' / G
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  double chi2_threshold = 0.0;
  DiagnosticsSummary diagnostics;
};

inline InferenceReport make_inference_report(const ExperimentLog& log,
                                             const Estimand& estimand,
                                             EstimatorKind estimator,
                                             CovarianceKind variance,
                                             double alpha,
                                             const Matrix* mhat_override = nullptr) {
  const PseudoOutcomeTrace tr = pseudo_outcomes(log, mhat_override);
  InferenceReport rep;
  rep.tau_hat = point_estimate(tr, estimand, estimator);
  const Matrix vhat = covariance_estimate(
      tr, estimator == EstimatorKind::Ipw ? CovarianceKind::VhatIpw : variance);
  const ConfidenceSet cs =
      confidence_set(rep.tau_hat, vhat, estimand, alpha, tr.num_groups);
  rep.cov = sandwich(estimand.contrast, vhat);
  for (auto& v : rep.cov.a) v /= tr.num_groups;
  rep.ci_lower = cs.ci_lower;
  rep.ci_upper = cs.ci_upper;
  rep.chi2_threshold = cs.threshold;
  rep.diagnostics = diagnostics(log, mhat_override);
  return rep;
}

}  // namespace adinf

#endif
