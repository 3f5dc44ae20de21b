#include <cmath>
#include <string>
#include <vector>

#include "adinf/estimators.hpp"
#include "adinf/rng.hpp"
#include "gtest/gtest.h"

namespace {

using namespace adinf;

ExperimentLog empty_log(int k_n, int j_n) {
  ExperimentLog log;
  log.num_arms = k_n;
  log.num_covariates = j_n;
  return log;
}

void push_unit(ExperimentLog& log, int z, double y, std::vector<double> probs,
               std::vector<double> mhat = {}) {
  UnitRecord u;
  u.z = z;
  u.y = y;
  u.probs = std::move(probs);
  u.mhat = mhat.empty() ? std::vector<double>(log.num_arms, 0.0)
                        : std::move(mhat);
  log.units.push_back(std::move(u));
}

ExperimentLog random_log(int t_n, int k_n, std::uint64_t seed,
                         std::vector<int> blocks = {}) {
  Rng rng(seed);
  ExperimentLog log = empty_log(k_n, 0);
  log.block_sizes = std::move(blocks);
  for (int t = 0; t < t_n; ++t) {
    std::vector<double> probs(k_n);
    double sum = 0.0;
    for (double& p : probs) {
      p = 0.1 + rng.uniform01();
      sum += p;
    }
    for (double& p : probs) p /= sum;
    std::vector<double> mhat(k_n);
    for (double& m : mhat) m = rng.normal();
    push_unit(log, 1 + static_cast<int>(rng.next_u64() % k_n), rng.normal(),
              std::move(probs), std::move(mhat));
  }
  return log;
}

Estimand diff_contrast() {
  Matrix c(1, 2);
  c.at(0, 0) = -1.0;
  c.at(0, 1) = 1.0;
  return Estimand{c};
}

TEST(PseudoOutcomes, WorkedSingleUnit) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 2.0, {0.5, 0.5}, {1.0, 3.0});
  const auto tr = pseudo_outcomes(log);
  EXPECT_DOUBLE_EQ(tr.unit_ipw[0], 4.0);
  EXPECT_DOUBLE_EQ(tr.unit_ipw[1], 0.0);
  EXPECT_DOUBLE_EQ(tr.unit_aipw[0], 3.0);  // 4 + (1 - 2) * 1
  EXPECT_DOUBLE_EQ(tr.unit_aipw[1], 3.0);  // unassigned arm keeps the model
  EXPECT_DOUBLE_EQ(tr.unit_mhat[0], 1.0);
  EXPECT_DOUBLE_EQ(tr.unit_mhat[1], 3.0);
  EXPECT_EQ(tr.num_groups, 1);
  EXPECT_EQ(tr.rho[0], 1.0);
}

TEST(PseudoOutcomes, ZeroModelCollapsesToInverseWeighting) {
  ExperimentLog log = random_log(40, 3, 11);
  for (auto& u : log.units) u.mhat.assign(3, 0.0);
  const auto tr = pseudo_outcomes(log);
  EXPECT_EQ(tr.unit_ipw, tr.unit_aipw);
}

TEST(PseudoOutcomes, GroupAveragesAndSizeRatios) {
  ExperimentLog log = empty_log(2, 0);
  log.block_sizes = {2, 1};
  push_unit(log, 1, 2.0, {0.5, 0.5});
  push_unit(log, 2, 6.0, {0.25, 0.75});
  push_unit(log, 1, 9.0, {0.75, 0.25});
  const auto tr = pseudo_outcomes(log);
  ASSERT_EQ(tr.num_groups, 2);
  EXPECT_DOUBLE_EQ(tr.group_ipw[0], 2.0);  // (4 + 0) / 2
  EXPECT_DOUBLE_EQ(tr.group_ipw[1], 4.0);  // (0 + 8) / 2
  EXPECT_DOUBLE_EQ(tr.group_ipw[2], 12.0);
  EXPECT_DOUBLE_EQ(tr.group_ipw[3], 0.0);
  EXPECT_DOUBLE_EQ(tr.rho[0], 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(tr.rho[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(tr.pi[0], 2.0 / 3.0);

  ExperimentLog eq = random_log(6, 2, 21, {2, 2, 2});
  const auto treq = pseudo_outcomes(eq);
  for (double r : treq.rho) EXPECT_EQ(r, 1.0);
}

TEST(PseudoOutcomes, RejectsBadInput) {
  ExperimentLog log = empty_log(2, 0);
  EXPECT_THROW(pseudo_outcomes(log), numeric_error);

  push_unit(log, 1, 2.0, {0.0, 1.0});
  try {
    pseudo_outcomes(log);
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("nonpositive assignment probability"),
              std::string::npos);
  }

  ExperimentLog ok = random_log(4, 2, 3);
  Matrix wrong(3, 2);
  EXPECT_THROW(pseudo_outcomes(ok, &wrong), numeric_error);
}

TEST(PointEstimate, HandComputedContrasts) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 2.0, {0.5, 0.5}, {1.0, 3.0});
  push_unit(log, 2, 6.0, {0.5, 0.5}, {1.0, 3.0});
  const auto tr = pseudo_outcomes(log);

  const auto ipw = arm_estimates(tr, EstimatorKind::Ipw);
  EXPECT_DOUBLE_EQ(ipw[0], 2.0);
  EXPECT_DOUBLE_EQ(ipw[1], 6.0);
  EXPECT_DOUBLE_EQ(point_estimate(tr, diff_contrast(), EstimatorKind::Ipw)[0],
                   4.0);

  const auto aipw = arm_estimates(tr, EstimatorKind::Aipw);
  EXPECT_DOUBLE_EQ(aipw[0], 2.0);  // (3 + 1) / 2
  EXPECT_DOUBLE_EQ(aipw[1], 6.0);  // (3 + 9) / 2
}

TEST(BtWeights, HandValuesAndEqualSizeCollapse) {
  const auto b = bt_weights({3, 4, 5});
  ASSERT_EQ(b.size(), 3u);
  EXPECT_NEAR(b[0], 0.15, 1e-12);
  EXPECT_NEAR(b[1], 0.4, 1e-12);
  EXPECT_NEAR(b[2], 1.25, 1e-12);

  const auto eq = bt_weights({5, 5, 5});
  for (double v : eq) EXPECT_EQ(v, 0.5);  // exactly 1/(G-1)

  try {
    bt_weights({3, 5});
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("below one half"), std::string::npos);
  }
  EXPECT_THROW(bt_weights({0, 3, 3}), numeric_error);
}

TEST(Covariance, HandComputedInverseWeighting) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 2.0, {0.5, 0.5});
  push_unit(log, 2, 6.0, {0.5, 0.5});
  const Matrix v = covariance_estimate(pseudo_outcomes(log),
                                       CovarianceKind::VhatIpw);
  EXPECT_DOUBLE_EQ(v.at(0, 0), 8.0);
  EXPECT_DOUBLE_EQ(v.at(0, 1), -24.0);
  EXPECT_DOUBLE_EQ(v.at(1, 0), -24.0);
  EXPECT_DOUBLE_EQ(v.at(1, 1), 72.0);
}

TEST(Covariance, ConstantVectorsGiveExactZero) {
  ExperimentLog log = empty_log(2, 0);
  for (int t = 0; t < 5; ++t) push_unit(log, 1, 3.0, {0.6, 0.4}, {1.0, 2.0});
  const auto tr = pseudo_outcomes(log);
  for (auto kind : {CovarianceKind::VhatIpw, CovarianceKind::VhatAipw,
                    CovarianceKind::VtildeAipw}) {
    const Matrix v = covariance_estimate(tr, kind);
    for (double x : v.a) EXPECT_EQ(x, 0.0);
  }
}

TEST(Covariance, EqualBlocksMakeSizeWeightsExact) {
  const ExperimentLog log = random_log(8, 2, 99, {2, 2, 2, 2});
  const auto tr = pseudo_outcomes(log);
  const Matrix vh = covariance_estimate(tr, CovarianceKind::VhatAipw);
  const Matrix vhb = covariance_estimate(tr, CovarianceKind::VhatAipwB);
  EXPECT_EQ(vh.a, vhb.a);
  const Matrix vt = covariance_estimate(tr, CovarianceKind::VtildeAipw);
  const Matrix vtb = covariance_estimate(tr, CovarianceKind::VtildeAipwB);
  EXPECT_EQ(vt.a, vtb.a);
}

TEST(Covariance, RequiresTwoGroups) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 2.0, {0.5, 0.5});
  EXPECT_THROW(covariance_estimate(pseudo_outcomes(log), CovarianceKind::VhatIpw),
               numeric_error);

  ExperimentLog one_block = random_log(3, 2, 4, {3});
  EXPECT_THROW(
      covariance_estimate(pseudo_outcomes(one_block), CovarianceKind::VhatAipw),
      numeric_error);
}

TEST(Covariance, AllKindsSymmetricPositiveSemidefinite) {
  const std::vector<ExperimentLog> logs = {
      random_log(30, 2, 5), random_log(24, 3, 6),
      random_log(9, 2, 7, {2, 3, 4}), random_log(12, 2, 8, {3, 3, 3, 3})};
  for (const auto& log : logs) {
    const auto tr = pseudo_outcomes(log);
    for (auto kind :
         {CovarianceKind::VhatIpw, CovarianceKind::VhatAipw,
          CovarianceKind::VtildeAipw, CovarianceKind::VhatAipwB,
          CovarianceKind::VtildeAipwB}) {
      const Matrix v = covariance_estimate(tr, kind);
      for (int a = 0; a < v.rows; ++a)
        for (int b = 0; b < a; ++b) EXPECT_EQ(v.at(a, b), v.at(b, a));
      const SymEigen eig = eigen_sym(v);
      const double top = std::max(eig.values.back(), 1.0);
      EXPECT_GE(eig.values.front(), -1e-10 * top)
          << covariance_kind_name(kind);
    }
  }
}

TEST(ConfidenceSet, HandComputedInterval) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 2.0, {0.5, 0.5});
  push_unit(log, 2, 6.0, {0.5, 0.5});
  const auto tr = pseudo_outcomes(log);
  const Matrix vhat = covariance_estimate(tr, CovarianceKind::VhatIpw);
  const auto tau = point_estimate(tr, diff_contrast(), EstimatorKind::Ipw);
  const auto cs = confidence_set(tau, vhat, diff_contrast(), 0.05, tr.num_groups);

  // projected variance: (8 + 72 + 2*24) / 2 = 64
  EXPECT_NEAR(cs.threshold, 3.841458820694124, 1e-9);
  const double half = 8.0 * 1.959963984540054;
  EXPECT_NEAR(cs.ci_lower[0], 4.0 - half, 1e-9);
  EXPECT_NEAR(cs.ci_upper[0], 4.0 + half, 1e-9);

  EXPECT_TRUE(cs.contains({4.0}));
  EXPECT_TRUE(cs.contains({4.0 + half * 0.999999}));
  EXPECT_FALSE(cs.contains({4.0 + half * 1.000001}));
  EXPECT_FALSE(cs.contains({4.0 - half * 1.000001}));
}

TEST(ConfidenceSet, EllipsoidMembershipInTwoDimensions) {
  Matrix m(2, 2);
  m.at(0, 0) = 4.0;
  m.at(1, 1) = 9.0;
  const auto cs = wald_confidence_set({0.0, 0.0}, m, 0.05);
  const double th = cs.threshold;
  EXPECT_NEAR(th, 5.991464547107979, 1e-9);
  EXPECT_TRUE(cs.contains({2.0 * std::sqrt(th) * 0.999999, 0.0}));
  EXPECT_FALSE(cs.contains({2.0 * std::sqrt(th) * 1.000001, 0.0}));
  EXPECT_TRUE(cs.contains({0.0, 3.0 * std::sqrt(th) * 0.999999}));
  // the bounding box corner lies outside the ellipsoid
  EXPECT_FALSE(cs.contains({cs.ci_upper[0], cs.ci_upper[1]}));
  EXPECT_NEAR(cs.ci_upper[0], 2.0 * std::sqrt(th), 1e-9);
  EXPECT_NEAR(cs.ci_upper[1], 3.0 * std::sqrt(th), 1e-9);
}

TEST(ConfidenceSet, SingularProjectionsAreRejected) {
  try {
    wald_confidence_set({1.0}, Matrix(1, 1), 0.05);
    FAIL() << "expected numeric_error";
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("singular projected covariance"),
              std::string::npos);
  }

  Matrix rank1(2, 2);
  rank1.at(0, 0) = 1.0;
  rank1.at(0, 1) = 1.0;
  rank1.at(1, 0) = 1.0;
  rank1.at(1, 1) = 1.0;
  EXPECT_THROW(wald_confidence_set({0.0, 0.0}, rank1, 0.05), numeric_error);

  EXPECT_THROW(wald_confidence_set({0.0}, Matrix::identity(1), 0.0),
               config_error);
  EXPECT_THROW(wald_confidence_set({0.0, 0.0}, Matrix::identity(1), 0.05),
               numeric_error);
}

TEST(ConfidenceSet, MembershipIsAffineEquivariant) {
  Rng rng(404);
  for (int rep = 0; rep < 200; ++rep) {
    Matrix a(2, 2);
    for (auto& v : a.a) v = rng.normal();
    Matrix m = matmul(a, transpose(a));
    m.at(0, 0) += 0.5;
    m.at(1, 1) += 0.5;
    Matrix b(2, 2);
    do {
      for (auto& v : b.a) v = rng.normal();
    } while (std::fabs(b.at(0, 0) * b.at(1, 1) - b.at(0, 1) * b.at(1, 0)) < 0.2);

    const std::vector<double> tau_hat = {rng.normal(), rng.normal()};
    const auto base = wald_confidence_set(tau_hat, m, 0.05);
    const auto mapped =
        wald_confidence_set(matvec(b, tau_hat), sandwich(b, m), 0.05);
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> tau = {tau_hat[0] + 3.0 * rng.normal(),
                                       tau_hat[1] + 3.0 * rng.normal()};
      ASSERT_EQ(base.contains(tau), mapped.contains(matvec(b, tau)));
    }
  }
}

TEST(Diagnostics, HandComputedProxies) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 3.0, {0.2, 0.8}, {1.0, -2.0});
  push_unit(log, 2, -1.0, {0.5, 0.5}, {0.0, 0.5});
  const auto d = diagnostics(log);
  EXPECT_DOUBLE_EQ(d.realized_min_prob, 0.2);
  EXPECT_DOUBLE_EQ(d.max_abs_outcome, 3.0);
  EXPECT_DOUBLE_EQ(d.max_abs_model, 2.0);
  EXPECT_DOUBLE_EQ(d.lindeberg_proxy, 312.5);     // max(625, 9) / 2
  EXPECT_DOUBLE_EQ(d.cs_proxy, 19541.375);        // (78125 + 40.5) / 4
}

TEST(Report, InverseWeightingIgnoresRequestedVariance) {
  ExperimentLog log = empty_log(2, 0);
  push_unit(log, 1, 2.0, {0.5, 0.5}, {1.0, 3.0});
  push_unit(log, 2, 6.0, {0.5, 0.5}, {1.0, 3.0});
  const auto ipw_rep =
      make_inference_report(log, diff_contrast(), EstimatorKind::Ipw,
                            CovarianceKind::VtildeAipw, 0.05);
  EXPECT_DOUBLE_EQ(ipw_rep.tau_hat[0], 4.0);
  EXPECT_DOUBLE_EQ(ipw_rep.cov.at(0, 0), 64.0);
  EXPECT_NEAR(ipw_rep.ci_upper[0] - ipw_rep.ci_lower[0],
              2.0 * 8.0 * 1.959963984540054, 1e-9);
  EXPECT_NEAR(ipw_rep.chi2_threshold, 3.841458820694124, 1e-9);
  EXPECT_DOUBLE_EQ(ipw_rep.diagnostics.realized_min_prob, 0.5);
}

}  // namespace
