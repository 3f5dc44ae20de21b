#include <gtest/gtest.h>

#include "adinf/chi_square.hpp"

using namespace adinf;

// Reference values computed with an independent implementation of the
// regularized incomplete gamma function and frozen here.
TEST(RegLowerGamma, SpotValues) {
  EXPECT_NEAR(reg_lower_gamma(0.5, 1.9207), 0.9499982459660916, 1e-12);
  EXPECT_NEAR(reg_lower_gamma(1.5, 2.0), 0.7385358700508888, 1e-12);
  EXPECT_NEAR(reg_lower_gamma(2.5, 0.3), 0.011996757205906265, 1e-14);
  EXPECT_NEAR(reg_lower_gamma(5.0, 5.0), 0.5595067149347879, 1e-12);
  EXPECT_NEAR(reg_lower_gamma(0.5, 1e-8), 0.00011283791633342464, 1e-15);
  EXPECT_DOUBLE_EQ(reg_lower_gamma(0.5, 0.0), 0.0);
  EXPECT_THROW(reg_lower_gamma(0.0, 1.0), numeric_error);
  EXPECT_THROW(reg_lower_gamma(1.0, -1.0), numeric_error);
}

TEST(ChiSquareQuantile, FrozenReferenceValues) {
  EXPECT_NEAR(chi_square_quantile(1, 0.95), 3.841458820694124, 2e-9);
  EXPECT_NEAR(chi_square_quantile(2, 0.95), 5.991464547107979, 2e-9);
  EXPECT_NEAR(chi_square_quantile(3, 0.95), 7.814727903251179, 2e-9);
  EXPECT_NEAR(chi_square_quantile(4, 0.95), 9.487729036781154, 2e-9);
  EXPECT_NEAR(chi_square_quantile(5, 0.95), 11.070497693516351, 2e-9);
  EXPECT_NEAR(chi_square_quantile(10, 0.95), 18.307038053275146, 2e-9);
  EXPECT_NEAR(chi_square_quantile(1, 0.99), 6.6348966010212145, 2e-9);
  EXPECT_NEAR(chi_square_quantile(1, 0.90), 2.705543454095404, 2e-9);
  EXPECT_NEAR(chi_square_quantile(2, 0.99), 9.21034037197618, 2e-9);
  EXPECT_NEAR(chi_square_quantile(3, 0.975), 9.348403604496148, 2e-9);
  EXPECT_NEAR(chi_square_quantile(7, 0.6), 7.283207632840307, 2e-9);
  EXPECT_NEAR(chi_square_quantile(1, 0.5), 0.454936423119572, 2e-9);
}

TEST(ChiSquareQuantile, RoundTripAndMonotone) {
  for (double df : {1.0, 2.0, 3.0, 7.0, 25.0}) {
    for (double p : {0.01, 0.1, 0.5, 0.9, 0.95, 0.999}) {
      const double q = chi_square_quantile(df, p);
      EXPECT_NEAR(chi_square_cdf(q, df), p, 1e-9) << "df=" << df << " p=" << p;
    }
    EXPECT_LT(chi_square_quantile(df, 0.5), chi_square_quantile(df, 0.95));
  }
  EXPECT_LT(chi_square_quantile(1, 0.95), chi_square_quantile(2, 0.95));
  EXPECT_THROW(chi_square_quantile(1, 0.0), numeric_error);
  EXPECT_THROW(chi_square_quantile(1, 1.0), numeric_error);
  EXPECT_THROW(chi_square_quantile(0, 0.5), numeric_error);
}

TEST(NormalQuantile, MatchesReference) {
  EXPECT_NEAR(normal_quantile_upper(0.975), 1.959963984540054, 2e-9);
  EXPECT_NEAR(normal_quantile_upper(0.95), 1.6448536269514722, 2e-9);
  EXPECT_THROW(normal_quantile_upper(0.5), numeric_error);
  EXPECT_THROW(normal_quantile_upper(1.0), numeric_error);
}
