#include <gtest/gtest.h>

#include <random>

#include "coinfect/system.hpp"
#include "support/sampling.hpp"

using namespace coinfect;
using coinfect::testing::reference_rates;

namespace {

// Right-hand side written directly from the S, I1, I2, I12 equations.
StatePoint model_rhs(const ModelParams& m, const StatePoint& y) {
  const double S = y[0], I1 = y[1], I2 = y[2], I12 = y[3];
  return {(m.b * (1 - S / m.K) - m.alpha1 * I1 - m.alpha2 * I2 - m.alpha3 * I12 - m.mu0) * S,
          (m.alpha1 * S - m.eta1 * I12 - m.mu1) * I1, (m.alpha2 * S - m.eta2 * I12 - m.mu2) * I2,
          (m.alpha3 * S + m.eta1 * I1 + m.eta2 * I2 - m.mu3) * I12};
}

// Cofactor expansion along the first row.
double laplace_det(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0) return 1.0;
  if (n == 1) return a[0][0];
  double det = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::vector<double>> sub;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t c = 0; c < n; ++c)
        if (c != j) row.push_back(a[r][c]);
      sub.push_back(row);
    }
    det += ((j % 2) ? -1.0 : 1.0) * a[0][j] * laplace_det(sub);
  }
  return det;
}

double laplace_minor(const Matrix4& A, unsigned mask) {
  std::vector<int> idx;
  for (int i = 0; i < 4; ++i)
    if (mask & (1u << i)) idx.push_back(i);
  std::vector<std::vector<double>> a(idx.size(), std::vector<double>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < idx.size(); ++c) a[r][c] = A(idx[r], idx[c]);
  return laplace_det(a);
}

}  // namespace

TEST(Validation, AcceptsReferenceRates) {
  const auto p = validate_params(reference_rates());
  EXPECT_DOUBLE_EQ(p.derived().sigma1, 2.0);
  EXPECT_DOUBLE_EQ(p.derived().sigma2, 4.0);
  EXPECT_DOUBLE_EQ(p.derived().sigma3, 5.0);
  EXPECT_DOUBLE_EQ(p.derived().S2, 75.0);
  EXPECT_NEAR(p.derived().Delta, 0.05, 1e-15);
  EXPECT_NEAR(p.derived().delta, 0.3, 1e-15);
  ASSERT_TRUE(p.derived().S8.has_value());
  EXPECT_NEAR(*p.derived().S8, 6.0, 1e-12);
  EXPECT_NEAR(p.derived().gamma1, 0.9, 1e-15);
  EXPECT_NEAR(p.derived().gamma2, -0.25, 1e-15);
}

TEST(Validation, BirthNotAboveDeath) {
  auto m = reference_rates();
  m.mu0 = 4;
  try {
    validate_params(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BirthBelowDeath);
    EXPECT_NE(std::string(e.what()).find("b - mu0"), std::string::npos);
  }
}

TEST(Validation, SigmaOrder) {
  auto m = reference_rates();
  m.mu2 = 0.25 * 6;  // sigma2 = 6 > sigma3
  try {
    validate_params(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SigmaOrderViolated);
  }
  m = reference_rates();
  m.mu2 = 0.5;  // sigma2 = 2 = sigma1
  EXPECT_THROW(
      {
        try {
          validate_params(m);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::SigmaOrderViolated);
          throw;
        }
      },
      Error);
  m = reference_rates();
  m.mu2 = 0.5 * (1 + 1e-12);
  try {
    validate_params(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SigmaTie);
  }
}

TEST(Validation, NonPositiveRates) {
  for (double bad : {0.0, -1.0, std::nan("")}) {
    auto m = reference_rates();
    m.alpha2 = bad;
    try {
      validate_params(m);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonPositiveRate);
    }
  }
  auto m = reference_rates();
  m.rho1 = -0.1;
  EXPECT_THROW(validate_params(m), Error);
}

TEST(Validation, InfiniteCapacity) {
  const auto p = validate_params(reference_rates(kInfiniteCapacity));
  EXPECT_TRUE(p.has_infinite_capacity());
  EXPECT_TRUE(std::isinf(p.derived().S2));
  EXPECT_THROW(assemble_system(p), Error);
  const SystemForm f = assemble_system_infinite(p);
  EXPECT_EQ(f.A(0, 0), 0.0);
  EXPECT_EQ(p.with_capacity(10).raw().K, 10.0);
}

TEST(DerivedConstants, CapacityDependentCoordinates) {
  const auto p = validate_params(reference_rates(8));
  const auto& d = p.derived();
  const double K = 8, b = 4;
  EXPECT_NEAR(d.S6, K * d.gamma1 / (b * 0.4), 1e-12);
  EXPECT_NEAR(d.S7, -K * d.gamma2 / (b * 0.1), 1e-12);
  EXPECT_NEAR(d.sigma1prime, 2 + 3 * K * 0.5 * 0.2 / (b * 0.4), 1e-12);
}

TEST(DerivedConstants, DeltaVanishes) {
  auto m = reference_rates();
  m.eta2 = 0.2;  // alpha2 eta1 = alpha1 eta2 = 0.1
  const auto p = validate_params(m);
  EXPECT_FALSE(p.derived().S8.has_value());
}

TEST(DifferenceOfProducts, CancellationIsExact) {
  const double a = 1.0 + 0x1p-30, c = 1.0 + 0x1p-29;
  const double b = 1.0 + 0x1p-31, d = 1.0 + 0x1p-32;
  const long double exact = static_cast<long double>(a) * b - static_cast<long double>(c) * d;
  EXPECT_NEAR(difference_of_products(a, b, c, d), static_cast<double>(exact), 1e-30);
}

TEST(SystemForm, MatchesModelEquations) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = coinfect::testing::random_admissible(rng, 0.1, 10, 1, 100);
    const SystemForm f = assemble_system(p);
    const StatePoint y(u(rng), u(rng), u(rng), u(rng));
    const StatePoint a = vector_field(f, y), b = model_rhs(p.raw(), y);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-11 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
}

TEST(SystemForm, SkewOffTheDiagonalCorner) {
  const SystemForm f = assemble_system(validate_params(reference_rates()));
  const Matrix4 S = f.A + f.A.transpose();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i || j) EXPECT_EQ(S(i, j), 0.0);
  EXPECT_DOUBLE_EQ(f.A(0, 0), -0.04);
}

TEST(PrincipalMinors, DeterminantIsDeltaSquared) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = coinfect::testing::random_admissible(rng);
    const SystemForm f = assemble_system(p);
    const double D = p.derived().Delta;
    const long double det = principal_minor(f.A, 0b1111);
    EXPECT_NEAR(static_cast<double>(det), D * D, 1e-10 * std::max(D * D, 1e-300) + 1e-14 * principal_minor_scale(f.A, 0b1111));
    EXPECT_NEAR(laplace_minor(f.A, 0b1111), D * D, 1e-9 * static_cast<double>(principal_minor_scale(f.A, 0b1111)));
  }
}

TEST(PrincipalMinors, ZeroPatternAgainstCofactorOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = coinfect::testing::random_admissible(rng, 0.1, 10, 1, 100);
    const SystemForm f = assemble_system(p);
    for (unsigned mask = 1; mask < 16; ++mask) {
      const double oracle = laplace_minor(f.A, mask);
      const double scale = static_cast<double>(principal_minor_scale(f.A, mask));
      const double mine = static_cast<double>(principal_minor(f.A, mask));
      EXPECT_NEAR(mine, oracle, 1e-12 * scale);
      if (is_zero_minor_mask(mask))
        EXPECT_LE(std::abs(oracle), 1e-14 * scale) << mask;
      else
        EXPECT_GT(std::abs(oracle), 1e-10 * scale) << mask;
    }
  }
}

TEST(Balance, ResidualsVanishAtInteriorPoint) {
  const auto p = validate_params(reference_rates(8));
  const StatePoint e6(4.5, 0.25, 0, 3.125);  // E6 at K = 8
  const auto r = balance_residuals(p, e6);
  EXPECT_NEAR(r.r1, 0.0, 1e-12);
  EXPECT_NEAR(r.r2, 0.0, 1e-12);
  EXPECT_LE(vector_field(assemble_system(p), e6).cwiseAbs().maxCoeff(), 1e-12);
}
