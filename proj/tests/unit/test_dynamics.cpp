#include <gtest/gtest.h>

#include <random>

#include "coinfect/dynamics.hpp"
#include "support/sampling.hpp"

using namespace coinfect;
using coinfect::testing::reference_rates;

namespace {

ModelParams chain_rates(double K) {
  auto m = reference_rates(K);
  m.eta2 = 0.03;
  return m;
}

}  // namespace

TEST(Integrator, ExponentialDecay) {
  Eigen::Vector2d y(1.0, 2.0);
  ode::StepStats st;
  ode::StepperOptions o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  ode::integrate_adaptive([](const Eigen::Vector2d& s) -> Eigen::Vector2d { return -s; }, y, 0.0, 3.0, o, st,
                          [](double, const Eigen::Vector2d&) {});
  EXPECT_NEAR(y[0], std::exp(-3.0), 1e-10);
  EXPECT_NEAR(y[1], 2 * std::exp(-3.0), 1e-10);
  EXPECT_GT(st.accepted, 0);
}

TEST(Integrator, FifthOrderConvergenceOnHarmonicOscillator) {
  auto run = [](double h) {
    Eigen::Vector2d y(1.0, 0.0);
    ode::StepStats st;
    ode::StepperOptions o;
    o.initial_step = h;
    o.max_step = h;
    o.rtol = o.atol = 1e3;  // accept every step
    ode::integrate_adaptive([](const Eigen::Vector2d& s) -> Eigen::Vector2d { return {s[1], -s[0]}; }, y, 0.0, 1.0,
                            o, st, [](double, const Eigen::Vector2d&) {});
    return std::hypot(y[0] - std::cos(1.0), y[1] + std::sin(1.0));
  };
  const double e1 = run(0.1), e2 = run(0.05);
  EXPECT_NEAR(std::log2(e1 / e2), 5.0, 0.3);
}

TEST(Integrator, ObserverCanStop) {
  Eigen::Vector2d y(1.0, 1.0);
  ode::StepStats st;
  int calls = 0;
  const double t = ode::integrate_adaptive([](const Eigen::Vector2d& s) -> Eigen::Vector2d { return -s; }, y, 0.0,
                                           10.0, ode::StepperOptions{}, st, [&](double, const Eigen::Vector2d&) {
                                             return ++calls < 3;
                                           });
  EXPECT_EQ(calls, 3);
  EXPECT_LT(t, 10.0);
}

TEST(Integrate, EquilibriumIsFixed) {
  const auto p = validate_params(reference_rates(100));
  const StatePoint e5(5, 0, 0, 14);
  const auto traj = integrate(p, e5, 50);
  for (const auto& y : traj.states) EXPECT_LE((y - e5).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(traj.size(), 200u);
}

TEST(Integrate, ConvergesToReferencePoint) {
  const auto p = validate_params(reference_rates(100));
  const auto traj = integrate(p, StatePoint(10, 1, 1, 1), 500);
  EXPECT_LE((traj.final_state() - StatePoint(5, 0, 0, 14)).cwiseAbs().maxCoeff(), 1e-5);
  for (std::size_t k = 1; k < traj.size(); ++k) EXPECT_GT(traj.times[k], traj.times[k - 1]);
}

TEST(Integrate, FacesAreInvariantAndStatesNonnegative) {
  const auto p = validate_params(chain_rates(10));
  const auto traj = integrate(p, StatePoint(3, 0.5, 0, 2), 200);
  for (const auto& y : traj.states) {
    EXPECT_EQ(y[2], 0.0);
    EXPECT_GE(y.minCoeff(), 0.0);
  }
}

TEST(Integrate, RejectsBadInput) {
  const auto p = validate_params(reference_rates(100));
  EXPECT_THROW(integrate(p, StatePoint(-1, 1, 1, 1), 10), Error);
  EXPECT_THROW(integrate(p, StatePoint(1, 1, 1, 1), 0), Error);
}

TEST(Lyapunov, ConstantAtTarget) {
  Trajectory t;
  const StatePoint ys(5, 0, 0, 14);
  for (int i = 0; i < 5; ++i) {
    t.times.push_back(i);
    t.states.push_back(ys);
  }
  const auto s = lyapunov_series(t, ys);
  EXPECT_EQ(s.max_increase, 0.0);
  EXPECT_NEAR(s.values[0], 5 - 5 * std::log(5.0) + 14 - 14 * std::log(14.0), 1e-12);
}

TEST(Lyapunov, LogOfNonpositive) {
  try {
    lyapunov_value(StatePoint(1, 0, 1, 1), StatePoint(1, 1, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LogOfNonpositive);
  }
  EXPECT_NO_THROW(lyapunov_value(StatePoint(1, 0, 1, 1), StatePoint(1, 0, 0, 1)));
}

TEST(Lyapunov, NonincreasingAndBoundedBelow) {
  const auto p = validate_params(chain_rates(10));
  const auto target = classify_f_stable(p).point;
  const auto traj = integrate(p, StatePoint(1, 2, 3, 0.5), 300);
  const auto s = lyapunov_series(traj, target);
  EXPECT_LE(s.max_increase, 1e-7);
  const double vstar = lyapunov_value(target, target);
  for (double v : s.values) EXPECT_GE(v, vstar - 1e-12);
}

TEST(Lyapunov, DerivativeIdentityByFiniteDifferences) {
  const auto p = validate_params(reference_rates(8));
  const SystemForm f = assemble_system(p);
  const StatePoint target = classify_f_stable(p).point;
  IntegrateOptions o;
  o.rtol = 1e-12;
  o.atol = 1e-14;
  const auto traj = integrate(p, StatePoint(1, 2, 0.5, 3), 20, o);
  // Central differences of V along short forward and backward integrations.
  for (std::size_t k = 10; k + 10 < traj.size(); k += 25) {
    const StatePoint y = traj.states[k];
    const double h = 1e-4;
    const auto fwd = integrate(p, y, h, o).final_state();
    const StatePoint y_minus = [&] {
      // Integrate the time-reversed field.
      StatePoint s = y;
      ode::StepStats st;
      ode::StepperOptions so;
      so.rtol = 1e-12;
      so.atol = 1e-14;
      ode::integrate_adaptive([&](const StatePoint& z) -> StatePoint { return -vector_field(f, z); }, s, 0.0, h, so,
                              st, [](double, const StatePoint&) {});
      return s;
    }();
    const double numeric = (lyapunov_value(fwd, target) - lyapunov_value(y_minus, target)) / (2 * h);
    const double analytic = lyapunov_rate(f, y, target);
    EXPECT_NEAR(numeric, analytic, 1e-4 * std::max(1e-3, std::abs(analytic))) << k;
  }
}

TEST(Bounds, TrajectoriesSatisfyBounds) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = coinfect::testing::random_admissible(rng, 0.2, 5, 1, 50);
    const double S2 = p.derived().S2;
    const StatePoint y0(2 * S2 * u(rng), u(rng) * S2, u(rng) * S2, u(rng) * S2);
    const auto traj = integrate(p, y0, 50);
    EXPECT_TRUE(bounds_check(traj, p).empty()) << trial;
  }
}

TEST(Bounds, SusceptibleAboveCapacityDecreases) {
  const auto p = validate_params(reference_rates(100));
  const auto traj = integrate(p, StatePoint(100, 1, 1, 1), 100);
  for (const auto& y : traj.states) EXPECT_LE(y[0], 100.0 + 1e-9);
  EXPECT_TRUE(bounds_check(traj, p).empty());
}

TEST(Bounds, FakeTrajectoryIsCaught) {
  const auto p = validate_params(reference_rates(100));
  Trajectory t;
  const double S2 = p.derived().S2;
  t.times = {0, 1, 2};
  t.states = {StatePoint(S2 - 1, 0, 0, 0), StatePoint(S2 + 1, 0, 0, 0), StatePoint(S2 + 1, 0, 0, 0)};
  const auto v = bounds_check(t, p);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const BoundViolation& b) { return b.kind == BoundKind::SusceptibleMax; }));
}

TEST(Bounds, HealthyEquilibriumSitsOnTheEnvelope) {
  const auto p = validate_params(reference_rates(100));
  const auto traj = integrate(p, StatePoint(75, 0, 0, 0), 10);
  for (const auto& y : traj.states) EXPECT_NEAR(y[0], 75.0, 1e-10);
  EXPECT_TRUE(bounds_check(traj, p).empty());
}

TEST(Recovered, ZeroWithoutRecovery) {
  const auto p = validate_params(reference_rates(100));
  const auto traj = integrate(p, StatePoint(10, 1, 1, 1), 10);
  for (double r : integrate_recovered(p, traj, 0.0)) EXPECT_EQ(r, 0.0);
}

TEST(Recovered, PureDecay) {
  auto m = reference_rates(100);
  m.mu4p = 1.0;
  const auto p = validate_params(m);
  const auto traj = integrate(p, StatePoint(10, 1, 1, 1), 5);
  const auto R = integrate_recovered(p, traj, 1.0);
  for (std::size_t k = 0; k < R.size(); ++k) EXPECT_NEAR(R[k], std::exp(-traj.times[k]), 1e-12);
}

TEST(Recovered, SteadyStateAtE5) {
  auto m = reference_rates(100);
  m.rho1 = m.rho2 = m.rho3 = 0.1;
  m.mu4p = 0.5;
  const auto p = validate_params(m);
  const auto traj = integrate(p, StatePoint(10, 1, 1, 1), 500);
  EXPECT_NEAR(integrate_recovered(p, traj, 0.0).back(), 2.8, 1e-4);
}

TEST(Convergence, ReportOnReferenceRates) {
  const auto p = validate_params(reference_rates(100));
  const auto rep = converge_to(p, StatePoint(10, 1, 1, 1), StatePoint(5, 0, 0, 14));
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.lyapunov_max_increase, 1e-6);
  EXPECT_TRUE(rep.bound_violations.empty());
}

TEST(InfiniteK, ReferenceEquilibria) {
  const auto p = validate_params(reference_rates(kInfiniteCapacity));
  const auto r = infinite_k_equilibria(p);
  EXPECT_NEAR(r.gamma1, 0.9, 1e-15);
  EXPECT_NEAR(r.gamma2, -0.25, 1e-15);
  ASSERT_EQ(r.candidates.size(), 3u);
  EXPECT_NEAR((r.candidates[0].y - StatePoint(2, 6, 0, 0)).cwiseAbs().maxCoeff(), 0, 1e-12);
  EXPECT_NEAR((r.candidates[1].y - StatePoint(5, 0, 0, 15)).cwiseAbs().maxCoeff(), 0, 1e-12);
  EXPECT_FALSE(r.candidates[2].feasible);
  EXPECT_EQ(r.region, InfiniteKRegion::B);
  EXPECT_EQ(r.selected.primary(), Label::Eprime5);
  // F-part of E'3 against direct evaluation.
  const SystemForm f = assemble_system_infinite(p);
  EXPECT_NEAR((growth_rates(f, r.candidates[0].y) - r.candidates[0].f).cwiseAbs().maxCoeff(), 0, 1e-12);
}

TEST(InfiniteK, RegionA) {
  auto m = reference_rates(kInfiniteCapacity);
  m.alpha3 = 0.9;  // sigma3 = 1.11 breaks ordering, so raise mu3 too
  m.mu3 = 9;
  const auto r = infinite_k_equilibria(validate_params(m));
  EXPECT_LT(r.gamma1, 0);
  EXPECT_EQ(r.region, InfiniteKRegion::A);
  EXPECT_EQ(r.selected.primary(), Label::Eprime3);
}

TEST(InfiniteK, RegionCAndDeltaZero) {
  auto m = reference_rates(kInfiniteCapacity);
  m.eta2 = 0.01;
  const auto r = infinite_k_equilibria(validate_params(m));
  EXPECT_GT(r.gamma1, 0);
  EXPECT_GT(r.gamma2, 0);
  EXPECT_EQ(r.region, InfiniteKRegion::C);
  EXPECT_EQ(r.selected.primary(), Label::Eprime8);
  EXPECT_LE(r.selected.f.cwiseAbs().maxCoeff(), 1e-12);

  auto z = reference_rates(kInfiniteCapacity);
  z.eta2 = 0.2;
  EXPECT_EQ(infinite_k_equilibria(validate_params(z)).candidates.size(), 2u);
}

TEST(InfiniteK, Borderline) {
  auto m = reference_rates(kInfiniteCapacity);
  m.eta2 = 0.05 / 3;  // gamma2 = 0
  try {
    infinite_k_equilibria(validate_params(m));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BorderlineGamma);
  }
}

TEST(InfiniteK, CaseAInvariantOnFace) {
  const auto p = validate_params(reference_rates(kInfiniteCapacity));
  const StatePoint e3(2, 6, 0, 0);
  const auto fixed = integrate_infinite_k(p, e3, 50);
  EXPECT_EQ(invariant_drift(fixed, e3, InfiniteKRegion::A), 0.0);
  const auto orbit = integrate_infinite_k(p, StatePoint(2.5, 5, 0, 0), 100);
  EXPECT_LT(invariant_drift(orbit, e3, InfiniteKRegion::A), 1e-6);
  for (const auto& y : orbit.states) EXPECT_EQ(y[2] + y[3], 0.0);
}

TEST(InfiniteK, CoarseToleranceDrifts) {
  const auto p = validate_params(reference_rates(kInfiniteCapacity));
  const StatePoint e3(2, 6, 0, 0);
  IntegrateOptions coarse;
  coarse.rtol = 1e-3;
  coarse.atol = 1e-5;
  const double tight = invariant_drift(integrate_infinite_k(p, StatePoint(4, 2, 0, 0), 100), e3, InfiniteKRegion::A);
  const double loose =
      invariant_drift(integrate_infinite_k(p, StatePoint(4, 2, 0, 0), 100, coarse), e3, InfiniteKRegion::A);
  EXPECT_GT(loose, 10 * tight);
}
