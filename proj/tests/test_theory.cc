// Copyright 2026 The zolqr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "test_support.h"
#include "zolqr/errors.h"
#include "zolqr/harness.h"
#include "zolqr/theory.h"

namespace zolqr {
namespace {

using testing::benchmark_system;
using testing::scalar;

ConstantsEstimate all_ones() {
  ConstantsEstimate c;
  c.mu = c.phi0 = c.lambda0 = c.rho0 = c.theta0 = c.delta0 = c.c_m = c.j_k0 = 1.0;
  c.d = 1;
  return c;
}

const ScheduleOptions kLiteral{1.0};

TEST_CASE("theta0 formula") {
  CHECK(theta0_from(2.0, 0.5, 4.0) == 0.125);
  CHECK(theta0_from(0.1, 10.0, 1.0) == 5.0);
}

TEST_CASE("all-ones substitution") {
  const ConstantsEstimate c = all_ones();
  const std::vector<double> r = radius_caps(c, 15.0, EstimatorKind::kOnePoint);
  REQUIRE(r.size() == 4);
  CHECK(r[0] == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(r[2] == 1.0);
  CHECK(r[3] == 10.0);
  CHECK(radius_caps(c, 15.0, EstimatorKind::kTwoPoint).size() == 3);
  // eps = 15 with Delta0 = 1 violates eps log(120 Delta0/eps) < 12 Delta0.
  CHECK_FALSE(tolerance_admissible(15.0, 1.0));
  CHECK_THROWS_AS(schedule_one_point(c, 15.0, 1, kLiteral), InvalidTolerance);

  // eps = 480: one of 1, 1/4, 1/(1 + delta); the second binds.
  const auto eta = eta_caps_two_point(c, 480.0, 1, 0.0);
  CHECK(eta[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eta[1] == 0.25);
  CHECK(eta[2] == 1.0);
  const AlgoConfig two = schedule_two_point(c, 480.0, 1, kLiteral);
  CHECK(two.eta == 0.25);
  CHECK(two.mode == EstimatorKind::kTwoPoint);
  // log(120/480) < 0, so the iteration count floors at one.
  CHECK(two.iterations == 1);
}

TEST_CASE("schedule preconditions") {
  ConstantsEstimate c = all_ones();
  CHECK_THROWS_AS(schedule_two_point(c, 0.0, 1, kLiteral), InvalidTolerance);
  CHECK_THROWS_AS(schedule_two_point(c, -1.0, 1, kLiteral), InvalidTolerance);
  CHECK_THROWS_AS(schedule_two_point(c, 0.1, 0, kLiteral), InvalidInput);
  c.phi0 = 0.0;
  CHECK_THROWS_AS(schedule_two_point(c, 0.1, 1, kLiteral), InvalidInput);
  CHECK(tolerance_admissible(0.1, 1.0));
}

TEST_CASE("iteration count is the ceiling of the formula") {
  CHECK(iteration_count(0.01, 2.0, 1.0, 0.1) ==
        static_cast<std::int64_t>(std::ceil(200.0 * std::log(1200.0))));
  // Exact integers are not bumped by rounding noise.
  const double eps = 120.0 / std::exp(1.0);
  CHECK(iteration_count(4.0, 1.0, 1.0, eps) == 1);
  CHECK(iteration_count(1e-300, 1e-300, 1.0, 0.1) == std::numeric_limits<std::int64_t>::max());
  CHECK_THROWS_AS(iteration_count(0.0, 1.0, 1.0, 0.1), InvalidInput);
}

// Constants where the eps-driven caps bind for every eps used below.
ConstantsEstimate eps_bound_constants() {
  ConstantsEstimate c;
  c.mu = 0.8;
  c.phi0 = 3.0;
  c.lambda0 = 2.0;
  c.rho0 = 1e6;
  c.theta0 = theta0_from(c.phi0, c.rho0, c.lambda0);
  c.delta0 = 5.0;
  c.c_m = 2.0;
  c.j_k0 = 1e6;
  return c;
}

TEST_CASE("tolerance scalings") {
  const ConstantsEstimate c = eps_bound_constants();
  const AlgoConfig one_a = schedule_one_point(c, 0.04, 4, kLiteral);
  const AlgoConfig one_b = schedule_one_point(c, 0.16, 4, kLiteral);
  CHECK(one_b.delta_bound / one_a.delta_bound == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(one_b.radius / one_a.radius == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(one_b.eta / one_a.eta == doctest::Approx(16.0).epsilon(1e-12));
  const AlgoConfig two_a = schedule_two_point(c, 0.04, 4, kLiteral);
  const AlgoConfig two_b = schedule_two_point(c, 0.16, 4, kLiteral);
  CHECK(two_b.eta / two_a.eta == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(two_b.delta_bound / two_a.delta_bound == doctest::Approx(2.0).epsilon(1e-12));

  // log-log slopes over two decades.
  std::vector<double> eps, delta, radius;
  for (int k = 0; k <= 8; ++k) {
    const double e = 1e-3 * std::pow(10.0, k / 4.0);
    const AlgoConfig s = schedule_two_point(c, e, 4, kLiteral);
    eps.push_back(e);
    delta.push_back(s.delta_bound);
    radius.push_back(s.radius);
  }
  CHECK(std::abs(loglog_fit(eps, delta)->first - 0.5) <= 1e-9);
  CHECK(std::abs(loglog_fit(eps, radius)->first - 0.5) <= 1e-9);
}

TEST_CASE("mu safety scales mu before substitution") {
  const ConstantsEstimate c = eps_bound_constants();
  const AlgoConfig half = schedule_two_point(c, 0.1, 4, ScheduleOptions{0.5});
  const AlgoConfig literal = schedule_two_point(with_mu_safety(c, 0.5), 0.1, 4, kLiteral);
  CHECK(half.eta == literal.eta);
  CHECK(half.iterations == literal.iterations);
  CHECK(with_mu_safety(c, 0.5).mu == 0.4);
  CHECK_THROWS_AS(with_mu_safety(c, 0.0), InvalidInput);
}

TEST_CASE("decay fit") {
  SUBCASE("nilpotent closed loop") {
    const LtiSystem s = testing::scalar_system(0.0);
    const DecayFit fit = fit_decay(s, {Policy(scalar(0.0))}, 50);
    CHECK(fit.gamma == kDecayMargin);
    CHECK(fit.m == 1.0);
    CHECK(fit.beta == doctest::Approx(1.0));
  }
  SUBCASE("scalar closed loop 0.5") {
    const LtiSystem s = testing::scalar_system(0.0);
    const DecayFit fit = fit_decay(s, {Policy(scalar(-0.5))}, 200);
    CHECK(fit.gamma == doctest::Approx(0.501).epsilon(1e-14));
    CHECK(fit.m == doctest::Approx(1.0));
    CHECK(fit.beta == doctest::Approx(1.25));
    for (int t = 0; t < 200; ++t) CHECK(std::pow(0.25, t) <= fit.m * std::pow(fit.gamma, 2 * t));
  }
  SUBCASE("benchmark optimum") {
    const LtiSystem sys = benchmark_system();
    const DecayFit fit = fit_decay(sys, {sys.optimal().k_star}, 500);
    CHECK(fit.gamma < 1.0);
    CHECK(fit.gamma == doctest::Approx(testing::kBenchmarkClosedLoopRho + kDecayMargin));
  }
  SUBCASE("marginal probe") {
    const LtiSystem s = testing::scalar_system(1.0);
    CHECK_THROWS_AS(fit_decay(s, {Policy(scalar(1e-4))}, 10), FitFailed);
    CHECK_THROWS_AS(fit_decay(s, {Policy(scalar(3.0))}, 10), InvalidInput);
    CHECK_THROWS_AS(fit_decay(s, {}, 10), InvalidInput);
  }
}

TEST_CASE("rollout length bound") {
  ConstantsEstimate c = all_ones();
  DecayFit fit{1.0, 0.5, 1.0};
  // Choose eps so the first log argument is e^2:
  // 16 sqrt(15) / (0.75 sqrt(eps)) = e^2.
  const double root = 16.0 * std::sqrt(15.0) / (0.75 * std::exp(2.0));
  const double eps = root * root;
  CHECK(rollout_length_bound_real(fit, 1, 1.0, eps, c, 1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(rollout_length_bound(fit, 1, 1.0, eps, c, 1.0) == 2);

  // Doubling d adds log 2 / (2 (1 - gamma)) before the ceiling.
  fit = DecayFit{3.0, 0.9, 2.0};
  const double base = rollout_length_bound_real(fit, 2, 0.1, 0.5, c, 1.0);
  CHECK(rollout_length_bound_real(fit, 4, 0.1, 0.5, c, 1.0) - base ==
        doctest::Approx(std::log(2.0) / 0.2).epsilon(1e-12));

  // Monotone in every argument.
  const int t0 = rollout_length_bound(fit, 2, 0.1, 0.5, c, 1.0);
  CHECK(rollout_length_bound(fit, 2, 0.1, 5.0, c, 1.0) <= t0);
  CHECK(rollout_length_bound(fit, 2, 1.0, 0.5, c, 1.0) <= t0);
  CHECK(rollout_length_bound(DecayFit{30.0, 0.9, 2.0}, 2, 0.1, 0.5, c, 1.0) >= t0);
  CHECK(rollout_length_bound(DecayFit{3.0, 0.9, 20.0}, 2, 0.1, 0.5, c, 1.0) >= t0);
  CHECK(rollout_length_bound(fit, 8, 0.1, 0.5, c, 1.0) >= t0);
  CHECK(rollout_length_bound(DecayFit{3.0, 0.5, 2.0}, 2, 0.1, 0.5, c, 1.0) < t0);
  // Tiny arguments never go below one step.
  CHECK(rollout_length_bound(DecayFit{1e-9, 0.1, 1e-9}, 1, 1.0, 1e3, c, 1.0) == 1);

  CHECK_THROWS_AS(rollout_length_bound(DecayFit{1.0, 1.0, 1.0}, 1, 1.0, 1.0, c, 1.0), FitFailed);
  CHECK_THROWS_AS(rollout_length_bound(DecayFit{1.0, 0.5, 1.0}, 1, 0.0, 1.0, c, 1.0), InvalidInput);
  CHECK_THROWS_AS(rollout_length_bound(DecayFit{1.0, 0.5, 1.0}, 1, 1.0, -1.0, c, 1.0), InvalidInput);
}

TEST_CASE("truncation error bound holds on sublevel probes") {
  const LtiSystem sys = benchmark_system();
  const Eigen::MatrixXd sigma0 = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  RngStream rng(21, 0);
  const std::vector<Policy> probes = sample_sublevel_policies(sys, sigma0, 2480.0, 100, rng);
  const DecayFit fit = fit_decay(sys, probes, 2000);
  int violations = 0;
  const int lengths[] = {5, 10, 20, 40};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Eigen::VectorXd x0 = Eigen::Vector2d(rng.normal(), rng.normal());
    const int t = lengths[i % 4];
    const double err = cost_from_state(sys, probes[i], x0) - rollout_cost(sys, probes[i], x0, t);
    violations += err > truncation_error_bound(fit, t, x0.squaredNorm());
  }
  CHECK(violations == 0);
}

TEST_CASE("scalar PL estimate against the closed form") {
  // J(K) = (1 + K^2)/(1 - K^2), J* = 1, PL ratio 8 / (1 - K^2)^3.
  const LtiSystem s = testing::scalar_system(0.0);
  const InitialStateDist dist = InitialStateDist::signed_scaled_basis(1);
  RngStream rng(22, 0);
  const ConstantsEstimate c = estimate_constants(s, Policy(scalar(0.5)), dist, 200, rng);
  const double ratio_quarter = 8.0 / std::pow(1.0 - 0.0625, 3);
  CHECK(c.mu > 0.0);
  CHECK(c.mu >= 8.0 * (1 - 1e-9));
  CHECK(c.mu <= ratio_quarter);
  CHECK(c.delta0 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(c.j_star == doctest::Approx(1.0).epsilon(1e-12));
  // |J'| = 4K/(1-K^2)^2 peaks at the G^0 edge K^2 = 20/26.
  const double k_edge = std::sqrt(20.0 / 26.0);
  const double lambda_true = 4 * k_edge / std::pow(1 - k_edge * k_edge, 2);
  CHECK(c.lambda0 >= 4 * 0.5 / std::pow(0.75, 2));
  CHECK(c.lambda0 <= 1.05 * lambda_true);
  CHECK(c.theta0 == theta0_from(c.phi0, c.rho0, c.lambda0));
  CHECK(c.g_inf_two_point == doctest::Approx(c.d * c.lambda0));
  CHECK(c.g2_two_point == doctest::Approx(c.d * c.lambda0 * c.lambda0));
  CHECK(c.g_inf_one_point(0.1) == doctest::Approx(20 * c.c_m * c.j_k0 * c.d / 0.1));
  CHECK(c.probes_accepted >= 50);
}

TEST_CASE("estimation preconditions") {
  const LtiSystem s = testing::scalar_system(0.0);
  const InitialStateDist dist = InitialStateDist::signed_scaled_basis(1);
  RngStream rng(23, 0);
  CHECK_THROWS_AS(estimate_constants(s, Policy(scalar(0.5)), dist, 99, rng), InvalidInput);
  CHECK_THROWS_AS(estimate_constants(s, Policy(scalar(2.0)), dist, 100, rng), InvalidInput);
  CHECK_THROWS_AS(estimate_constants(s, Policy(scalar(0.5)), InitialStateDist::canonical_basis(2),
                                     100, rng),
                  InvalidInput);
}

TEST_CASE("benchmark constants regression") {
  const LtiSystem sys = benchmark_system();
  ExperimentSpec spec;
  spec.system = nlohmann::json{{"A", {{2, 3}, {1, 2}}}, {"B", {{1}, {-1}}},
                               {"Q", {{2, -1}, {-1, 2}}}, {"R", {{2}}}};
  const ExperimentContext ctx = prepare_experiment(spec);
  REQUIRE(ctx.constants);
  const ConstantsEstimate& c = *ctx.constants;
  for (double v : {c.lambda0, c.phi0, c.rho0, c.mu, c.theta0, c.delta0, c.j_k0}) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
  CHECK(c.lambda0 == doctest::Approx(272635.42122967466).epsilon(1e-6));
  CHECK(c.phi0 == doctest::Approx(58322131.885196336).epsilon(1e-6));
  CHECK(c.mu == doctest::Approx(255.59015168205198).epsilon(1e-6));
  CHECK(c.rho0 == 0.001953125);
  CHECK(c.delta0 == doctest::Approx(248.01726425057927).epsilon(1e-9));
  CHECK(c.c_m == 1.0);
  // Near K* along the soft Hessian axis the PL ratio tends to twice the
  // smallest Hessian eigenvalue, the true infimum here.
  const double h = 1e-4;
  Eigen::Matrix2d hess;
  const Eigen::MatrixXd sigma0 = ctx.dist.second_moment();
  const Eigen::MatrixXd ks = sys.optimal().k_star.gain();
  for (int i = 0; i < 2; ++i) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(1, 2);
    e(0, i) = h;
    hess.col(i) = ((exact_gradient(sys, Policy(ks + e), sigma0) -
                    exact_gradient(sys, Policy(ks - e), sigma0)) / (2 * h)).transpose();
  }
  const double two_lambda_min = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(
                                          0.5 * (hess + hess.transpose())).eigenvalues()(0);
  CHECK(c.mu >= two_lambda_min * (1 - 1e-3));
  CHECK(c.mu <= two_lambda_min * 1.05);

  // Two-point needs fewer iterations whenever its step is at least as large.
  const double eps = 0.1 * c.delta0;
  const AlgoConfig one = schedule_one_point(c, eps, 2);
  const AlgoConfig two = schedule_two_point(c, eps, 2);
  CHECK(two.eta >= one.eta);
  CHECK(two.iterations <= one.iterations);
}

}  // namespace
}  // namespace zolqr
