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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.h"
#include "zolqr/errors.h"
#include "zolqr/harness.h"

namespace zolqr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::scalar;

json benchmark_json() {
  return json{{"A", {{2, 3}, {1, 2}}}, {"B", {{1}, {-1}}}, {"Q", {{2, -1}, {-1, 2}}}, {"R", {{2}}}};
}

ExperimentSpec quick_spec(std::int64_t iters = 1500) {
  ExperimentSpec s;
  s.system = benchmark_json();
  s.trials = 4;
  s.seed = 3;
  s.config.iterations = iters;
  s.constant_probes = 0;
  s.record_stride = 50;
  return s;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "zolqr_harness" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

TEST_CASE("initial policy on the scalar plant matches the closed-form inverse") {
  // gap(K) = 2K^2/(1-K^2), so |K| = sqrt(g / (2 + g)).
  const LtiSystem s = testing::scalar_system(0.0);
  for (double g : {0.01, 0.5, 3.0}) {
    RngStream rng(1, 0);
    const Policy k = make_initial_policy(s, g, rng, scalar(1.0));
    CHECK(std::abs(k.gain()(0, 0)) == doctest::Approx(std::sqrt(g / (2 + g))).epsilon(0.01));
    CHECK(std::abs(cost_exact(s, k) - 1.0 - g) <= 0.01 * g);
  }
}

TEST_CASE("initial policy on the benchmark plant") {
  const LtiSystem sys = testing::benchmark_system();
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  const double j_star = cost_exact(sys, sys.optimal().k_star, sigma);
  double prev_dist = 1e300;
  for (double g : {1.0, 1e-2, 1e-4}) {
    RngStream rng(2, 0);
    const Policy k = make_initial_policy(sys, g, rng, sigma);
    CHECK(is_stabilizing(sys, k));
    CHECK(std::abs(cost_exact(sys, k, sigma) - j_star - g) <= 0.01 * g);
    const double dist = (k.gain() - sys.optimal().k_star.gain()).norm();
    CHECK(dist < prev_dist);
    prev_dist = dist;
  }
  CHECK(prev_dist < 1e-3);
  RngStream rng(2, 0);
  CHECK_THROWS_AS(make_initial_policy(sys, 0.0, rng, sigma), InvalidInput);
  CHECK_THROWS_AS(make_initial_policy(sys, -1.0, rng, sigma), InvalidInput);
}

TEST_CASE("spec validation and round trip") {
  ExperimentSpec s = quick_spec();
  s.eps = {1.0, 0.5};
  s.k0 = testing::mat({{-5.0, -8.7}});
  s.target_gap = 2.0;
  s.rollout_grid = {0, 10};
  s.sweep_horizon = SweepHorizon::kFixed;
  const ExperimentSpec back = spec_from_json(json::parse(spec_to_json(s).dump()));
  CHECK(spec_to_json(back) == spec_to_json(s));
  CHECK(back.k0->isApprox(*s.k0));
  CHECK_FALSE(spec_to_json(s).contains("workers"));

  ExperimentSpec bad = quick_spec();
  bad.trials = 0;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  bad = quick_spec();
  bad.eps = {0.5, 1.0};
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  bad.eps = {1.0, -0.5};
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  bad = quick_spec();
  bad.constant_probes = 10;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  CHECK_THROWS_AS(spec_from_json(json{{"trials", 2}}), InvalidInput);
  CHECK_THROWS_AS(experiment_kind_from_string("plot"), InvalidInput);
  CHECK(experiment_kind_from_string("delta_sweep") == ExperimentKind::kDeltaSweep);
  CHECK(back.sweep_horizon == SweepHorizon::kFixed);
  CHECK_THROWS_AS(sweep_horizon_from_string("auto"), InvalidInput);
}

TEST_CASE("explicit K0 must stabilize and fit") {
  ExperimentSpec s = quick_spec();
  s.k0 = Eigen::MatrixXd::Zero(1, 2);
  CHECK_THROWS_AS(prepare_experiment(s), InvalidInput);
  s.k0 = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(prepare_experiment(s), InvalidInput);
  s.k0 = testing::benchmark_k_star() + testing::mat({{0.01, 0.0}});
  const ExperimentContext ctx = prepare_experiment(s);
  CHECK(ctx.k0.gain() == *s.k0);
  CHECK(ctx.delta0 > 0.0);
}

TEST_CASE("default K0 sits at half the optimal cost") {
  const ExperimentContext ctx = prepare_experiment(quick_spec());
  CHECK(std::abs(ctx.delta0 - 0.5 * ctx.j_star) <= 0.01 * 0.5 * ctx.j_star);
  CHECK(ctx.j_star == doctest::Approx(testing::kBenchmarkJStar / 2).epsilon(1e-11));
}

TEST_CASE("convergence experiment artifacts") {
  const fs::path out = scratch_dir("conv");
  const ExperimentSpec spec = quick_spec();
  const ConvergenceResult r = run_convergence_experiment(spec, out);
  CHECK(r.traces.size() == 4);
  CHECK(first_line(out / "trace_000.csv") ==
        "trial,s,J_exact,gap,grad_norm_exact,G_norm,E_norm,tau_flag,diverged");
  CHECK(first_line(out / "summary.csv") == "trial,final_gap,tau,diverged,iters_run");
  CHECK(fs::exists(out / "trace_003.csv"));
  const json m = json::parse(slurp(out / "manifest.json"));
  for (const char* key : {"version", "spec", "system", "dare", "K0", "delta0", "constants",
                          "config", "seeds", "J_star_sigma0", "initial_state"}) {
    CHECK(m.contains(key));
  }
  CHECK(m.at("dare").at("J_star").get<double>() ==
        doctest::Approx(testing::kBenchmarkJStar).epsilon(1e-12));
  // The manifest alone reproduces the run.
  const ExperimentSpec replay = spec_from_json(m.at("spec"));
  const fs::path out2 = scratch_dir("conv_replay");
  run_convergence_experiment(replay, out2);
  CHECK(slurp(out / "summary.csv") == slurp(out2 / "summary.csv"));
  CHECK(slurp(out / "trace_002.csv") == slurp(out2 / "trace_002.csv"));
  CHECK(slurp(out / "manifest.json") == slurp(out2 / "manifest.json"));
}

TEST_CASE("zero iterations report the initial gap") {
  ExperimentSpec spec = quick_spec(0);
  spec.trials = 1;
  const fs::path out = scratch_dir("zero_iters");
  const ConvergenceResult r = run_convergence_experiment(spec, out);
  CHECK(r.traces[0].final_gap == r.delta0);
  std::ifstream in(out / "summary.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(row == "0," + format_number(r.delta0) + ",-1,0,0");
}

TEST_CASE("all diverged trials fail the experiment after writing traces") {
  ExperimentSpec spec = quick_spec(200);
  spec.config.eta = 1e-2;
  const fs::path out = scratch_dir("diverged");
  CHECK_THROWS_AS(run_convergence_experiment(spec, out), ExperimentFailed);
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(fs::exists(out / "trace_000.csv"));
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("outputs do not depend on the worker count") {
  ExperimentSpec spec = quick_spec(800);
  spec.trials = 6;
  spec.perturbation = PerturbationKind::kSphereUniform;
  spec.config.delta_bound = 5.0;
  const fs::path a = scratch_dir("w1"), b = scratch_dir("w3");
  run_convergence_experiment(spec, a);
  spec.workers = 3;
  run_convergence_experiment(spec, b);
  for (const char* f : {"summary.csv", "trace_000.csv", "trace_005.csv", "manifest.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("log-log fit") {
  std::vector<double> x, y;
  for (int k = 0; k < 5; ++k) {
    x.push_back(std::pow(10.0, -k * 0.5));
    y.push_back(std::sqrt(x.back()));
  }
  const auto fit = loglog_fit(x, y);
  REQUIRE(fit);
  CHECK(fit->first == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(fit->second) < 1e-12);
  CHECK_FALSE(loglog_fit({1.0}, {1.0}));
  CHECK_FALSE(loglog_fit({1.0, 1.0}, {1.0, 2.0}));
  CHECK_THROWS_AS(loglog_fit({1.0}, {1.0, 2.0}), InvalidInput);
}

TEST_CASE("single-point sweep") {
  ExperimentSpec spec = quick_spec(2000);
  spec.experiment = ExperimentKind::kDeltaSweep;
  spec.sweep_horizon = SweepHorizon::kFixed;
  spec.perturbation = PerturbationKind::kAdversarial;
  spec.eps = {0.05};
  spec.eps_relative = true;
  spec.bisection_rounds = 4;
  const fs::path out = scratch_dir("sweep1");
  const SweepResult r = run_delta_sweep(spec, out);
  REQUIRE(r.rows.size() == 1);
  CHECK_FALSE(r.slope);
  CHECK(r.rows[0].eps == doctest::Approx(0.05 * r.delta0));
  CHECK(first_line(out / "sweep.csv") == "eps,delta_max,success_rate,trials,infeasible");
  CHECK(json::parse(slurp(out / "manifest.json")).at("fit").at("slope").is_null());
}

TEST_CASE("sweep rows are monotone and honour the threshold") {
  ExperimentSpec spec = quick_spec(2000);
  spec.experiment = ExperimentKind::kDeltaSweep;
  spec.sweep_horizon = SweepHorizon::kFixed;
  spec.perturbation = PerturbationKind::kAdversarial;
  spec.eps = {0.05, 0.02, 0.008, 0.003};
  spec.eps_relative = true;
  spec.bisection_rounds = 5;
  const SweepResult r = run_delta_sweep(spec, scratch_dir("sweep4"));
  REQUIRE(r.rows.size() == 4);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (!r.rows[i].infeasible) CHECK(r.rows[i].success_rate >= spec.success_fraction);
    if (i > 0) CHECK(r.rows[i].delta_max <= r.rows[i - 1].delta_max);
  }
  CHECK(r.slope);
}

TEST_CASE("theorem horizon per tolerance") {
  ExperimentSpec spec = quick_spec();
  spec.experiment = ExperimentKind::kDeltaSweep;
  spec.trials = 2;
  spec.config.eta = 2e-5;
  spec.constant_probes = 100;
  spec.eps = {0.1, 0.05};
  spec.eps_relative = true;
  spec.bisection_rounds = 2;
  const fs::path out = scratch_dir("sweep_theorem");
  const SweepResult r = run_delta_sweep(spec, out);
  const ExperimentContext ctx = prepare_experiment(spec);
  const double mu = with_mu_safety(*ctx.constants, spec.mu_safety).mu;
  REQUIRE(r.rows.size() == 2);
  for (const SweepRow& row : r.rows) {
    CHECK(row.iterations == iteration_count(spec.config.eta, mu, ctx.delta0, row.eps));
  }
  CHECK(r.rows[1].iterations > r.rows[0].iterations);
  const json m = json::parse(slurp(out / "manifest.json"));
  CHECK(m.at("horizons") == json{r.rows[0].iterations, r.rows[1].iterations});

  spec.constant_probes = 0;
  CHECK_THROWS_AS(validate(spec), InvalidInput);
}

TEST_CASE("unreachable tolerance is marked infeasible") {
  ExperimentSpec spec = quick_spec(50);
  spec.experiment = ExperimentKind::kDeltaSweep;
  spec.sweep_horizon = SweepHorizon::kFixed;
  spec.eps = {1e-6};
  spec.eps_relative = true;
  const SweepResult r = run_delta_sweep(spec, scratch_dir("infeasible"));
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].infeasible);
  CHECK(r.rows[0].success_rate < spec.success_fraction);
}

TEST_CASE("paired seeds: no perturbation succeeds at least as often") {
  // Against sphere-uniform noise the unperturbed run's success rate is the
  // ceiling, trial by trial on common streams.
  ExperimentContext ctx = prepare_experiment(quick_spec());
  AlgoConfig c = default_experiment_config();
  c.iterations = 2500;
  const double eps = 0.002 * ctx.delta0;
  const auto count = [&](const PerturbationModel& p) {
    int ok = 0;
    for (const RunTrace& t : run_trials(ctx.sys, ctx.k0, c, p, ctx.dist, 5, 10, 1)) {
      ok += t.final_gap < eps;
    }
    return ok;
  };
  const int clean = count({});
  CHECK(clean >= count({PerturbationKind::kSphereUniform, 40.0, 0}));
  CHECK(clean >= count({PerturbationKind::kAdversarial, 40.0, 0}));
}

TEST_CASE("rollout study") {
  ExperimentSpec spec = quick_spec(2000);
  spec.experiment = ExperimentKind::kRolloutStudy;
  spec.perturbation = PerturbationKind::kZero;
  spec.constant_probes = 200;
  spec.fit_probes = 100;
  spec.eps = {0.1, 0.01};
  spec.eps_relative = true;
  spec.rollout_grid = {0, 1, 1000};
  const fs::path out = scratch_dir("rollout");
  const RolloutStudyResult r = run_rollout_study(spec, out);
  REQUIRE(r.arms.size() == 3);
  REQUIRE(r.predictions.size() == 2);
  const ExperimentContext ctx = prepare_experiment(spec);
  const ConstantsEstimate c = with_mu_safety(*ctx.constants, spec.mu_safety);
  for (const RolloutPrediction& p : r.predictions) {
    CHECK(p.t_delta == rollout_length_bound(r.fit, 2, spec.config.radius, p.eps, c, 1.0));
  }
  CHECK(r.predictions[1].t_delta >= r.predictions[0].t_delta);
  // A long horizon is indistinguishable from exact costs.
  for (int i = 0; i < spec.trials; ++i) {
    CHECK(std::abs(r.arms[2].final_gaps[i] - r.arms[0].final_gaps[i]) < 1e-6);
  }
  // One-step rollouts are severely biased: every trial stalls far above the
  // exact-cost runs or leaves K_st.
  for (int i = 0; i < spec.trials; ++i) {
    CHECK(r.arms[1].final_gaps[i] > 100.0 * r.arms[0].final_gaps[i]);
  }
  CHECK(first_line(out / "rollout.csv") == "rollout_length,trial,final_gap,tau,diverged,iters_run");
  CHECK(first_line(out / "rollout_prediction.csv") == "eps,t_delta,t_delta_real,gamma,M,beta");

  ExperimentSpec no_grid = quick_spec(10);
  no_grid.experiment = ExperimentKind::kRolloutStudy;
  CHECK_THROWS_AS(run_rollout_study(no_grid, scratch_dir("rollout_bad")), InvalidInput);
}

TEST_CASE("constants report") {
  ExperimentSpec spec = quick_spec();
  spec.experiment = ExperimentKind::kConstantsReport;
  spec.constant_probes = 200;
  spec.fit_probes = 100;
  spec.eps = {0.1, 0.01};
  spec.eps_relative = true;
  const fs::path out = scratch_dir("constants");
  const json rep = run_constants_report(spec, out);
  CHECK(rep.at("schedules").size() == 2);
  CHECK(rep.at("schedules")[0].at("two_point").contains("eta"));
  CHECK(rep.at("rollout_prediction").size() == 2);
  CHECK(json::parse(slurp(out / "constants.json")) == rep);
  spec.constant_probes = 0;
  CHECK_THROWS_AS(run_constants_report(spec, out), InvalidInput);
}

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, 994.048454452455, 1e-300}) {
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

}  // namespace
}  // namespace zolqr
