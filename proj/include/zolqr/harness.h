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


#ifndef ZOLQR_HARNESS_H_
#define ZOLQR_HARNESS_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "zolqr/algo_config.h"
#include "zolqr/lqr.h"
#include "zolqr/sampling.h"
#include "zolqr/theory.h"
#include "zolqr/zo_optim.h"

namespace zolqr {

enum class ExperimentKind { kConvergence, kDeltaSweep, kRolloutStudy, kConstantsReport };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Horizon of a sweep run at tolerance eps: the theorem's
// T_s = ceil(4/(eta mu) log(120 Delta0/eps)) with the spec's eta and the
// safety-scaled mu estimate, or config.iterations for every eps.
enum class SweepHorizon { kTheorem, kFixed };

std::string to_string(SweepHorizon horizon);
SweepHorizon sweep_horizon_from_string(const std::string& name);

// Two-point, eta = 5e-6, r = 0.02, delta = 0, 10000 iterations.
AlgoConfig default_experiment_config();

// Everything needed to reproduce an experiment. Serialized verbatim into the
// manifest; `workers` is left out because it never changes the outputs.
struct ExperimentSpec {
  nlohmann::json system;
  // File the system was read from, or "inline".
  std::string system_source = "inline";
  ExperimentKind experiment = ExperimentKind::kConvergence;
  int trials = 20;
  std::uint64_t seed = 0;
  // Tolerances, decreasing. Multiplied by Delta_0 when eps_relative is set.
  // An empty grid selects the experiment's default.
  std::vector<double> eps;
  bool eps_relative = false;
  // mode, eta, radius, delta_bound, iterations and batch_size are used.
  AlgoConfig config = default_experiment_config();
  PerturbationKind perturbation = PerturbationKind::kSphereUniform;
  InitialStateMode init_state = InitialStateMode::kCanonicalBasis;
  // Explicit K0; otherwise make_initial_policy with target_gap (default
  // 0.5 J(K*)).
  std::optional<Eigen::MatrixXd> k0;
  std::optional<double> target_gap;
  double sublevel_factor = 10.0;
  // Probes for the constants in the manifest; 0 skips the estimate.
  int constant_probes = 400;
  double mu_safety = 0.5;
  // Decay fit used for predicted rollout lengths.
  int fit_probes = 500;
  int fit_horizon = 2000;
  // Sweep protocol.
  double success_fraction = 0.75;
  double delta_hi = 1.0;
  int bisection_rounds = 12;
  double bisection_rel_width = 0.05;
  SweepHorizon sweep_horizon = SweepHorizon::kTheorem;
  // Rollout lengths studied; 0 adds an exact-cost reference arm. Empty
  // means {0, predicted T_delta for each eps}.
  std::vector<int> rollout_grid;
  // Trace CSV row stride; 0 keeps the first and last rows only.
  std::int64_t record_stride = 1;
  int workers = 1;
};

void validate(const ExperimentSpec& spec);
nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

// K0 = K* + c D with D a random unit direction, c bisected until
// |J(K0) - J* - target_gap| <= 0.01 target_gap (costs under sigma0).
// Throws InvalidInput if the ray leaves K_st before reaching the gap.
Policy make_initial_policy(const LtiSystem& sys, double target_gap,
                           RngStream& rng, const Eigen::MatrixXd& sigma0);

// Stream ids derived from the spec seed.
inline constexpr std::uint64_t kInitialPolicyStream = 0;
inline constexpr std::uint64_t kConstantsStream = 1;
inline constexpr std::uint64_t kDecayFitStream = 2;
inline constexpr std::uint64_t kTrialStreamBase = 1000;

// Runs `trials` independent descents; trial i draws from stream
// kTrialStreamBase + i, so results do not depend on `workers`.
std::vector<RunTrace> run_trials(const LtiSystem& sys, const Policy& k0,
                                 const AlgoConfig& config,
                                 const PerturbationModel& pert,
                                 const InitialStateDist& dist, std::uint64_t seed,
                                 int trials, int workers,
                                 const DescentOptions& options = {});

// Resolved inputs shared by every experiment.
struct ExperimentContext {
  LtiSystem sys;
  InitialStateDist dist;
  Policy k0;
  double j_star = 0.0;
  double delta0 = 0.0;
  std::optional<ConstantsEstimate> constants;
};

ExperimentContext prepare_experiment(const ExperimentSpec& spec);

// eps grid in absolute units, or `fallback` (relative to Delta_0) if empty.
std::vector<double> resolve_eps(const ExperimentSpec& spec, double delta0,
                                const std::vector<double>& fallback);

nlohmann::json make_manifest(const ExperimentSpec& spec,
                             const ExperimentContext& ctx);

struct ConvergenceResult {
  std::vector<RunTrace> traces;
  int diverged = 0;
  double delta0 = 0.0;
  double j_star = 0.0;
};

// Writes trace_<trial>.csv, summary.csv and manifest.json into `out`.
// Throws ExperimentFailed after writing if every trial diverged.
ConvergenceResult run_convergence_experiment(const ExperimentSpec& spec,
                                             const std::filesystem::path& out);

struct SweepRow {
  double eps = 0.0;
  double delta_max = 0.0;
  double success_rate = 0.0;
  int trials = 0;
  bool infeasible = false;
  // Iterations after which the gap was compared with eps.
  std::int64_t iterations = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // Least-squares fit of log delta_max on log eps over feasible rows with
  // delta_max > 0; absent with fewer than two such rows.
  std::optional<double> slope;
  std::optional<double> intercept;
  double delta0 = 0.0;
  int evaluations = 0;
};

// Bisects the largest delta at which a fraction >= success_fraction of the
// paired-seed trials has gap < eps after that eps's horizon. Brackets are shared down the grid,
// so delta_max is nonincreasing. Writes sweep.csv and manifest.json.
SweepResult run_delta_sweep(const ExperimentSpec& spec,
                            const std::filesystem::path& out);

// (log x, log y) least-squares slope and intercept; nullopt below two points.
std::optional<std::pair<double, double>> loglog_fit(const std::vector<double>& x,
                                                    const std::vector<double>& y);

struct RolloutArm {
  // 0 denotes exact costs with the spec's perturbation.
  int rollout_length = 0;
  std::vector<double> final_gaps;
  int diverged = 0;
};

struct RolloutPrediction {
  double eps = 0.0;
  int t_delta = 0;
  double t_delta_real = 0.0;
};

struct RolloutStudyResult {
  std::vector<RolloutArm> arms;
  std::vector<RolloutPrediction> predictions;
  DecayFit fit;
  double delta0 = 0.0;
  std::vector<double> eps;
};

// Runs every rollout length with truncation perturbations (paired seeds) and
// records the predicted minimal T_delta per eps. Writes rollout.csv,
// rollout_prediction.csv and manifest.json.
RolloutStudyResult run_rollout_study(const ExperimentSpec& spec,
                                     const std::filesystem::path& out);

// Writes constants.json: the estimate, both schedules per eps, the decay fit
// and predicted rollout lengths. Returns the same document.
nlohmann::json run_constants_report(const ExperimentSpec& spec,
                                    const std::filesystem::path& out);

// %.17g, so every CSV value round-trips exactly.
std::string format_number(double v);

}  // namespace zolqr

#endif  // ZOLQR_HARNESS_H_
