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

#ifndef ZOLQR_ZO_OPTIM_H_
#define ZOLQR_ZO_OPTIM_H_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zolqr/algo_config.h"
#include "zolqr/lqr.h"
#include "zolqr/sampling.h"

namespace zolqr {

// Sampled cost J(K; x0). Either the exact value x0' P_K x0 or a rollout.
using StateCost = std::function<double(const Policy&, const Eigen::VectorXd&)>;

StateCost exact_state_cost(const LtiSystem& sys);
StateCost rollout_state_cost(const LtiSystem& sys, int horizon);

// Matrix of +inf; what the estimators return when a sampled cost is infinite.
Eigen::MatrixXd infinite_estimate(Eigen::Index rows, Eigen::Index cols);
bool is_infinite_estimate(const Eigen::MatrixXd& g);

// J(K + rD; x0) (d / r) D with d = m n.
Eigen::MatrixXd one_point_estimate(const StateCost& cost, const Policy& k,
                                   double radius, const Direction& d,
                                   const Eigen::VectorXd& x0);

// [J(K + rD; x0) - J(K - rD; x0)] (d / 2r) D. Invariant under D -> -D.
Eigen::MatrixXd two_point_estimate(const StateCost& cost, const Policy& k,
                                   double radius, const Direction& d,
                                   const Eigen::VectorXd& x0);

Eigen::MatrixXd estimate_gradient(EstimatorKind kind, const StateCost& cost,
                                  const Policy& k, double radius,
                                  const Direction& d, const Eigen::VectorXd& x0);

enum class PerturbationKind { kZero, kSphereUniform, kAdversarial, kTruncation };

std::string to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(const std::string& name);

struct PerturbationModel {
  PerturbationKind kind = PerturbationKind::kZero;
  // Bound on ||E_s||_F; unused by kTruncation, whose size follows from the
  // rollout length.
  double delta = 0.0;
  // Rollout length for kTruncation.
  int rollout_length = 0;
};

// What a perturbation source may look at when producing E_s.
struct PerturbationContext {
  const Policy& k;
  RngStream& rng;
  // Exact gradient oracle, required by kAdversarial.
  std::function<Eigen::MatrixXd(const Policy&)> gradient;
  // Estimator evaluated on exact and on rollout costs with a shared (D, x0),
  // required by kTruncation.
  std::function<Eigen::MatrixXd()> exact_estimate;
  std::function<Eigen::MatrixXd()> rollout_estimate;
};

// E_s for one iteration.
//   kZero:          0.
//   kSphereUniform: delta' D' with D' uniform on the sphere, delta' ~ U[0, delta].
//   kAdversarial:   delta grad J / ||grad J||_F (0 when ||grad J|| < 1e-12).
//   kTruncation:    exact_estimate - rollout_estimate.
Eigen::MatrixXd make_perturbation(const PerturbationModel& model,
                                  const PerturbationContext& ctx);

inline constexpr std::int64_t kNeverStopped = -1;

struct TraceRecord {
  std::int64_t s = 0;
  double j_exact = 0.0;
  double gap = 0.0;
  double grad_norm_exact = 0.0;
  // Norms of the estimate and perturbation used in the update taken at s.
  // Zero on the final row, where no update follows.
  double g_norm = 0.0;
  double e_norm = 0.0;
  // ||x0||^2 of the sample used at s (0 on the final row).
  double x0_norm2 = 0.0;
  // s >= tau.
  bool past_tau = false;
  bool diverged = false;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  // First s with gap > sublevel_factor * Delta_0, or kNeverStopped.
  std::int64_t tau = kNeverStopped;
  bool diverged = false;
  Eigen::MatrixXd final_gain;
  double initial_gap = 0.0;
  double final_gap = 0.0;
  double optimal_cost = 0.0;
  std::int64_t iterations_run = 0;
};

struct DescentOptions {
  // G^0 = {K : gap <= sublevel_factor * Delta_0}.
  double sublevel_factor = 10.0;
  // Record every `record_stride`-th iterate plus the last one. 0 keeps only
  // the first and last rows. tau and divergence are tracked every iteration
  // regardless.
  std::int64_t record_stride = 1;
  // Further iterates to record, e.g. the horizons of several tolerances
  // served by a single run.
  std::vector<std::int64_t> checkpoints;
};

// Perturbed derivative-free descent
//   K_{s+1} = K_s - eta G(K_s) + eta E_s.
// The update only sees sampled costs; exact costs, gaps and gradient norms
// are instrumentation computed with Sigma0 = dist.second_moment(). The loop
// halts when K_s leaves the stabilizing set; leaving G^0 only sets tau.
RunTrace run_descent(const LtiSystem& sys, const Policy& k0,
                     const AlgoConfig& config, const PerturbationModel& pert,
                     const InitialStateDist& dist, RngStream& rng,
                     const DescentOptions& options = {});

}  // namespace zolqr

#endif  // ZOLQR_ZO_OPTIM_H_
