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

#ifndef ZOLQR_THEORY_H_
#define ZOLQR_THEORY_H_

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zolqr/algo_config.h"
#include "zolqr/lqr.h"
#include "zolqr/sampling.h"

namespace zolqr {

// Regularity constants of J over the sublevel set G^0, estimated by probing.
//
// lambda0 (Lipschitz constant of J), phi0 (Lipschitz constant of grad J),
// rho0 (radius on which both local bounds hold) and mu (PL constant) are
// sup/inf estimates over the accepted probes. theta0 is always
// min{1/(2 phi0), rho0/lambda0}.
struct ConstantsEstimate {
  double lambda0 = 0.0;
  double phi0 = 0.0;
  double rho0 = 0.0;
  double mu = 0.0;
  double theta0 = 0.0;
  double delta0 = 0.0;
  double c_m = 0.0;
  double j_k0 = 0.0;
  double j_star = 0.0;
  int d = 0;
  // Two-point estimator bounds: g_inf <= d lambda0, g2 <= d lambda0^2.
  double g_inf_two_point = 0.0;
  double g2_two_point = 0.0;
  // One-point bounds are 20 C_m J(K0) d / r (and its square); this is the
  // numerator, the radius is supplied by the schedule.
  double g_inf_one_point_times_r = 0.0;
  double sublevel_factor = 10.0;
  int probes_requested = 0;
  int probes_accepted = 0;
  int probes_rejected = 0;
  std::string notes;

  double g_inf_one_point(double radius) const {
    return g_inf_one_point_times_r / radius;
  }
  double g2_one_point(double radius) const {
    const double g = g_inf_one_point(radius);
    return g * g;
  }
};

double theta0_from(double phi0, double rho0, double lambda0);

struct EstimationOptions {
  double sublevel_factor = 10.0;
  // Minimum number of accepted probes; fewer raises EstimationFailed.
  int min_accepted = 50;
  // Relative step for the finite-difference ratios.
  double fd_step = 1e-4;
  // Step grid for rho0: fd candidates are rho_max * 2^-k, k = 0..rho_levels-1.
  double rho_max = 1.0;
  int rho_levels = 24;
  // Random directions tested per probe.
  int directions_per_probe = 4;
  // Lowest-ratio probes refined by local search, and steps per refinement.
  int pl_refine_seeds = 8;
  int pl_refine_steps = 400;
};

// Probes G^0 along random rays from K* and from K0 (bisecting the radius to
// land on target gaps) and reduces the local ratios with max/min. Costs use
// Sigma0 = dist.second_moment(); C_m = dist.bound().
ConstantsEstimate estimate_constants(const LtiSystem& sys, const Policy& k0,
                                     const InitialStateDist& dist, int probes,
                                     RngStream& rng,
                                     const EstimationOptions& options = {});

// Random policies in G^0 = {gap <= factor * delta0} drawn like the probes of
// estimate_constants (random ray from K*, target gap uniform on (0, cap]).
std::vector<Policy> sample_sublevel_policies(const LtiSystem& sys,
                                             const Eigen::MatrixXd& sigma0,
                                             double gap_cap, int count,
                                             RngStream& rng);

// Minimum of ||grad J||^2 / gap over the given policies; probes with a gap
// below 1e-12 max(1, J*) are skipped.
double pl_ratio_min(const LtiSystem& sys, const std::vector<Policy>& probes,
                    const Eigen::MatrixXd& sigma0);

// Copy of `c` with mu scaled by `mu_safety` (theta0 does not involve mu).
ConstantsEstimate with_mu_safety(const ConstantsEstimate& c, double mu_safety);

// Individual caps of the step-size schedules, in the order they are written:
//   radius:     mu theta0/(16 phi0) sqrt(eps/15), 1/(4 phi0) sqrt(mu eps/15),
//               rho0 [, 10 J(K0)/lambda0 for the one-point estimator]
//   delta:      mu theta0/16 sqrt(eps/15), 1/2 sqrt(mu eps/30)
//   one-point eta: mu r^2 eps/(480 phi0 [20 C_m J(K0) d]^2), 1/(4 phi0),
//               rho0 r/(20 C_m J(K0) d + delta r)
//   two-point eta: mu eps/(480 phi0 d lambda0^2), 1/(4 phi0),
//               rho0/(d lambda0 + delta)
std::vector<double> radius_caps(const ConstantsEstimate& c, double eps,
                                EstimatorKind kind);
std::array<double, 2> delta_caps(const ConstantsEstimate& c, double eps);
std::array<double, 3> eta_caps_one_point(const ConstantsEstimate& c, double eps,
                                         int d, double radius, double delta);
std::array<double, 3> eta_caps_two_point(const ConstantsEstimate& c, double eps,
                                         int d, double delta);

// ceil(4/(eta mu) log(120 Delta0 / eps)).
std::int64_t iteration_count(double eta, double mu, double delta0, double eps);

// eps log(120 Delta0 / eps) < 12 Delta0.
bool tolerance_admissible(double eps, double delta0);

struct ScheduleOptions {
  // Multiplied into mu before any formula is evaluated.
  double mu_safety = 0.5;
};

// Largest parameters allowed by the convergence theorem. The radius takes
// its cap first; delta, eta and T_s follow. Throws InvalidTolerance if eps
// fails tolerance_admissible.
AlgoConfig schedule_one_point(const ConstantsEstimate& c, double eps, int d,
                              const ScheduleOptions& options = {});
AlgoConfig schedule_two_point(const ConstantsEstimate& c, double eps, int d,
                              const ScheduleOptions& options = {});

// ||x_t||^2 <= M gamma^{2t} ||x0||^2 and beta = max ||Q + K'RK||_2 over the
// probe set.
struct DecayFit {
  double m = 1.0;
  double gamma = 0.0;
  double beta = 0.0;
};

inline constexpr double kDecayMargin = 1e-3;

// gamma = max rho(A - BK) + kDecayMargin (floored at kDecayMargin), M the
// worst ||Acl^t||_2^2 / gamma^{2t} for t <= horizon (at least 1), so the
// bound holds for every x0. Throws FitFailed if gamma >= 1.
DecayFit fit_decay(const LtiSystem& sys, const std::vector<Policy>& probes,
                   int horizon);

// Upper bound on J(K; x0) - J_delta(K; x0) implied by the fit.
double truncation_error_bound(const DecayFit& fit, int rollout_length,
                              double x0_norm2);

// Rollout length that keeps the truncation perturbation inside the
// theorem's delta bound (ceiling of the corollary bound, at least 1).
// Throws FitFailed unless 0 < gamma < 1, InvalidInput on non-positive
// arguments.
int rollout_length_bound(const DecayFit& fit, int d, double radius, double eps,
                         const ConstantsEstimate& c, double x0_norm2);

// The real-valued bound before the ceiling.
double rollout_length_bound_real(const DecayFit& fit, int d, double radius,
                                 double eps, const ConstantsEstimate& c,
                                 double x0_norm2);

}  // namespace zolqr

#endif  // ZOLQR_THEORY_H_
