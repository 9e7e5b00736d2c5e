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

#include "zolqr/theory.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "zolqr/errors.h"

namespace zolqr {
namespace {

constexpr int kBisectionSteps = 60;

// Ceiling that ignores rounding noise just above an integer.
double tolerant_ceil(double x) {
  const double r = std::round(x);
  const double tol = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x));
  if (std::abs(x - r) <= tol) return r;
  return std::ceil(x);
}

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

void require_positive_constants(const ConstantsEstimate& c) {
  for (double v : {c.mu, c.phi0, c.lambda0, c.rho0, c.theta0, c.delta0, c.c_m,
                   c.j_k0}) {
    if (!positive_finite(v)) {
      throw InvalidInput("schedule constants must be positive and finite");
    }
  }
}

struct GapEvaluator {
  const LtiSystem& sys;
  const Eigen::MatrixXd& sigma0;
  double j_star;

  double gap(const Eigen::MatrixXd& k) const {
    return cost_exact(sys, Policy(k), sigma0) - j_star;
  }
};

// Largest c in [0, c_hi] (found by doubling) with gap(base + c d) <= target.
double bisect_radius(const GapEvaluator& eval, const Eigen::MatrixXd& base,
                     const Eigen::MatrixXd& dir, double target) {
  double lo = 0.0;
  double hi = 1e-3;
  for (int i = 0; i < 80 && eval.gap(base + hi * dir) <= target; ++i) hi *= 2.0;
  for (int i = 0; i < kBisectionSteps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (eval.gap(base + mid * dir) <= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

Eigen::MatrixXd random_direction(const LtiSystem& sys, RngStream& rng) {
  return sample_sphere(sys.m(), sys.n(), rng).matrix();
}

}  // namespace

double theta0_from(double phi0, double rho0, double lambda0) {
  return std::min(1.0 / (2.0 * phi0), rho0 / lambda0);
}

std::vector<Policy> sample_sublevel_policies(const LtiSystem& sys,
                                             const Eigen::MatrixXd& sigma0,
                                             double gap_cap, int count,
                                             RngStream& rng) {
  if (!(gap_cap > 0.0)) throw InvalidInput("sublevel cap must be > 0");
  const Eigen::MatrixXd& k_star = sys.optimal().k_star.gain();
  const GapEvaluator eval{sys, sigma0, cost_exact(sys, sys.optimal().k_star, sigma0)};
  std::vector<Policy> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  while (static_cast<int>(out.size()) < count) {
    const Eigen::MatrixXd dir = random_direction(sys, rng);
    const double target = gap_cap * (1.0 - rng.uniform());
    const double c = bisect_radius(eval, k_star, dir, target);
    Eigen::MatrixXd k = k_star + c * dir;
    const double gap = eval.gap(k);
    if (std::isfinite(gap) && gap > 0.0 && gap <= gap_cap) {
      out.emplace_back(std::move(k));
    }
  }
  return out;
}

double pl_ratio_min(const LtiSystem& sys, const std::vector<Policy>& probes,
                    const Eigen::MatrixXd& sigma0) {
  const double j_star = cost_exact(sys, sys.optimal().k_star, sigma0);
  double best = std::numeric_limits<double>::infinity();
  for (const Policy& k : probes) {
    const double gap = cost_exact(sys, k, sigma0) - j_star;
    if (!(gap > 1e-12 * std::max(1.0, j_star)) || !std::isfinite(gap)) continue;
    best = std::min(best, exact_gradient(sys, k, sigma0).squaredNorm() / gap);
  }
  return best;
}

ConstantsEstimate estimate_constants(const LtiSystem& sys, const Policy& k0,
                                     const InitialStateDist& dist, int probes,
                                     RngStream& rng,
                                     const EstimationOptions& options) {
  if (probes < 100) throw InvalidInput("estimate_constants needs >= 100 probes");
  if (dist.n() != sys.n()) throw InvalidInput("initial-state dimension mismatch");
  if (!is_stabilizing(sys, k0)) throw InvalidInput("K0 must be stabilizing");

  const Eigen::MatrixXd& sigma0 = dist.second_moment();
  const Eigen::MatrixXd& k_star = sys.optimal().k_star.gain();
  ConstantsEstimate c;
  c.j_star = cost_exact(sys, sys.optimal().k_star, sigma0);
  c.j_k0 = cost_exact(sys, k0, sigma0);
  c.delta0 = c.j_k0 - c.j_star;
  c.c_m = dist.bound();
  c.d = sys.policy_dim();
  c.sublevel_factor = options.sublevel_factor;
  c.probes_requested = probes;
  if (!(c.delta0 > 0.0)) {
    throw EstimationFailed("K0 coincides with K*; the sublevel set is degenerate");
  }
  const double cap = options.sublevel_factor * c.delta0;
  const GapEvaluator eval{sys, sigma0, c.j_star};

  // Probe generation: even probes ride rays from K*, odd ones rays from K0.
  std::vector<Policy> accepted;
  for (int i = 0; i < probes; ++i) {
    const Eigen::MatrixXd dir = random_direction(sys, rng);
    Eigen::MatrixXd k;
    if (i % 2 == 0) {
      const double target = cap * (1.0 - rng.uniform());
      k = k_star + bisect_radius(eval, k_star, dir, target) * dir;
    } else {
      const double exit = bisect_radius(eval, k0.gain(), dir, cap);
      k = k0.gain() + rng.uniform() * exit * dir;
    }
    const double gap = eval.gap(k);
    if (std::isfinite(gap) && gap >= 1e-6 * c.delta0 && gap <= cap) {
      accepted.emplace_back(std::move(k));
    } else {
      ++c.probes_rejected;
    }
  }
  c.probes_accepted = static_cast<int>(accepted.size());
  if (c.probes_accepted < options.min_accepted) {
    std::ostringstream msg;
    msg << "only " << c.probes_accepted << " of " << probes
        << " probes landed in G^0 (" << c.probes_rejected << " rejected)";
    throw EstimationFailed(msg.str());
  }

  // Pass 1: pointwise ratios.
  struct Local {
    Eigen::MatrixXd grad;
    double j;
    std::vector<Eigen::MatrixXd> dirs;
  };
  std::vector<Local> locals;
  locals.reserve(accepted.size());
  const double h = options.fd_step;
  c.lambda0 = 0.0;
  c.phi0 = 0.0;
  c.mu = std::numeric_limits<double>::infinity();
  for (const Policy& k : accepted) {
    Local loc{exact_gradient(sys, k, sigma0), cost_exact(sys, k, sigma0), {}};
    const double gnorm = loc.grad.norm();
    if (gnorm > 0.0) loc.dirs.push_back(loc.grad / gnorm);
    for (int j = 0; j < options.directions_per_probe; ++j) {
      loc.dirs.push_back(random_direction(sys, rng));
    }
    c.mu = std::min(c.mu, loc.grad.squaredNorm() / (loc.j - c.j_star));
    for (const auto& u : loc.dirs) {
      const Policy kp(k.gain() + h * u);
      const double jp = cost_exact(sys, kp, sigma0);
      if (!std::isfinite(jp)) continue;
      c.lambda0 = std::max(c.lambda0, std::abs(jp - loc.j) / h);
      c.phi0 = std::max(c.phi0,
                        (exact_gradient(sys, kp, sigma0) - loc.grad).norm() / h);
    }
    locals.push_back(std::move(loc));
  }

  // The PL infimum sits in thin wedges (around the softest Hessian axis when
  // J is ill-conditioned) that random rays rarely hit, so the lowest-ratio
  // probes seed a shrinking random local search over G^0.
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t p = 0; p < accepted.size(); ++p) {
    ranked.emplace_back(
        locals[p].grad.squaredNorm() / (locals[p].j - c.j_star), p);
  }
  std::sort(ranked.begin(), ranked.end());
  const double min_gap = 1e-6 * c.delta0;
  const std::size_t seeds =
      std::min<std::size_t>(ranked.size(), options.pl_refine_seeds);
  for (std::size_t i = 0; i < seeds; ++i) {
    Eigen::MatrixXd k = accepted[ranked[i].second].gain();
    double best = ranked[i].first;
    double scale = 0.25;
    for (int it = 0; it < options.pl_refine_steps && scale > 1e-8; ++it) {
      const double radius = std::max((k - k_star).norm(), 1e-6);
      const Eigen::MatrixXd trial = k + scale * radius * random_direction(sys, rng);
      const double gap = eval.gap(trial);
      if (!(gap >= min_gap) || !(gap <= cap)) {
        scale *= 0.8;
        continue;
      }
      const double ratio =
          exact_gradient(sys, Policy(trial), sigma0).squaredNorm() / gap;
      if (ratio < best) {
        best = ratio;
        k = trial;
        scale *= 1.2;
      } else {
        scale *= 0.9;
      }
    }
    c.mu = std::min(c.mu, best);
  }

  // Pass 2: the largest step on which the global ratios stay within 2x and
  // the probed neighbours remain stabilizing.
  c.rho0 = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < accepted.size(); ++p) {
    const Policy& k = accepted[p];
    const Local& loc = locals[p];
    double rho_k = 0.0;
    for (int level = options.rho_levels - 1; level >= 0; --level) {
      const double step = options.rho_max * std::ldexp(1.0, -level);
      bool ok = true;
      for (const auto& u : loc.dirs) {
        for (double sign : {1.0, -1.0}) {
          const Policy kp(k.gain() + sign * step * u);
          if (!is_stabilizing(sys, kp)) {
            ok = false;
            break;
          }
          const double jp = cost_exact(sys, kp, sigma0);
          const double lip = std::abs(jp - loc.j) / step;
          const double glip =
              (exact_gradient(sys, kp, sigma0) - loc.grad).norm() / step;
          if (!(lip <= 2.0 * c.lambda0) || !(glip <= 2.0 * c.phi0)) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
      if (!ok) break;
      rho_k = step;
    }
    c.rho0 = std::min(c.rho0, rho_k);
  }
  if (!positive_finite(c.rho0) || !positive_finite(c.lambda0) ||
      !positive_finite(c.phi0) || !positive_finite(c.mu)) {
    throw EstimationFailed("constant estimates are not all positive and finite");
  }
  c.theta0 = theta0_from(c.phi0, c.rho0, c.lambda0);
  c.g_inf_two_point = c.d * c.lambda0;
  c.g2_two_point = c.d * c.lambda0 * c.lambda0;
  c.g_inf_one_point_times_r = 20.0 * c.c_m * c.j_k0 * c.d;

  std::ostringstream notes;
  notes << "probes accepted " << c.probes_accepted << "/" << probes
        << "; rho0 is the ratio-stability radius on a grid of "
        << options.rho_levels << " halvings from " << options.rho_max
        << "; mu is the minimum PL ratio over probes";
  c.notes = notes.str();
  return c;
}

ConstantsEstimate with_mu_safety(const ConstantsEstimate& c, double mu_safety) {
  if (!positive_finite(mu_safety)) throw InvalidInput("mu safety must be > 0");
  ConstantsEstimate out = c;
  out.mu *= mu_safety;
  return out;
}

std::vector<double> radius_caps(const ConstantsEstimate& c, double eps,
                                EstimatorKind kind) {
  std::vector<double> caps = {
      c.mu * c.theta0 / (16.0 * c.phi0) * std::sqrt(eps / 15.0),
      1.0 / (4.0 * c.phi0) * std::sqrt(c.mu * eps / 15.0),
      c.rho0,
  };
  if (kind == EstimatorKind::kOnePoint) caps.push_back(10.0 * c.j_k0 / c.lambda0);
  return caps;
}

std::array<double, 2> delta_caps(const ConstantsEstimate& c, double eps) {
  return {c.mu * c.theta0 / 16.0 * std::sqrt(eps / 15.0),
          0.5 * std::sqrt(c.mu * eps / 30.0)};
}

std::array<double, 3> eta_caps_one_point(const ConstantsEstimate& c, double eps,
                                         int d, double radius, double delta) {
  const double spread = 20.0 * c.c_m * c.j_k0 * d;
  return {c.mu * radius * radius * eps / (480.0 * c.phi0 * spread * spread),
          1.0 / (4.0 * c.phi0), c.rho0 * radius / (spread + delta * radius)};
}

std::array<double, 3> eta_caps_two_point(const ConstantsEstimate& c, double eps,
                                         int d, double delta) {
  return {c.mu * eps / (480.0 * c.phi0 * d * c.lambda0 * c.lambda0),
          1.0 / (4.0 * c.phi0), c.rho0 / (d * c.lambda0 + delta)};
}

std::int64_t iteration_count(double eta, double mu, double delta0, double eps) {
  if (!positive_finite(eta) || !positive_finite(mu)) {
    throw InvalidInput("iteration_count needs eta, mu > 0");
  }
  const double t = 4.0 / (eta * mu) * std::log(120.0 * delta0 / eps);
  if (!std::isfinite(t) || t > 9.0e18) {
    return std::numeric_limits<std::int64_t>::max();
  }
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(tolerant_ceil(t)));
}

bool tolerance_admissible(double eps, double delta0) {
  return eps > 0.0 && delta0 > 0.0 &&
         eps * std::log(120.0 * delta0 / eps) < 12.0 * delta0;
}

namespace {

AlgoConfig schedule(const ConstantsEstimate& raw, double eps, int d,
                    EstimatorKind kind, const ScheduleOptions& options) {
  if (d < 1) throw InvalidInput("policy dimension must be >= 1");
  const ConstantsEstimate c = with_mu_safety(raw, options.mu_safety);
  require_positive_constants(c);
  if (!tolerance_admissible(eps, c.delta0)) {
    throw InvalidTolerance("eps must satisfy eps log(120 Delta0/eps) < 12 Delta0");
  }
  AlgoConfig out;
  out.mode = kind;
  const auto rc = radius_caps(c, eps, kind);
  out.radius = *std::min_element(rc.begin(), rc.end());
  const auto dc = delta_caps(c, eps);
  out.delta_bound = std::min(dc[0], dc[1]);
  const auto ec = kind == EstimatorKind::kOnePoint
                      ? eta_caps_one_point(c, eps, d, out.radius, out.delta_bound)
                      : eta_caps_two_point(c, eps, d, out.delta_bound);
  out.eta = *std::min_element(ec.begin(), ec.end());
  out.iterations = iteration_count(out.eta, c.mu, c.delta0, eps);
  return out;
}

}  // namespace

AlgoConfig schedule_one_point(const ConstantsEstimate& c, double eps, int d,
                              const ScheduleOptions& options) {
  return schedule(c, eps, d, EstimatorKind::kOnePoint, options);
}

AlgoConfig schedule_two_point(const ConstantsEstimate& c, double eps, int d,
                              const ScheduleOptions& options) {
  return schedule(c, eps, d, EstimatorKind::kTwoPoint, options);
}

DecayFit fit_decay(const LtiSystem& sys, const std::vector<Policy>& probes,
                   int horizon) {
  if (probes.empty()) throw InvalidInput("fit_decay needs at least one probe");
  if (horizon < 1) throw InvalidInput("fit_decay horizon must be >= 1");
  DecayFit fit;
  double rho = 0.0;
  for (const Policy& k : probes) {
    if (!is_stabilizing(sys, k)) throw InvalidInput("fit_decay probes must stabilize");
    rho = std::max(rho, spectral_radius(closed_loop(sys, k)));
  }
  fit.gamma = std::max(rho + kDecayMargin, kDecayMargin);
  if (fit.gamma >= 1.0) {
    throw FitFailed("a probe is too close to instability for gamma < 1");
  }
  fit.m = 1.0;
  fit.beta = 0.0;
  for (const Policy& k : probes) {
    const Eigen::MatrixXd scaled = closed_loop(sys, k) / fit.gamma;
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(sys.n(), sys.n());
    for (int t = 1; t <= horizon; ++t) {
      power = scaled * power;
      const double op = power.jacobiSvd().singularValues()(0);
      fit.m = std::max(fit.m, op * op);
    }
    const Eigen::MatrixXd stage = sys.Q() + k.gain().transpose() * sys.R() * k.gain();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (stage + stage.transpose()),
                                                       Eigen::EigenvaluesOnly);
    fit.beta = std::max(fit.beta, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return fit;
}

double truncation_error_bound(const DecayFit& fit, int rollout_length,
                              double x0_norm2) {
  return fit.m * fit.beta * std::pow(fit.gamma, 2.0 * rollout_length) * x0_norm2 /
         (1.0 - fit.gamma * fit.gamma);
}

double rollout_length_bound_real(const DecayFit& fit, int d, double radius,
                                 double eps, const ConstantsEstimate& c,
                                 double x0_norm2) {
  if (!(fit.gamma > 0.0 && fit.gamma < 1.0)) {
    throw FitFailed("rollout bound needs 0 < gamma < 1");
  }
  for (double v : {fit.m, fit.beta, radius, eps, c.mu, c.theta0, x0_norm2}) {
    if (!positive_finite(v)) throw InvalidInput("rollout bound arguments must be > 0");
  }
  if (d < 1) throw InvalidInput("policy dimension must be >= 1");
  const double common =
      fit.m * fit.beta * d * x0_norm2 / ((1.0 - fit.gamma * fit.gamma) * radius);
  const double first =
      16.0 * std::sqrt(15.0) * common / (c.mu * c.theta0 * std::sqrt(eps));
  const double second = 2.0 * std::sqrt(30.0) * common / std::sqrt(c.mu * eps);
  return std::max(std::log(first), std::log(second)) / (2.0 * (1.0 - fit.gamma));
}

int rollout_length_bound(const DecayFit& fit, int d, double radius, double eps,
                         const ConstantsEstimate& c, double x0_norm2) {
  const double t = rollout_length_bound_real(fit, d, radius, eps, c, x0_norm2);
  if (t > 1e9) throw InvalidInput("rollout length bound overflows");
  return std::max(1, static_cast<int>(tolerant_ceil(t)));
}

}  // namespace zolqr
