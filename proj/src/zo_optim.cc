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

#include "zolqr/zo_optim.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zolqr/errors.h"

namespace zolqr {

std::string to_string(EstimatorKind kind) {
  return kind == EstimatorKind::kOnePoint ? "one" : "two";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "one" || name == "one_point") return EstimatorKind::kOnePoint;
  if (name == "two" || name == "two_point") return EstimatorKind::kTwoPoint;
  throw InvalidInput("unknown estimator mode '" + name + "'");
}

void validate(const AlgoConfig& config) {
  if (!(config.eta >= 0.0) || !std::isfinite(config.eta)) {
    throw InvalidInput("eta must be finite and >= 0");
  }
  if (!(config.radius > 0.0) || !std::isfinite(config.radius)) {
    throw InvalidInput("smoothing radius must be finite and > 0");
  }
  if (!(config.delta_bound >= 0.0)) {
    throw InvalidInput("delta bound must be >= 0");
  }
  if (config.iterations < 0) throw InvalidInput("iterations must be >= 0");
  if (config.batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (config.rollout_length && *config.rollout_length < 1) {
    throw InvalidInput("rollout length must be >= 1");
  }
}

StateCost exact_state_cost(const LtiSystem& sys) {
  return [&sys](const Policy& k, const Eigen::VectorXd& x0) {
    return cost_from_state(sys, k, x0);
  };
}

StateCost rollout_state_cost(const LtiSystem& sys, int horizon) {
  if (horizon < 1) throw InvalidInput("rollout length must be >= 1");
  return [&sys, horizon](const Policy& k, const Eigen::VectorXd& x0) {
    return rollout_cost(sys, k, x0, horizon);
  };
}

Eigen::MatrixXd infinite_estimate(Eigen::Index rows, Eigen::Index cols) {
  return Eigen::MatrixXd::Constant(rows, cols,
                                   std::numeric_limits<double>::infinity());
}

bool is_infinite_estimate(const Eigen::MatrixXd& g) { return !g.allFinite(); }

Eigen::MatrixXd one_point_estimate(const StateCost& cost, const Policy& k,
                                   double radius, const Direction& d,
                                   const Eigen::VectorXd& x0) {
  if (!(radius > 0.0)) throw InvalidInput("smoothing radius must be > 0");
  const Eigen::MatrixXd& dm = d.matrix();
  if (dm.rows() != k.rows() || dm.cols() != k.cols()) {
    throw InvalidInput("direction and policy shapes differ");
  }
  const double dim = static_cast<double>(dm.size());
  const double j = cost(Policy(k.gain() + radius * dm), x0);
  if (is_infinite_cost(j)) return infinite_estimate(dm.rows(), dm.cols());
  return (j * dim / radius) * dm;
}

Eigen::MatrixXd two_point_estimate(const StateCost& cost, const Policy& k,
                                   double radius, const Direction& d,
                                   const Eigen::VectorXd& x0) {
  if (!(radius > 0.0)) throw InvalidInput("smoothing radius must be > 0");
  const Eigen::MatrixXd& dm = d.matrix();
  if (dm.rows() != k.rows() || dm.cols() != k.cols()) {
    throw InvalidInput("direction and policy shapes differ");
  }
  const double dim = static_cast<double>(dm.size());
  const double plus = cost(Policy(k.gain() + radius * dm), x0);
  const double minus = cost(Policy(k.gain() - radius * dm), x0);
  if (is_infinite_cost(plus) || is_infinite_cost(minus)) {
    return infinite_estimate(dm.rows(), dm.cols());
  }
  return ((plus - minus) * dim / (2.0 * radius)) * dm;
}

Eigen::MatrixXd estimate_gradient(EstimatorKind kind, const StateCost& cost,
                                  const Policy& k, double radius,
                                  const Direction& d,
                                  const Eigen::VectorXd& x0) {
  return kind == EstimatorKind::kOnePoint
             ? one_point_estimate(cost, k, radius, d, x0)
             : two_point_estimate(cost, k, radius, d, x0);
}

std::string to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kZero:
      return "zero";
    case PerturbationKind::kSphereUniform:
      return "sphere_uniform";
    case PerturbationKind::kAdversarial:
      return "adversarial";
    case PerturbationKind::kTruncation:
      return "truncation";
  }
  return "unknown";
}

PerturbationKind perturbation_kind_from_string(const std::string& name) {
  if (name == "zero") return PerturbationKind::kZero;
  if (name == "sphere_uniform" || name == "sphere") {
    return PerturbationKind::kSphereUniform;
  }
  if (name == "adversarial") return PerturbationKind::kAdversarial;
  if (name == "truncation") return PerturbationKind::kTruncation;
  throw InvalidInput("unknown perturbation kind '" + name + "'");
}

Eigen::MatrixXd make_perturbation(const PerturbationModel& model,
                                  const PerturbationContext& ctx) {
  const Eigen::Index rows = ctx.k.rows();
  const Eigen::Index cols = ctx.k.cols();
  if (!(model.delta >= 0.0)) throw InvalidInput("delta must be >= 0");
  switch (model.kind) {
    case PerturbationKind::kZero:
      return Eigen::MatrixXd::Zero(rows, cols);
    case PerturbationKind::kSphereUniform: {
      const Direction dir = sample_sphere(static_cast<int>(rows),
                                          static_cast<int>(cols), ctx.rng);
      const double scale = model.delta * ctx.rng.uniform();
      return scale * dir.matrix();
    }
    case PerturbationKind::kAdversarial: {
      if (!ctx.gradient) {
        throw InvalidInput("adversarial perturbation needs a gradient oracle");
      }
      const Eigen::MatrixXd g = ctx.gradient(ctx.k);
      const double norm = g.norm();
      if (!(norm >= 1e-12)) return Eigen::MatrixXd::Zero(rows, cols);
      return (model.delta / norm) * g;
    }
    case PerturbationKind::kTruncation: {
      if (!ctx.exact_estimate || !ctx.rollout_estimate) {
        throw InvalidInput("truncation perturbation needs both estimators");
      }
      return ctx.exact_estimate() - ctx.rollout_estimate();
    }
  }
  throw InvalidInput("unknown perturbation kind");
}

RunTrace run_descent(const LtiSystem& sys, const Policy& k0,
                     const AlgoConfig& config, const PerturbationModel& pert,
                     const InitialStateDist& dist, RngStream& rng,
                     const DescentOptions& options) {
  validate(config);
  if (dist.n() != sys.n()) {
    throw InvalidInput("initial-state dimension differs from the plant");
  }
  if (k0.rows() != sys.m() || k0.cols() != sys.n()) {
    throw InvalidInput("K0 must be m x n");
  }
  if (!is_stabilizing(sys, k0)) throw InvalidInput("K0 must be stabilizing");
  const bool truncation = pert.kind == PerturbationKind::kTruncation;
  if (truncation && pert.rollout_length < 1) {
    throw InvalidInput("truncation perturbation needs a rollout length >= 1");
  }

  const Eigen::MatrixXd& sigma0 = dist.second_moment();
  const std::optional<int> horizon =
      truncation ? std::optional<int>(pert.rollout_length) : config.rollout_length;
  const StateCost update_cost =
      horizon ? rollout_state_cost(sys, *horizon) : exact_state_cost(sys);
  const StateCost exact_cost = exact_state_cost(sys);
  const auto gradient = [&](const Policy& p) {
    return exact_gradient(sys, p, sigma0);
  };

  RunTrace trace;
  trace.optimal_cost = cost_exact(sys, sys.optimal().k_star, sigma0);
  Policy k = k0;
  double j = cost_exact(sys, k, sigma0);
  trace.initial_gap = j - trace.optimal_cost;
  const double threshold = options.sublevel_factor * trace.initial_gap;
  const int m = sys.m();
  const int n = sys.n();
  const double inf = std::numeric_limits<double>::infinity();

  const auto note_tau = [&](std::int64_t s, double gap) {
    if (trace.tau == kNeverStopped && gap > threshold) trace.tau = s;
  };
  const auto push = [&](std::int64_t s, double j_s, double grad_norm,
                        double g_norm, double e_norm, double x0_norm2,
                        bool diverged) {
    TraceRecord rec;
    rec.s = s;
    rec.j_exact = j_s;
    rec.gap = j_s - trace.optimal_cost;
    rec.grad_norm_exact = grad_norm;
    rec.g_norm = g_norm;
    rec.e_norm = e_norm;
    rec.x0_norm2 = x0_norm2;
    rec.past_tau = trace.tau != kNeverStopped && s >= trace.tau;
    rec.diverged = diverged;
    trace.records.push_back(rec);
  };
  std::vector<std::int64_t> checkpoints = options.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  const auto wants_record = [&](std::int64_t s) {
    if (std::binary_search(checkpoints.begin(), checkpoints.end(), s)) return true;
    return options.record_stride > 0 ? s % options.record_stride == 0 : s == 0;
  };

  std::int64_t s = 0;
  for (; s < config.iterations; ++s) {
    note_tau(s, j - trace.optimal_cost);

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, n);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, n);
    double x0_norm2 = 0.0;
    bool blew_up = false;
    for (int b = 0; b < config.batch_size; ++b) {
      const Eigen::VectorXd x0 = sample_initial_state(dist, rng);
      const Direction dir = sample_sphere(m, n, rng);
      const Eigen::MatrixXd gb =
          estimate_gradient(config.mode, update_cost, k, config.radius, dir, x0);
      if (is_infinite_estimate(gb)) {
        blew_up = true;
        break;
      }
      PerturbationContext ctx{k, rng, gradient, nullptr, nullptr};
      if (truncation) {
        ctx.exact_estimate = [&] {
          return estimate_gradient(config.mode, exact_cost, k, config.radius,
                                   dir, x0);
        };
        ctx.rollout_estimate = [&] { return gb; };
      }
      const Eigen::MatrixXd eb = make_perturbation(pert, ctx);
      g += gb;
      // The truncation error already lives inside gb; eb is bookkeeping.
      e += eb;
      x0_norm2 += x0.squaredNorm();
    }
    const double inv_batch = 1.0 / config.batch_size;
    g *= inv_batch;
    e *= inv_batch;
    x0_norm2 *= inv_batch;

    Eigen::MatrixXd next = k.gain();
    if (!blew_up) {
      next -= config.eta * g;
      if (!truncation) next += config.eta * e;
    }
    const bool left = blew_up || !next.allFinite() ||
                      !is_stabilizing(sys, Policy(next));
    if (wants_record(s) || left) {
      push(s, j, gradient(k).norm(), blew_up ? inf : g.norm(),
           blew_up ? 0.0 : e.norm(), x0_norm2, false);
    }
    if (left) {
      trace.diverged = true;
      note_tau(s + 1, inf);
      push(s + 1, inf, inf, 0.0, 0.0, 0.0, true);
      trace.final_gap = inf;
      trace.final_gain = next.allFinite() ? next : k.gain();
      trace.iterations_run = s + 1;
      return trace;
    }
    k = Policy(std::move(next));
    j = cost_exact(sys, k, sigma0);
  }

  note_tau(s, j - trace.optimal_cost);
  if (trace.records.empty() || trace.records.back().s != s) {
    push(s, j, gradient(k).norm(), 0.0, 0.0, 0.0, false);
  }
  trace.final_gap = j - trace.optimal_cost;
  trace.final_gain = k.gain();
  trace.iterations_run = s;
  return trace;
}

}  // namespace zolqr
