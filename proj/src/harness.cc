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


#include "zolqr/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "zolqr/errors.h"
#include "zolqr/serialization.h"

namespace zolqr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kConvergence:
      return "convergence";
    case ExperimentKind::kDeltaSweep:
      return "delta_sweep";
    case ExperimentKind::kRolloutStudy:
      return "rollout_study";
    case ExperimentKind::kConstantsReport:
      return "constants_report";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (ExperimentKind k :
       {ExperimentKind::kConvergence, ExperimentKind::kDeltaSweep,
        ExperimentKind::kRolloutStudy, ExperimentKind::kConstantsReport}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidInput("unknown experiment '" + name + "'");
}

std::string to_string(SweepHorizon horizon) {
  return horizon == SweepHorizon::kTheorem ? "theorem" : "fixed";
}

SweepHorizon sweep_horizon_from_string(const std::string& name) {
  if (name == "theorem") return SweepHorizon::kTheorem;
  if (name == "fixed") return SweepHorizon::kFixed;
  throw InvalidInput("unknown sweep horizon '" + name + "' (theorem|fixed)");
}

AlgoConfig default_experiment_config() {
  AlgoConfig c;
  c.eta = 5e-6;
  c.radius = 0.02;
  c.delta_bound = 0.0;
  c.iterations = 10000;
  c.mode = EstimatorKind::kTwoPoint;
  return c;
}

void validate(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw InvalidInput("trials must be >= 1");
  if (spec.workers < 1) throw InvalidInput("workers must be >= 1");
  for (std::size_t i = 0; i < spec.eps.size(); ++i) {
    if (!(spec.eps[i] > 0.0) || !std::isfinite(spec.eps[i])) {
      throw InvalidInput("eps values must be finite and > 0");
    }
    if (i > 0 && !(spec.eps[i] < spec.eps[i - 1])) {
      throw InvalidInput("eps grid must be strictly decreasing");
    }
  }
  validate(spec.config);
  if (spec.target_gap && !(*spec.target_gap > 0.0)) {
    throw InvalidInput("target gap must be > 0");
  }
  if (!(spec.sublevel_factor > 0.0)) throw InvalidInput("sublevel factor must be > 0");
  if (spec.constant_probes != 0 && spec.constant_probes < 100) {
    throw InvalidInput("constant_probes must be 0 or >= 100");
  }
  if (!(spec.mu_safety > 0.0 && spec.mu_safety <= 1.0)) {
    throw InvalidInput("mu safety must lie in (0, 1]");
  }
  if (spec.fit_probes < 1 || spec.fit_horizon < 1) {
    throw InvalidInput("decay fit needs >= 1 probe and horizon >= 1");
  }
  if (!(spec.success_fraction > 0.0 && spec.success_fraction <= 1.0)) {
    throw InvalidInput("success fraction must lie in (0, 1]");
  }
  if (!(spec.delta_hi > 0.0) || !std::isfinite(spec.delta_hi)) {
    throw InvalidInput("delta_hi must be finite and > 0");
  }
  if (spec.bisection_rounds < 0 || !(spec.bisection_rel_width >= 0.0)) {
    throw InvalidInput("bisection rounds and width must be >= 0");
  }
  for (int t : spec.rollout_grid) {
    if (t < 0) throw InvalidInput("rollout lengths must be >= 0");
  }
  if (spec.record_stride < 0) throw InvalidInput("record stride must be >= 0");
  if (spec.experiment == ExperimentKind::kDeltaSweep &&
      spec.sweep_horizon == SweepHorizon::kTheorem && spec.constant_probes == 0) {
    throw InvalidInput("the theorem sweep horizon needs constant probes (mu estimate)");
  }
}

json spec_to_json(const ExperimentSpec& spec) {
  json j;
  j["system"] = spec.system;
  j["system_source"] = spec.system_source;
  j["experiment"] = to_string(spec.experiment);
  j["trials"] = spec.trials;
  j["seed"] = spec.seed;
  j["eps"] = spec.eps;
  j["eps_relative"] = spec.eps_relative;
  j["config"] = config_to_json(spec.config);
  j["perturbation"] = to_string(spec.perturbation);
  j["init_state"] = to_string(spec.init_state);
  j["k0"] = spec.k0 ? matrix_to_json(*spec.k0) : json(nullptr);
  j["target_gap"] = spec.target_gap ? json(*spec.target_gap) : json(nullptr);
  j["sublevel_factor"] = spec.sublevel_factor;
  j["constant_probes"] = spec.constant_probes;
  j["mu_safety"] = spec.mu_safety;
  j["fit_probes"] = spec.fit_probes;
  j["fit_horizon"] = spec.fit_horizon;
  j["success_fraction"] = spec.success_fraction;
  j["delta_hi"] = spec.delta_hi;
  j["bisection_rounds"] = spec.bisection_rounds;
  j["bisection_rel_width"] = spec.bisection_rel_width;
  j["sweep_horizon"] = to_string(spec.sweep_horizon);
  j["rollout_grid"] = spec.rollout_grid;
  j["record_stride"] = spec.record_stride;
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  try {
    s.system = j.at("system");
    s.system_source = j.value("system_source", s.system_source);
    s.experiment = experiment_kind_from_string(
        j.value("experiment", to_string(s.experiment)));
    s.trials = j.value("trials", s.trials);
    s.seed = j.value("seed", s.seed);
    s.eps = j.value("eps", s.eps);
    s.eps_relative = j.value("eps_relative", s.eps_relative);
    if (j.contains("config")) s.config = config_from_json(j.at("config"));
    s.perturbation =
        perturbation_kind_from_string(j.value("perturbation", to_string(s.perturbation)));
    s.init_state =
        initial_state_mode_from_string(j.value("init_state", to_string(s.init_state)));
    if (j.contains("k0") && !j.at("k0").is_null()) {
      s.k0 = matrix_from_json(j.at("k0"), "k0");
    }
    if (j.contains("target_gap") && !j.at("target_gap").is_null()) {
      s.target_gap = j.at("target_gap").get<double>();
    }
    s.sublevel_factor = j.value("sublevel_factor", s.sublevel_factor);
    s.constant_probes = j.value("constant_probes", s.constant_probes);
    s.mu_safety = j.value("mu_safety", s.mu_safety);
    s.fit_probes = j.value("fit_probes", s.fit_probes);
    s.fit_horizon = j.value("fit_horizon", s.fit_horizon);
    s.success_fraction = j.value("success_fraction", s.success_fraction);
    s.delta_hi = j.value("delta_hi", s.delta_hi);
    s.bisection_rounds = j.value("bisection_rounds", s.bisection_rounds);
    s.bisection_rel_width = j.value("bisection_rel_width", s.bisection_rel_width);
    s.sweep_horizon =
        sweep_horizon_from_string(j.value("sweep_horizon", to_string(s.sweep_horizon)));
    s.rollout_grid = j.value("rollout_grid", s.rollout_grid);
    s.record_stride = j.value("record_stride", s.record_stride);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed experiment spec: ") + e.what());
  }
  return s;
}

Policy make_initial_policy(const LtiSystem& sys, double target_gap,
                           RngStream& rng, const Eigen::MatrixXd& sigma0) {
  if (!(target_gap > 0.0) || !std::isfinite(target_gap)) {
    throw InvalidInput("target gap must be finite and > 0");
  }
  const Eigen::MatrixXd& k_star = sys.optimal().k_star.gain();
  const double j_star = cost_exact(sys, sys.optimal().k_star, sigma0);
  const Eigen::MatrixXd d = sample_sphere(sys.m(), sys.n(), rng).matrix();
  // Unstable points count as an infinite gap, so h is nondecreasing along
  // the ray up to the first boundary crossing.
  const auto h = [&](double c) { return cost_exact(sys, Policy(k_star + c * d), sigma0) - j_star; };
  const auto close = [&](double g) { return std::abs(g - target_gap) <= 0.01 * target_gap; };

  double lo = 0.0;
  double hi = 1e-6 * std::max(1.0, k_star.norm());
  for (int grow = 0; h(hi) < target_gap; ++grow) {
    if (grow > 200) throw InvalidInput("target gap not reachable along the sampled ray");
    lo = hi;
    hi *= 2.0;
  }
  double c = hi;
  for (int round = 0; !close(h(c)); ++round) {
    if (round > 200) {
      throw InvalidInput(
          "K0 bisection lost stability before reaching the target gap; "
          "choose a smaller target gap");
    }
    c = 0.5 * (lo + hi);
    (h(c) < target_gap ? lo : hi) = c;
  }
  return Policy(k_star + c * d);
}

std::vector<RunTrace> run_trials(const LtiSystem& sys, const Policy& k0,
                                 const AlgoConfig& config,
                                 const PerturbationModel& pert,
                                 const InitialStateDist& dist, std::uint64_t seed,
                                 int trials, int workers,
                                 const DescentOptions& options) {
  if (trials < 1) throw InvalidInput("trials must be >= 1");
  std::vector<RunTrace> out(trials);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto work = [&] {
    for (int i = next++; i < trials; i = next++) {
      try {
        RngStream rng(seed, kTrialStreamBase + static_cast<std::uint64_t>(i));
        out[i] = run_descent(sys, k0, config, pert, dist, rng, options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::min(std::max(workers, 1), trials);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

ExperimentContext prepare_experiment(const ExperimentSpec& spec) {
  validate(spec);
  LtiSystem sys = system_from_json(spec.system);
  InitialStateDist dist = InitialStateDist::from_mode(spec.init_state, sys.n());
  const Eigen::MatrixXd& sigma0 = dist.second_moment();
  const double j_star = cost_exact(sys, sys.optimal().k_star, sigma0);

  std::optional<Policy> k0;
  if (spec.k0) {
    k0.emplace(*spec.k0);
    if (k0->rows() != sys.m() || k0->cols() != sys.n()) {
      throw InvalidInput("K0 has the wrong shape");
    }
    if (!is_stabilizing(sys, *k0)) throw InvalidInput("K0 is not stabilizing");
  } else {
    RngStream rng(spec.seed, kInitialPolicyStream);
    k0.emplace(make_initial_policy(sys, spec.target_gap.value_or(0.5 * j_star), rng, sigma0));
  }
  const double delta0 = cost_exact(sys, *k0, sigma0) - j_star;

  std::optional<ConstantsEstimate> constants;
  if (spec.constant_probes > 0) {
    RngStream rng(spec.seed, kConstantsStream);
    EstimationOptions opts;
    opts.sublevel_factor = spec.sublevel_factor;
    constants = estimate_constants(sys, *k0, dist, spec.constant_probes, rng, opts);
  }
  return ExperimentContext{std::move(sys), std::move(dist), std::move(*k0),
                           j_star, delta0, std::move(constants)};
}

std::vector<double> resolve_eps(const ExperimentSpec& spec, double delta0,
                                const std::vector<double>& fallback) {
  std::vector<double> eps = spec.eps.empty() ? fallback : spec.eps;
  if (spec.eps.empty() || spec.eps_relative) {
    for (double& e : eps) e *= delta0;
  }
  return eps;
}

json make_manifest(const ExperimentSpec& spec, const ExperimentContext& ctx) {
  json m;
  m["version"] = ZOLQR_VERSION;
  m["spec"] = spec_to_json(spec);
  m["system"] = system_to_json(ctx.sys);
  m["dare"] = dare_to_json(ctx.sys);
  m["initial_state"] = {{"mode", to_string(ctx.dist.mode())},
                        {"sigma0", matrix_to_json(ctx.dist.second_moment())},
                        {"c_m", ctx.dist.bound()}};
  m["J_star_sigma0"] = ctx.j_star;
  m["K0"] = matrix_to_json(ctx.k0.gain());
  m["delta0"] = ctx.delta0;
  m["constants"] = ctx.constants ? constants_to_json(*ctx.constants) : json(nullptr);
  m["config"] = config_to_json(spec.config);
  m["seeds"] = {{"seed", spec.seed},
                {"initial_policy_stream", kInitialPolicyStream},
                {"constants_stream", kConstantsStream},
                {"decay_fit_stream", kDecayFitStream},
                {"trial_stream_base", kTrialStreamBase}};
  return m;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExperimentFailed("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ExperimentFailed("cannot create " + out.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

std::string trace_name(int trial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trace_%03d.csv", trial);
  return buf;
}

DescentOptions descent_options(const ExperimentSpec& spec, std::int64_t stride) {
  DescentOptions o;
  o.sublevel_factor = spec.sublevel_factor;
  o.record_stride = stride;
  return o;
}

// Default relative tolerances: five points from 0.1 down 1.5 decades.
std::vector<double> default_sweep_grid() {
  std::vector<double> g;
  for (int k = 0; k < 5; ++k) g.push_back(0.1 * std::pow(10.0, -1.5 * k / 4.0));
  return g;
}

}  // namespace

ConvergenceResult run_convergence_experiment(const ExperimentSpec& spec,
                                             const fs::path& out) {
  const ExperimentContext ctx = prepare_experiment(spec);
  ensure_dir(out);
  const PerturbationModel pert{spec.perturbation, spec.config.delta_bound, 0};
  ConvergenceResult result;
  result.traces = run_trials(ctx.sys, ctx.k0, spec.config, pert, ctx.dist, spec.seed,
                             spec.trials, spec.workers,
                             descent_options(spec, spec.record_stride));
  result.delta0 = ctx.delta0;
  result.j_star = ctx.j_star;

  std::ofstream summary = open_output(out / "summary.csv");
  summary << "trial,final_gap,tau,diverged,iters_run\n";
  for (int i = 0; i < spec.trials; ++i) {
    const RunTrace& t = result.traces[i];
    if (t.diverged) ++result.diverged;
    std::ofstream trace = open_output(out / trace_name(i));
    trace << "trial,s,J_exact,gap,grad_norm_exact,G_norm,E_norm,tau_flag,diverged\n";
    for (const TraceRecord& r : t.records) {
      trace << i << ',' << r.s << ',' << format_number(r.j_exact) << ','
            << format_number(r.gap) << ',' << format_number(r.grad_norm_exact) << ','
            << format_number(r.g_norm) << ',' << format_number(r.e_norm) << ','
            << (r.past_tau ? 1 : 0) << ',' << (r.diverged ? 1 : 0) << '\n';
    }
    summary << i << ',' << format_number(t.final_gap) << ',' << t.tau << ','
            << (t.diverged ? 1 : 0) << ',' << t.iterations_run << '\n';
  }
  summary.close();

  json manifest = make_manifest(spec, ctx);
  manifest["outputs"] = {{"summary", "summary.csv"}, {"traces", spec.trials}};
  manifest["diverged"] = result.diverged;
  write_json(out / "manifest.json", manifest);
  if (result.diverged == spec.trials) {
    throw ExperimentFailed("all " + std::to_string(spec.trials) + " trials diverged");
  }
  return result;
}

std::optional<std::pair<double, double>> loglog_fit(const std::vector<double>& x,
                                                    const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("fit inputs differ in length");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  const double slope = sxy / sxx;
  return std::make_pair(slope, my - slope * mx);
}

SweepResult run_delta_sweep(const ExperimentSpec& spec, const fs::path& out) {
  const ExperimentContext ctx = prepare_experiment(spec);
  ensure_dir(out);
  SweepResult result;
  result.delta0 = ctx.delta0;
  const std::vector<double> eps = resolve_eps(spec, ctx.delta0, default_sweep_grid());

  // Each eps is judged at its own horizon; one run per delta, recorded at
  // every horizon, serves the whole grid with paired seeds.
  std::vector<std::int64_t> horizon;
  for (double e : eps) {
    if (spec.sweep_horizon == SweepHorizon::kFixed) {
      horizon.push_back(spec.config.iterations);
    } else {
      const ConstantsEstimate c = with_mu_safety(*ctx.constants, spec.mu_safety);
      horizon.push_back(iteration_count(spec.config.eta, c.mu, ctx.delta0, e));
    }
  }
  DescentOptions opts = descent_options(spec, 0);
  opts.checkpoints = horizon;
  AlgoConfig config = spec.config;
  config.iterations = *std::max_element(horizon.begin(), horizon.end());

  // gaps[delta][i][trial]: gap after horizon[i] iterations.
  std::map<double, std::vector<std::vector<double>>> cache;
  const auto gaps_at = [&](double delta) -> const std::vector<std::vector<double>>& {
    auto it = cache.find(delta);
    if (it != cache.end()) return it->second;
    config.delta_bound = delta;
    const PerturbationModel pert{spec.perturbation, delta, 0};
    std::vector<std::vector<double>> gaps(horizon.size());
    for (const RunTrace& t : run_trials(ctx.sys, ctx.k0, config, pert, ctx.dist,
                                        spec.seed, spec.trials, spec.workers, opts)) {
      for (std::size_t i = 0; i < horizon.size(); ++i) {
        double gap = std::numeric_limits<double>::infinity();
        for (const TraceRecord& r : t.records) {
          if (r.s == horizon[i]) gap = r.gap;
        }
        gaps[i].push_back(gap);
      }
    }
    ++result.evaluations;
    return cache.emplace(delta, std::move(gaps)).first->second;
  };
  std::size_t current = 0;
  const auto rate = [&](double delta, double e) {
    const std::vector<double>& g = gaps_at(delta)[current];
    const auto ok = std::count_if(g.begin(), g.end(), [e](double v) { return v < e; });
    return static_cast<double>(ok) / spec.trials;
  };

  std::optional<double> bracket;
  for (; current < eps.size(); ++current) {
    const double e = eps[current];
    SweepRow row{e, 0.0, rate(0.0, e), spec.trials, false, horizon[current]};
    if (row.success_rate < spec.success_fraction) {
      row.infeasible = true;
      result.rows.push_back(row);
      continue;
    }
    double lo = 0.0, hi;
    if (!bracket) {
      hi = spec.delta_hi;
      for (int grow = 0; grow < 60 && rate(hi, e) >= spec.success_fraction; ++grow) {
        lo = hi;
        hi *= 2.0;
      }
    } else {
      hi = *bracket;
      if (rate(hi, e) >= spec.success_fraction) lo = hi;
    }
    for (int round = 0; round < spec.bisection_rounds && lo < hi &&
                        hi - lo > spec.bisection_rel_width * hi;
         ++round) {
      const double mid = 0.5 * (lo + hi);
      (rate(mid, e) >= spec.success_fraction ? lo : hi) = mid;
    }
    row.delta_max = lo;
    row.success_rate = rate(lo, e);
    bracket = lo;
    result.rows.push_back(row);
  }

  std::vector<double> fx, fy;
  for (const SweepRow& r : result.rows) {
    if (!r.infeasible && r.delta_max > 0.0) {
      fx.push_back(r.eps);
      fy.push_back(r.delta_max);
    }
  }
  if (auto fit = loglog_fit(fx, fy)) {
    result.slope = fit->first;
    result.intercept = fit->second;
  }

  std::ofstream csv = open_output(out / "sweep.csv");
  csv << "eps,delta_max,success_rate,trials,infeasible\n";
  for (const SweepRow& r : result.rows) {
    csv << format_number(r.eps) << ',' << format_number(r.delta_max) << ','
        << format_number(r.success_rate) << ',' << r.trials << ','
        << (r.infeasible ? 1 : 0) << '\n';
  }
  csv.close();

  json manifest = make_manifest(spec, ctx);
  manifest["outputs"] = {{"sweep", "sweep.csv"}};
  manifest["fit"] = {{"slope", result.slope ? json(*result.slope) : json(nullptr)},
                     {"intercept", result.intercept ? json(*result.intercept) : json(nullptr)}};
  manifest["evaluations"] = result.evaluations;
  manifest["horizons"] = horizon;
  write_json(out / "manifest.json", manifest);
  return result;
}

namespace {

DecayFit fit_for(const ExperimentSpec& spec, const ExperimentContext& ctx) {
  RngStream rng(spec.seed, kDecayFitStream);
  const std::vector<Policy> probes =
      sample_sublevel_policies(ctx.sys, ctx.dist.second_moment(),
                               spec.sublevel_factor * ctx.delta0, spec.fit_probes, rng);
  return fit_decay(ctx.sys, probes, spec.fit_horizon);
}

std::vector<RolloutPrediction> predict_rollouts(const ExperimentSpec& spec,
                                                const ExperimentContext& ctx,
                                                const DecayFit& fit,
                                                const std::vector<double>& eps) {
  std::vector<RolloutPrediction> out;
  const ConstantsEstimate c = with_mu_safety(*ctx.constants, spec.mu_safety);
  const int d = ctx.sys.policy_dim();
  for (double e : eps) {
    out.push_back({e,
                   rollout_length_bound(fit, d, spec.config.radius, e, c, ctx.dist.bound()),
                   rollout_length_bound_real(fit, d, spec.config.radius, e, c,
                                             ctx.dist.bound())});
  }
  return out;
}

}  // namespace

RolloutStudyResult run_rollout_study(const ExperimentSpec& spec, const fs::path& out) {
  const ExperimentContext ctx = prepare_experiment(spec);
  ensure_dir(out);
  RolloutStudyResult result;
  result.delta0 = ctx.delta0;
  result.eps = resolve_eps(spec, ctx.delta0, {0.1});
  if (ctx.constants) {
    result.fit = fit_for(spec, ctx);
    result.predictions = predict_rollouts(spec, ctx, result.fit, result.eps);
  } else if (spec.rollout_grid.empty()) {
    throw InvalidInput("rollout study needs a rollout grid or constant_probes > 0");
  }

  std::vector<int> grid = spec.rollout_grid;
  if (grid.empty()) {
    grid.push_back(0);
    for (const RolloutPrediction& p : result.predictions) grid.push_back(p.t_delta);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }

  const DescentOptions opts = descent_options(spec, 0);
  std::ofstream csv = open_output(out / "rollout.csv");
  csv << "rollout_length,trial,final_gap,tau,diverged,iters_run\n";
  for (int t_len : grid) {
    const PerturbationModel pert =
        t_len == 0 ? PerturbationModel{spec.perturbation, spec.config.delta_bound, 0}
                   : PerturbationModel{PerturbationKind::kTruncation, 0.0, t_len};
    RolloutArm arm;
    arm.rollout_length = t_len;
    const std::vector<RunTrace> traces = run_trials(
        ctx.sys, ctx.k0, spec.config, pert, ctx.dist, spec.seed, spec.trials,
        spec.workers, opts);
    for (int i = 0; i < spec.trials; ++i) {
      const RunTrace& t = traces[i];
      arm.final_gaps.push_back(t.final_gap);
      if (t.diverged) ++arm.diverged;
      csv << t_len << ',' << i << ',' << format_number(t.final_gap) << ',' << t.tau
          << ',' << (t.diverged ? 1 : 0) << ',' << t.iterations_run << '\n';
    }
    result.arms.push_back(std::move(arm));
  }
  csv.close();

  std::ofstream pred = open_output(out / "rollout_prediction.csv");
  pred << "eps,t_delta,t_delta_real,gamma,M,beta\n";
  for (const RolloutPrediction& p : result.predictions) {
    pred << format_number(p.eps) << ',' << p.t_delta << ',' << format_number(p.t_delta_real)
         << ',' << format_number(result.fit.gamma) << ',' << format_number(result.fit.m)
         << ',' << format_number(result.fit.beta) << '\n';
  }
  pred.close();

  json manifest = make_manifest(spec, ctx);
  manifest["outputs"] = {{"rollout", "rollout.csv"}, {"prediction", "rollout_prediction.csv"}};
  manifest["rollout_grid"] = grid;
  if (ctx.constants) manifest["decay_fit"] = fit_to_json(result.fit);
  write_json(out / "manifest.json", manifest);
  return result;
}

json run_constants_report(const ExperimentSpec& spec, const fs::path& out) {
  if (spec.constant_probes == 0) {
    throw InvalidInput("constants report needs constant_probes > 0");
  }
  const ExperimentContext ctx = prepare_experiment(spec);
  ensure_dir(out);
  const std::vector<double> eps = resolve_eps(spec, ctx.delta0, {0.1});
  const ConstantsEstimate& c = *ctx.constants;
  const int d = ctx.sys.policy_dim();
  const ScheduleOptions sched{spec.mu_safety};

  json report;
  report["constants"] = constants_to_json(c);
  report["dare"] = dare_to_json(ctx.sys);
  report["mu_safety"] = spec.mu_safety;
  json schedules = json::array();
  for (double e : eps) {
    json row{{"eps", e}, {"admissible", tolerance_admissible(e, c.delta0)}};
    for (EstimatorKind kind : {EstimatorKind::kOnePoint, EstimatorKind::kTwoPoint}) {
      try {
        const AlgoConfig cfg = kind == EstimatorKind::kOnePoint
                                   ? schedule_one_point(c, e, d, sched)
                                   : schedule_two_point(c, e, d, sched);
        row[to_string(kind) + "_point"] = config_to_json(cfg);
      } catch (const Error& err) {
        row[to_string(kind) + "_point"] = {{"error", err.what()}};
      }
    }
    schedules.push_back(row);
  }
  report["schedules"] = schedules;
  try {
    const DecayFit fit = fit_for(spec, ctx);
    report["decay_fit"] = fit_to_json(fit);
    json preds = json::array();
    for (const RolloutPrediction& p : predict_rollouts(spec, ctx, fit, eps)) {
      preds.push_back({{"eps", p.eps},
                       {"radius", spec.config.radius},
                       {"t_delta", p.t_delta},
                       {"t_delta_real", p.t_delta_real}});
    }
    report["rollout_prediction"] = preds;
  } catch (const FitFailed& err) {
    report["decay_fit"] = {{"error", err.what()}};
  }
  write_json(out / "constants.json", report);
  write_json(out / "manifest.json", make_manifest(spec, ctx));
  return report;
}

}  // namespace zolqr
