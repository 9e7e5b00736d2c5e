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


#include "cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "zolqr/errors.h"
#include "zolqr/harness.h"
#include "zolqr/serialization.h"

namespace zolqr::cli {

namespace {

using nlohmann::json;

struct Options {
  std::string system;
  std::uint64_t seed = 0;
  int trials = 20;
  std::string out;
  std::optional<double> eta;
  std::optional<double> r;
  std::optional<double> delta;
  std::optional<std::int64_t> iters;
  std::string mode = "two";
  std::string init_state = "canonical";
  std::optional<double> target_gap;
  std::vector<double> eps;
  bool eps_relative = false;
  std::optional<std::string> perturbation;
  int workers = 1;
  int batch = 1;
  std::optional<int> probes;
  double mu_safety = 0.5;
  std::int64_t stride = 1;
  std::vector<int> rollout;
  double success_fraction = 0.75;
  double delta_hi = 1.0;
  std::string sweep_horizon = "theorem";
};

void add_options(CLI::App& app, Options& o) {
  app.add_option("--system", o.system, "System JSON file with A, B, Q, R");
  app.add_option("--seed", o.seed, "Base seed");
  app.add_option("--trials", o.trials, "Independent trials");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--eta", o.eta, "Step size");
  app.add_option("--r", o.r, "Smoothing radius");
  app.add_option("--delta", o.delta, "Perturbation bound");
  app.add_option("--iters", o.iters, "Iterations T_s");
  app.add_option("--mode", o.mode, "Estimator: one|two")
      ->check(CLI::IsMember({"one", "two"}));
  app.add_option("--init-state", o.init_state, "Initial-state law: signed|canonical")
      ->check(CLI::IsMember({"signed", "canonical"}));
  app.add_option("--target-gap", o.target_gap, "J(K0) - J(K*) for the automatic K0");
  app.add_option("--eps", o.eps, "Comma-separated decreasing tolerances")
      ->delimiter(',');
  app.add_flag("--eps-relative", o.eps_relative, "Read --eps as fractions of Delta_0");
  app.add_option("--perturbation", o.perturbation,
                 "zero|sphere_uniform|adversarial|truncation");
  app.add_option("--workers", o.workers, "Concurrent trials");
  app.add_option("--batch", o.batch, "Estimates averaged per iteration");
  app.add_option("--probes", o.probes, "Probes for the constants estimate (0 skips)");
  app.add_option("--mu-safety", o.mu_safety, "Factor applied to the PL estimate");
  app.add_option("--stride", o.stride, "Trace row stride (0: first and last only)");
  app.add_option("--rollout", o.rollout, "Comma-separated rollout lengths (0: exact)")
      ->delimiter(',');
  app.add_option("--success-fraction", o.success_fraction, "Sweep success threshold");
  app.add_option("--delta-hi", o.delta_hi, "Initial sweep upper bracket");
  app.add_option("--sweep-horizon", o.sweep_horizon,
                 "Sweep horizon per eps: theorem (T_s formula) or fixed (--iters)")
      ->check(CLI::IsMember({"theorem", "fixed"}));
}

ExperimentSpec build_spec(const Options& o, ExperimentKind kind) {
  if (o.system.empty()) throw InvalidInput("--system is required");
  std::ifstream in(o.system);
  if (!in) throw InvalidInput("cannot open system file " + o.system);
  ExperimentSpec spec;
  try {
    in >> spec.system;
  } catch (const json::exception& e) {
    throw InvalidInput("system file " + o.system + " is not valid JSON: " + e.what());
  }
  spec.system_source = o.system;
  spec.experiment = kind;
  spec.trials = o.trials;
  spec.seed = o.seed;
  spec.eps = o.eps;
  spec.eps_relative = o.eps_relative;
  spec.config.mode = estimator_kind_from_string(o.mode);
  if (o.eta) spec.config.eta = *o.eta;
  if (o.r) spec.config.radius = *o.r;
  if (o.delta) spec.config.delta_bound = *o.delta;
  if (o.iters) spec.config.iterations = *o.iters;
  spec.config.batch_size = o.batch;
  spec.init_state = initial_state_mode_from_string(o.init_state);
  spec.target_gap = o.target_gap;
  if (o.perturbation) {
    spec.perturbation = perturbation_kind_from_string(*o.perturbation);
  } else if (kind == ExperimentKind::kDeltaSweep) {
    spec.perturbation = PerturbationKind::kAdversarial;
  }
  spec.sweep_horizon = sweep_horizon_from_string(o.sweep_horizon);
  spec.workers = o.workers;
  if (o.probes) {
    spec.constant_probes = *o.probes;
  } else if (kind == ExperimentKind::kConvergence ||
             (kind == ExperimentKind::kDeltaSweep &&
              spec.sweep_horizon == SweepHorizon::kFixed)) {
    spec.constant_probes = 0;
  }
  spec.mu_safety = o.mu_safety;
  spec.record_stride = o.stride;
  spec.rollout_grid = o.rollout;
  spec.success_fraction = o.success_fraction;
  spec.delta_hi = o.delta_hi;
  validate(spec);
  return spec;
}

void require_out(const Options& o) {
  if (o.out.empty()) throw InvalidInput("--out is required");
}

int convergence(const Options& o, std::ostream& out) {
  require_out(o);
  const ExperimentSpec spec = build_spec(o, ExperimentKind::kConvergence);
  const ConvergenceResult r = run_convergence_experiment(spec, o.out);
  std::vector<double> gaps;
  for (const RunTrace& t : r.traces) gaps.push_back(t.final_gap);
  std::sort(gaps.begin(), gaps.end());
  out << "J* " << format_number(r.j_star) << "  Delta0 " << format_number(r.delta0)
      << "\ntrials " << spec.trials << "  diverged " << r.diverged
      << "  median final gap " << format_number(gaps[gaps.size() / 2]) << '\n';
  return kExitOk;
}

int delta_sweep(const Options& o, std::ostream& out) {
  require_out(o);
  const ExperimentSpec spec = build_spec(o, ExperimentKind::kDeltaSweep);
  const SweepResult r = run_delta_sweep(spec, o.out);
  out << "eps,delta_max,success_rate,infeasible\n";
  for (const SweepRow& row : r.rows) {
    out << format_number(row.eps) << ',' << format_number(row.delta_max) << ','
        << format_number(row.success_rate) << ',' << (row.infeasible ? 1 : 0) << '\n';
  }
  out << "slope " << (r.slope ? format_number(*r.slope) : std::string("absent")) << '\n';
  const bool any = std::any_of(r.rows.begin(), r.rows.end(),
                               [](const SweepRow& row) { return !row.infeasible; });
  return any ? kExitOk : kExitExperimentFailed;
}

int rollout_study(const Options& o, std::ostream& out) {
  require_out(o);
  const ExperimentSpec spec = build_spec(o, ExperimentKind::kRolloutStudy);
  const RolloutStudyResult r = run_rollout_study(spec, o.out);
  for (const RolloutPrediction& p : r.predictions) {
    out << "eps " << format_number(p.eps) << "  predicted T_delta " << p.t_delta << '\n';
  }
  for (const RolloutArm& arm : r.arms) {
    std::vector<double> g = arm.final_gaps;
    std::sort(g.begin(), g.end());
    out << "T_delta " << (arm.rollout_length == 0 ? std::string("exact")
                                                  : std::to_string(arm.rollout_length))
        << "  diverged " << arm.diverged << "  median final gap "
        << format_number(g[g.size() / 2]) << '\n';
  }
  return kExitOk;
}

int constants(const Options& o, std::ostream& out) {
  const ExperimentSpec spec = build_spec(o, ExperimentKind::kConstantsReport);
  if (o.out.empty()) throw InvalidInput("--out is required");
  out << run_constants_report(spec, o.out).dump(2) << '\n';
  return kExitOk;
}

int dare(const Options& o, std::ostream& out) {
  if (o.system.empty()) throw InvalidInput("--system is required");
  out << dare_to_json(load_system(o.system)).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Zeroth-order policy search for discrete-time LQR", "zolqr");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  add_options(app, o);
  CLI::App* conv = app.add_subcommand("convergence", "Seeded descent traces");
  CLI::App* sweep = app.add_subcommand("delta-sweep", "Tolerable perturbation per eps");
  CLI::App* roll = app.add_subcommand("rollout-study", "Finite-horizon cost estimates");
  CLI::App* cons = app.add_subcommand("constants", "Constants, schedules and T_delta");
  CLI::App* dar = app.add_subcommand("dare", "Print the Riccati solution");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // help() would describe the selected subcommand; usage names them all.
    err << "error: " << e.what() << "\n\n"
        << app.get_formatter()->make_help(&app, "zolqr", CLI::AppFormatMode::Normal);
    return kExitInvalidInput;
  }

  try {
    if (*conv) return convergence(o, out);
    if (*sweep) return delta_sweep(o, out);
    if (*roll) return rollout_study(o, out);
    if (*cons) return constants(o, out);
    if (*dar) return dare(o, out);
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const InvalidTolerance& e) {
    err << "invalid tolerance: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const NotStabilizable& e) {
    err << "invalid system: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    err << "experiment failed: " << e.what() << '\n';
    return kExitExperimentFailed;
  }
  return kExitInvalidInput;
}

}  // namespace zolqr::cli
