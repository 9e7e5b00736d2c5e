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

#ifndef ZOLQR_ALGO_CONFIG_H_
#define ZOLQR_ALGO_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>

namespace zolqr {

enum class EstimatorKind { kOnePoint, kTwoPoint };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

// Parameters of the perturbed zeroth-order descent.
struct AlgoConfig {
  double eta = 0.0;
  // Smoothing radius r.
  double radius = 0.0;
  // Admissible perturbation magnitude delta (bound on ||E_s||_F).
  double delta_bound = 0.0;
  std::int64_t iterations = 1;
  EstimatorKind mode = EstimatorKind::kTwoPoint;
  // When set, sampled costs are finite-horizon rollouts of this length.
  std::optional<int> rollout_length;
  // (D, x0) pairs averaged per iteration; 1 reproduces the plain algorithm.
  int batch_size = 1;
};

// Throws InvalidInput unless eta >= 0, radius > 0, delta >= 0,
// iterations >= 0, batch_size >= 1 and any rollout length is >= 1.
void validate(const AlgoConfig& config);

}  // namespace zolqr

#endif  // ZOLQR_ALGO_CONFIG_H_
