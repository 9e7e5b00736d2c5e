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

#ifndef ZOLQR_SERIALIZATION_H_
#define ZOLQR_SERIALIZATION_H_

#include <Eigen/Dense>
#include <json.hpp>
#include <string>

#include "zolqr/algo_config.h"
#include "zolqr/lqr.h"
#include "zolqr/theory.h"

namespace zolqr {

// Matrices are row-major nested arrays; a bare number is read as 1 x 1 and a
// flat array as a column.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what);

// {"A": ..., "B": ..., "Q": ..., "R": ...}
nlohmann::json system_to_json(const LtiSystem& sys);
LtiSystem system_from_json(const nlohmann::json& j);
LtiSystem load_system(const std::string& path);

nlohmann::json dare_to_json(const LtiSystem& sys);
nlohmann::json constants_to_json(const ConstantsEstimate& c);
ConstantsEstimate constants_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const AlgoConfig& c);
AlgoConfig config_from_json(const nlohmann::json& j);
nlohmann::json fit_to_json(const DecayFit& fit);

}  // namespace zolqr

#endif  // ZOLQR_SERIALIZATION_H_
