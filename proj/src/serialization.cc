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

#include "zolqr/serialization.h"

#include <fstream>
#include <sstream>

#include "zolqr/errors.h"

namespace zolqr {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  const auto fail = [what](const std::string& why) {
    throw InvalidInput(std::string(what) + ": " + why);
  };
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) fail("expected a non-empty array");
  const bool nested = j.front().is_array();
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = nested ? static_cast<Eigen::Index>(j.front().size()) : 1;
  if (cols == 0) fail("rows must be non-empty");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (nested) {
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
        fail("ragged rows");
      }
      for (Eigen::Index k = 0; k < cols; ++k) {
        const json& v = row[static_cast<std::size_t>(k)];
        if (!v.is_number()) fail("entries must be numbers");
        m(i, k) = v.get<double>();
      }
    } else {
      if (!row.is_number()) fail("entries must be numbers");
      m(i, 0) = row.get<double>();
    }
  }
  if (!m.allFinite()) fail("entries must be finite");
  return m;
}

json system_to_json(const LtiSystem& sys) {
  return json{{"A", matrix_to_json(sys.A())},
              {"B", matrix_to_json(sys.B())},
              {"Q", matrix_to_json(sys.Q())},
              {"R", matrix_to_json(sys.R())}};
}

LtiSystem system_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("system document must be an object");
  for (const char* key : {"A", "B", "Q", "R"}) {
    if (!j.contains(key)) {
      throw InvalidInput(std::string("system document lacks key ") + key);
    }
  }
  return LtiSystem(matrix_from_json(j.at("A"), "A"), matrix_from_json(j.at("B"), "B"),
                   matrix_from_json(j.at("Q"), "Q"), matrix_from_json(j.at("R"), "R"));
}

LtiSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open system file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("system file " + path + " is not valid JSON: " + e.what());
  }
  return system_from_json(j);
}

json dare_to_json(const LtiSystem& sys) {
  const DareSolution& d = sys.optimal();
  return json{{"P_star", matrix_to_json(d.p_star.matrix())},
              {"K_star", matrix_to_json(d.k_star.gain())},
              {"residual", d.residual},
              {"iterations", d.iterations},
              {"J_star", d.p_star.matrix().trace()},
              {"closed_loop_spectral_radius",
               spectral_radius(closed_loop(sys, d.k_star))}};
}

json constants_to_json(const ConstantsEstimate& c) {
  return json{{"lambda0", c.lambda0},
              {"phi0", c.phi0},
              {"rho0", c.rho0},
              {"mu", c.mu},
              {"theta0", c.theta0},
              {"Delta0", c.delta0},
              {"C_m", c.c_m},
              {"J_K0", c.j_k0},
              {"J_star", c.j_star},
              {"d", c.d},
              {"g_inf_two_point", c.g_inf_two_point},
              {"g2_two_point", c.g2_two_point},
              {"g_inf_one_point_times_r", c.g_inf_one_point_times_r},
              {"sublevel_factor", c.sublevel_factor},
              {"probes_requested", c.probes_requested},
              {"probes_accepted", c.probes_accepted},
              {"probes_rejected", c.probes_rejected},
              {"notes", c.notes}};
}

ConstantsEstimate constants_from_json(const json& j) {
  ConstantsEstimate c;
  try {
    c.lambda0 = j.at("lambda0").get<double>();
    c.phi0 = j.at("phi0").get<double>();
    c.rho0 = j.at("rho0").get<double>();
    c.mu = j.at("mu").get<double>();
    c.theta0 = j.at("theta0").get<double>();
    c.delta0 = j.at("Delta0").get<double>();
    c.c_m = j.at("C_m").get<double>();
    c.j_k0 = j.at("J_K0").get<double>();
    c.j_star = j.value("J_star", 0.0);
    c.d = j.at("d").get<int>();
    c.g_inf_two_point = j.value("g_inf_two_point", c.d * c.lambda0);
    c.g2_two_point = j.value("g2_two_point", c.d * c.lambda0 * c.lambda0);
    c.g_inf_one_point_times_r =
        j.value("g_inf_one_point_times_r", 20.0 * c.c_m * c.j_k0 * c.d);
    c.sublevel_factor = j.value("sublevel_factor", 10.0);
    c.probes_requested = j.value("probes_requested", 0);
    c.probes_accepted = j.value("probes_accepted", 0);
    c.probes_rejected = j.value("probes_rejected", 0);
    c.notes = j.value("notes", std::string());
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed constants document: ") + e.what());
  }
  return c;
}

json config_to_json(const AlgoConfig& c) {
  json j{{"eta", c.eta},
         {"r", c.radius},
         {"delta", c.delta_bound},
         {"iterations", c.iterations},
         {"mode", to_string(c.mode)},
         {"batch_size", c.batch_size}};
  j["T_delta"] = c.rollout_length ? json(*c.rollout_length) : json(nullptr);
  return j;
}

AlgoConfig config_from_json(const json& j) {
  AlgoConfig c;
  try {
    c.eta = j.at("eta").get<double>();
    c.radius = j.at("r").get<double>();
    c.delta_bound = j.value("delta", 0.0);
    c.iterations = j.at("iterations").get<std::int64_t>();
    c.mode = estimator_kind_from_string(j.value("mode", std::string("two")));
    c.batch_size = j.value("batch_size", 1);
    if (j.contains("T_delta") && !j.at("T_delta").is_null()) {
      c.rollout_length = j.at("T_delta").get<int>();
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed config document: ") + e.what());
  }
  validate(c);
  return c;
}

json fit_to_json(const DecayFit& fit) {
  return json{{"M", fit.m}, {"gamma", fit.gamma}, {"beta", fit.beta}};
}

}  // namespace zolqr
