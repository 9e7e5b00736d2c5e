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

#ifndef ZOLQR_SAMPLING_H_
#define ZOLQR_SAMPLING_H_

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace zolqr {

// Independent, reproducible random stream keyed by (seed, stream_id). The
// harness uses the trial index as stream_id so trials never share state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  double normal() { return normal_(engine_); }
  // Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }
  // Uniform on {0, ..., count - 1}.
  std::size_t index(std::size_t count);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Element of the unit Frobenius sphere in R^{m x n}.
class Direction {
 public:
  // Scales `m` to unit Frobenius norm; throws InvalidInput on a zero matrix.
  static Direction normalized(const Eigen::MatrixXd& m);

  const Eigen::MatrixXd& matrix() const { return d_; }
  Direction negated() const { return Direction(-d_); }

 private:
  explicit Direction(Eigen::MatrixXd d) : d_(std::move(d)) {}
  Eigen::MatrixXd d_;
};

// Gaussian draw normalized to the sphere (exactly uniform).
Direction sample_sphere(int m, int n, RngStream& rng);

enum class InitialStateMode { kSignedScaledBasis, kCanonicalBasis, kCustomList };

std::string to_string(InitialStateMode mode);
InitialStateMode initial_state_mode_from_string(const std::string& name);

// Distribution of x0.
//
//   kSignedScaledBasis: uniform on {+-sqrt(n) e_i}; zero mean, E[xx'] = I,
//                       ||x||^2 = n.
//   kCanonicalBasis:    uniform on {e_i}; E[xx'] = I / n, mean e / n.
//   kCustomList:        uniform on a user-supplied list of vectors.
class InitialStateDist {
 public:
  static InitialStateDist signed_scaled_basis(int n);
  static InitialStateDist canonical_basis(int n);
  static InitialStateDist custom_list(std::vector<Eigen::VectorXd> support);
  static InitialStateDist from_mode(InitialStateMode mode, int n);

  InitialStateMode mode() const { return mode_; }
  int n() const { return n_; }
  // Almost-sure bound C_m on ||x0||^2 (attained on the support).
  double bound() const { return bound_; }
  // E[x0 x0'], used as Sigma0 when comparing against exact costs.
  const Eigen::MatrixXd& second_moment() const { return second_moment_; }
  const std::vector<Eigen::VectorXd>& support() const { return support_; }

 private:
  InitialStateDist(InitialStateMode mode, std::vector<Eigen::VectorXd> support);

  InitialStateMode mode_;
  int n_;
  double bound_;
  Eigen::MatrixXd second_moment_;
  std::vector<Eigen::VectorXd> support_;
};

Eigen::VectorXd sample_initial_state(const InitialStateDist& dist,
                                     RngStream& rng);

}  // namespace zolqr

#endif  // ZOLQR_SAMPLING_H_
