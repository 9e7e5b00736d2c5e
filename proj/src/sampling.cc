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

#include "zolqr/sampling.h"

#include <cmath>

#include "zolqr/errors.h"

namespace zolqr {
namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32),
                    0x7a6f6c71u};
  return std::mt19937_64(seq);
}

std::vector<Eigen::VectorXd> scaled_basis(int n, double scale, bool signed_) {
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = scale;
    out.push_back(e);
    if (signed_) out.push_back(-e);
  }
  return out;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(seeded_engine(seed, stream_id)) {}

std::size_t RngStream::index(std::size_t count) {
  if (count == 0) throw InvalidInput("cannot draw an index from an empty range");
  std::uniform_int_distribution<std::size_t> dist(0, count - 1);
  return dist(engine_);
}

Direction Direction::normalized(const Eigen::MatrixXd& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InvalidInput("direction needs a non-zero finite matrix");
  }
  return Direction(m / norm);
}

Direction sample_sphere(int m, int n, RngStream& rng) {
  if (m < 1 || n < 1) throw InvalidInput("sphere dimensions must be >= 1");
  Eigen::MatrixXd g(m, n);
  for (;;) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
    }
    if (g.norm() > 0.0) return Direction::normalized(g);
  }
}

std::string to_string(InitialStateMode mode) {
  switch (mode) {
    case InitialStateMode::kSignedScaledBasis:
      return "signed";
    case InitialStateMode::kCanonicalBasis:
      return "canonical";
    case InitialStateMode::kCustomList:
      return "custom";
  }
  return "unknown";
}

InitialStateMode initial_state_mode_from_string(const std::string& name) {
  if (name == "signed") return InitialStateMode::kSignedScaledBasis;
  if (name == "canonical") return InitialStateMode::kCanonicalBasis;
  if (name == "custom") return InitialStateMode::kCustomList;
  throw InvalidInput("unknown initial-state mode '" + name + "'");
}

InitialStateDist::InitialStateDist(InitialStateMode mode,
                                   std::vector<Eigen::VectorXd> support)
    : mode_(mode), support_(std::move(support)) {
  if (support_.empty()) throw InvalidInput("initial-state support is empty");
  n_ = static_cast<int>(support_.front().size());
  if (n_ < 1) throw InvalidInput("initial states must have n >= 1 entries");
  bound_ = 0.0;
  second_moment_ = Eigen::MatrixXd::Zero(n_, n_);
  for (const auto& v : support_) {
    if (v.size() != n_ || !v.allFinite()) {
      throw InvalidInput("initial states must be finite and share one size");
    }
    bound_ = std::max(bound_, v.squaredNorm());
    second_moment_ += v * v.transpose();
  }
  second_moment_ /= static_cast<double>(support_.size());
}

InitialStateDist InitialStateDist::signed_scaled_basis(int n) {
  if (n < 1) throw InvalidInput("n must be >= 1");
  return InitialStateDist(InitialStateMode::kSignedScaledBasis,
                          scaled_basis(n, std::sqrt(static_cast<double>(n)), true));
}

InitialStateDist InitialStateDist::canonical_basis(int n) {
  if (n < 1) throw InvalidInput("n must be >= 1");
  return InitialStateDist(InitialStateMode::kCanonicalBasis,
                          scaled_basis(n, 1.0, false));
}

InitialStateDist InitialStateDist::custom_list(
    std::vector<Eigen::VectorXd> support) {
  return InitialStateDist(InitialStateMode::kCustomList, std::move(support));
}

InitialStateDist InitialStateDist::from_mode(InitialStateMode mode, int n) {
  switch (mode) {
    case InitialStateMode::kSignedScaledBasis:
      return signed_scaled_basis(n);
    case InitialStateMode::kCanonicalBasis:
      return canonical_basis(n);
    case InitialStateMode::kCustomList:
      break;
  }
  throw InvalidInput("custom initial-state lists need explicit vectors");
}

Eigen::VectorXd sample_initial_state(const InitialStateDist& dist,
                                     RngStream& rng) {
  return dist.support()[rng.index(dist.support().size())];
}

}  // namespace zolqr
