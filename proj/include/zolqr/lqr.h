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

#ifndef ZOLQR_LQR_H_
#define ZOLQR_LQR_H_

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace zolqr {

// Returned by cost evaluators whenever the closed loop is not stable or the
// accumulated cost overflows. Never thrown.
inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

// A gain counts as stabilizing only if rho(A - BK) <= 1 - kStabilityMargin.
inline constexpr double kStabilityMargin = 1e-9;

inline bool is_infinite_cost(double cost) { return !std::isfinite(cost); }

// Static state feedback u = -K x. Entries are finite; whether the gain
// stabilizes a given plant is a query against that plant, not stored here.
class Policy {
 public:
  explicit Policy(Eigen::MatrixXd gain);

  const Eigen::MatrixXd& gain() const { return gain_; }
  Eigen::Index rows() const { return gain_.rows(); }
  Eigen::Index cols() const { return gain_.cols(); }

 private:
  Eigen::MatrixXd gain_;
};

// Symmetric value matrix P_K of a policy.
class CostMatrix {
 public:
  explicit CostMatrix(Eigen::MatrixXd p);

  const Eigen::MatrixXd& matrix() const { return p_; }

 private:
  Eigen::MatrixXd p_;
};

struct DareSolution {
  CostMatrix p_star;
  Policy k_star;
  // Frobenius norm of the Riccati defect at p_star.
  double residual;
  int iterations;
};

// Plant x_{t+1} = A x_t + B u_t with stage cost x'Qx + u'Ru.
//
// Construction checks dimensions, symmetry of Q and R (1e-10), Q >= 0 and
// R > 0, then solves the DARE. A failed solve rejects the system, which is
// how stabilizability and detectability are enforced.
class LtiSystem {
 public:
  LtiSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd q,
            Eigen::MatrixXd r);

  const Eigen::MatrixXd& A() const { return a_; }
  const Eigen::MatrixXd& B() const { return b_; }
  const Eigen::MatrixXd& Q() const { return q_; }
  const Eigen::MatrixXd& R() const { return r_; }
  int n() const { return static_cast<int>(a_.rows()); }
  int m() const { return static_cast<int>(b_.cols()); }
  // Number of policy parameters, m * n.
  int policy_dim() const { return n() * m(); }

  const DareSolution& optimal() const { return dare_; }

 private:
  Eigen::MatrixXd a_, b_, q_, r_;
  DareSolution dare_;
};

double spectral_radius(const Eigen::MatrixXd& m);

Eigen::MatrixXd closed_loop(const LtiSystem& sys, const Policy& k);

bool is_stabilizing(const LtiSystem& sys, const Policy& k);

// Solves P = W + Acl' P Acl. Kronecker vectorization for n <= 8, doubling
// otherwise; both finish with iterative refinement.
CostMatrix solve_discrete_lyapunov(const Eigen::MatrixXd& acl,
                                   const Eigen::MatrixXd& w);

double lyapunov_residual(const Eigen::MatrixXd& acl, const Eigen::MatrixXd& w,
                         const Eigen::MatrixXd& p);

// P_K; throws NotStabilizing.
CostMatrix cost_matrix(const LtiSystem& sys, const Policy& k);

// Tr(P_K Sigma0), or kInfiniteCost when K does not stabilize.
double cost_exact(const LtiSystem& sys, const Policy& k,
                  const Eigen::MatrixXd& sigma0);
double cost_exact(const LtiSystem& sys, const Policy& k);

// x0' P_K x0, or kInfiniteCost.
double cost_from_state(const LtiSystem& sys, const Policy& k,
                       const Eigen::VectorXd& x0);

// Sum of the first `horizon` stage costs along u = -Kx from x0. Defined for
// any gain; returns kInfiniteCost on overflow.
double rollout_cost(const LtiSystem& sys, const Policy& k,
                    const Eigen::VectorXd& x0, int horizon);

DareSolution solve_dare(const LtiSystem& sys);

double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     const Eigen::MatrixXd& p);

// Gain that minimizes the one-step Riccati right-hand side for value P.
Eigen::MatrixXd riccati_gain(const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& r,
                             const Eigen::MatrixXd& p);

// State covariance sum_t Acl^t Sigma0 Acl^t'; throws NotStabilizing.
Eigen::MatrixXd state_correlation(const LtiSystem& sys, const Policy& k,
                                  const Eigen::MatrixXd& sigma0);

// grad J(K) = 2((R + B'P_K B)K - B'P_K A) Sigma_K. Validation oracle only;
// the descent loop never calls it for its update.
Eigen::MatrixXd exact_gradient(const LtiSystem& sys, const Policy& k,
                               const Eigen::MatrixXd& sigma0);

}  // namespace zolqr

#endif  // ZOLQR_LQR_H_
