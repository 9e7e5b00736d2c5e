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

#include "zolqr/lqr.h"

#include <algorithm>
#include <string>

#include "zolqr/errors.h"

namespace zolqr {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr int kKroneckerMaxDim = 8;
constexpr int kDareMaxIterations = 1000000;
constexpr double kDareConvergedResidual = 1e-12;
constexpr double kDareAcceptResidual = 1e-10;
// Iterations without a new best residual before declaring a plateau.
constexpr int kDarePlateauWindow = 200;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void require_symmetric(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw InvalidInput(std::string(name) + " must be square");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw InvalidInput(std::string(name) + " must be symmetric");
  }
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric,
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                             const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd pa = p * a;
  const Eigen::MatrixXd bpa = b.transpose() * pa;
  const Eigen::MatrixXd s = r + b.transpose() * p * b;
  return symmetrize(q + a.transpose() * pa -
                    bpa.transpose() * s.ldlt().solve(bpa));
}

void validate_plant(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                    const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw InvalidInput("A must be a non-empty square matrix");
  }
  if (b.rows() != a.rows() || b.cols() == 0) {
    throw InvalidInput("B must have n rows and at least one column");
  }
  if (q.rows() != a.rows() || r.rows() != b.cols()) {
    throw InvalidInput("Q must be n x n and R must be m x m");
  }
  if (!all_finite(a) || !all_finite(b) || !all_finite(q) || !all_finite(r)) {
    throw InvalidInput("system matrices must be finite");
  }
  require_symmetric(q, "Q");
  require_symmetric(r, "R");
  if (min_eigenvalue(symmetrize(q)) < -kSymmetryTol) {
    throw InvalidInput("Q must be positive semidefinite");
  }
  if (min_eigenvalue(symmetrize(r)) <= kSymmetryTol) {
    throw InvalidInput("R must be positive definite");
  }
}

DareSolution solve_dare_matrices(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& q,
                                 const Eigen::MatrixXd& r) {
  Eigen::MatrixXd p = symmetrize(q);
  Eigen::MatrixXd best_p = p;
  double best = dare_residual(a, b, q, r, p);
  int since_best = 0;
  int it = 0;
  for (; it < kDareMaxIterations && best > kDareConvergedResidual; ++it) {
    p = riccati_step(a, b, q, r, p);
    if (!all_finite(p)) {
      throw NotStabilizable("Riccati iteration diverged");
    }
    const double res = dare_residual(a, b, q, r, p);
    if (res < best) {
      best = res;
      best_p = p;
      since_best = 0;
    } else if (++since_best >= kDarePlateauWindow) {
      break;
    }
  }
  if (!(best <= kDareAcceptResidual)) {
    throw NotStabilizable("Riccati iteration stalled at residual " +
                          std::to_string(best));
  }
  Policy k_star(riccati_gain(a, b, r, best_p));
  if (spectral_radius(a - b * k_star.gain()) > 1.0 - kStabilityMargin) {
    throw NotStabilizable("Riccati gain does not stabilize the plant");
  }
  if (min_eigenvalue(best_p) <= 0.0) {
    throw NotStabilizable("Riccati solution is not positive definite");
  }
  return DareSolution{CostMatrix(best_p), std::move(k_star), best, it};
}

CostMatrix lyapunov_kronecker(const Eigen::MatrixXd& acl,
                              const Eigen::MatrixXd& w) {
  const Eigen::Index n = acl.rows();
  const Eigen::Index nn = n * n;
  // Column-major vec: vec(Acl' P Acl) = (Acl' (x) Acl') vec(P).
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lhs.block(i * n, j * n, n, n) -= acl(j, i) * acl.transpose();
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) {
    throw NumericalError("Lyapunov operator is singular");
  }
  const Eigen::Map<const Eigen::VectorXd> rhs(w.data(), nn);
  Eigen::VectorXd vp = lu.solve(rhs);
  Eigen::MatrixXd p = symmetrize(Eigen::Map<Eigen::MatrixXd>(vp.data(), n, n));
  for (int refine = 0; refine < 2; ++refine) {
    Eigen::MatrixXd defect = w + acl.transpose() * p * acl - p;
    Eigen::Map<const Eigen::VectorXd> vd(defect.data(), nn);
    Eigen::VectorXd dp = lu.solve(Eigen::VectorXd(vd));
    p = symmetrize(p + Eigen::Map<Eigen::MatrixXd>(dp.data(), n, n));
  }
  return CostMatrix(p);
}

CostMatrix lyapunov_doubling(const Eigen::MatrixXd& acl,
                             const Eigen::MatrixXd& w) {
  // P_{k+1} = P_k + A_k' P_k A_k, A_{k+1} = A_k^2 sums 2^k terms per step.
  Eigen::MatrixXd p = w;
  Eigen::MatrixXd ak = acl;
  for (int k = 0; k < 64; ++k) {
    Eigen::MatrixXd term = ak.transpose() * p * ak;
    p += term;
    ak = ak * ak;
    if (!all_finite(p)) break;
    if (term.norm() <= 1e-17 * p.norm()) {
      for (int refine = 0; refine < 3; ++refine) {
        // Fixed-point correction keeps the residual at rounding level.
        p = symmetrize(w + acl.transpose() * p * acl);
      }
      return CostMatrix(symmetrize(p));
    }
  }
  throw NumericalError("Lyapunov doubling did not converge");
}

}  // namespace

Policy::Policy(Eigen::MatrixXd gain) : gain_(std::move(gain)) {
  if (gain_.size() == 0 || !gain_.allFinite()) {
    throw InvalidInput("policy gain must be non-empty and finite");
  }
}

CostMatrix::CostMatrix(Eigen::MatrixXd p) : p_(std::move(p)) {
  if (p_.rows() != p_.cols()) {
    throw InvalidInput("cost matrix must be square");
  }
  if (p_.size() > 0 &&
      (p_ - p_.transpose()).cwiseAbs().maxCoeff() >
          kSymmetryTol * std::max(1.0, p_.cwiseAbs().maxCoeff())) {
    throw InvalidInput("cost matrix must be symmetric");
  }
}

LtiSystem::LtiSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd q,
                     Eigen::MatrixXd r)
    : a_(std::move(a)),
      b_(std::move(b)),
      q_(std::move(q)),
      r_(std::move(r)),
      dare_([this] {
        validate_plant(a_, b_, q_, r_);
        q_ = symmetrize(q_);
        r_ = symmetrize(r_);
        return solve_dare_matrices(a_, b_, q_, r_);
      }()) {}

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw InvalidInput("spectral_radius needs a square matrix");
  }
  if (!all_finite(m)) {
    throw InvalidInput("spectral_radius needs finite entries");
  }
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigenvalue computation failed");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd closed_loop(const LtiSystem& sys, const Policy& k) {
  if (k.rows() != sys.m() || k.cols() != sys.n()) {
    throw InvalidInput("policy must be m x n");
  }
  return sys.A() - sys.B() * k.gain();
}

bool is_stabilizing(const LtiSystem& sys, const Policy& k) {
  return spectral_radius(closed_loop(sys, k)) <= 1.0 - kStabilityMargin;
}

CostMatrix solve_discrete_lyapunov(const Eigen::MatrixXd& acl,
                                   const Eigen::MatrixXd& w) {
  if (acl.rows() != acl.cols() || w.rows() != acl.rows() ||
      w.cols() != acl.cols()) {
    throw InvalidInput("Lyapunov operands must be square and conformant");
  }
  if (!all_finite(w)) throw InvalidInput("W must be finite");
  if (spectral_radius(acl) > 1.0 - kStabilityMargin) {
    throw NotStabilizing("closed loop is not Schur stable");
  }
  const Eigen::MatrixXd ws = symmetrize(w);
  return acl.rows() <= kKroneckerMaxDim ? lyapunov_kronecker(acl, ws)
                                        : lyapunov_doubling(acl, ws);
}

double lyapunov_residual(const Eigen::MatrixXd& acl, const Eigen::MatrixXd& w,
                         const Eigen::MatrixXd& p) {
  return (w + acl.transpose() * p * acl - p).norm();
}

CostMatrix cost_matrix(const LtiSystem& sys, const Policy& k) {
  const Eigen::MatrixXd acl = closed_loop(sys, k);
  const Eigen::MatrixXd w = sys.Q() + k.gain().transpose() * sys.R() * k.gain();
  return solve_discrete_lyapunov(acl, w);
}

double cost_exact(const LtiSystem& sys, const Policy& k,
                  const Eigen::MatrixXd& sigma0) {
  if (sigma0.rows() != sys.n() || sigma0.cols() != sys.n()) {
    throw InvalidInput("Sigma0 must be n x n");
  }
  if (!is_stabilizing(sys, k)) return kInfiniteCost;
  return (cost_matrix(sys, k).matrix() * sigma0).trace();
}

double cost_exact(const LtiSystem& sys, const Policy& k) {
  return cost_exact(sys, k, Eigen::MatrixXd::Identity(sys.n(), sys.n()));
}

double cost_from_state(const LtiSystem& sys, const Policy& k,
                       const Eigen::VectorXd& x0) {
  if (x0.size() != sys.n()) throw InvalidInput("x0 must have n entries");
  if (!is_stabilizing(sys, k)) return kInfiniteCost;
  return x0.dot(cost_matrix(sys, k).matrix() * x0);
}

double rollout_cost(const LtiSystem& sys, const Policy& k,
                    const Eigen::VectorXd& x0, int horizon) {
  if (horizon < 1) throw InvalidInput("rollout length must be >= 1");
  if (x0.size() != sys.n()) throw InvalidInput("x0 must have n entries");
  const Eigen::MatrixXd acl = closed_loop(sys, k);
  const Eigen::MatrixXd stage =
      sys.Q() + k.gain().transpose() * sys.R() * k.gain();
  Eigen::VectorXd x = x0;
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    total += x.dot(stage * x);
    if (!std::isfinite(total)) return kInfiniteCost;
    x = acl * x;
  }
  return total;
}

double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     const Eigen::MatrixXd& p) {
  return (riccati_step(a, b, q, r, p) - p).norm();
}

Eigen::MatrixXd riccati_gain(const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& r,
                             const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd s = r + b.transpose() * p * b;
  return s.ldlt().solve(b.transpose() * p * a);
}

DareSolution solve_dare(const LtiSystem& sys) {
  return solve_dare_matrices(sys.A(), sys.B(), sys.Q(), sys.R());
}

Eigen::MatrixXd state_correlation(const LtiSystem& sys, const Policy& k,
                                  const Eigen::MatrixXd& sigma0) {
  // Sigma_K = Sigma0 + Acl Sigma_K Acl', i.e. the Lyapunov form with Acl'.
  const Eigen::MatrixXd acl = closed_loop(sys, k);
  return solve_discrete_lyapunov(acl.transpose(), sigma0).matrix();
}

Eigen::MatrixXd exact_gradient(const LtiSystem& sys, const Policy& k,
                               const Eigen::MatrixXd& sigma0) {
  if (!is_stabilizing(sys, k)) {
    throw NotStabilizing("exact_gradient needs a stabilizing gain");
  }
  const Eigen::MatrixXd p = cost_matrix(sys, k).matrix();
  const Eigen::MatrixXd sigma_k = state_correlation(sys, k, sigma0);
  const Eigen::MatrixXd& b = sys.B();
  return 2.0 * ((sys.R() + b.transpose() * p * b) * k.gain() -
                b.transpose() * p * sys.A()) *
         sigma_k;
}

}  // namespace zolqr
