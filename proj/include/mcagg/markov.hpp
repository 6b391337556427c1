#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mcagg/errors.hpp"

namespace mcagg {

// An n-state chain: row-stochastic transition matrix plus its stationary
// distribution. Immutable after construction; cheap to copy at desk scale.
struct TransitionModel {
  Eigen::MatrixXd pi;    // n x n, rows sum to 1
  Eigen::VectorXd gamma; // stationary distribution, gamma^T pi = gamma^T

  Eigen::Index n() const { return pi.rows(); }
};

// Recipe for a nearly-completely-decomposable chain: block-diagonal core
// plus a weak coupling of strength epsilon.
struct NcdSpec {
  std::vector<int> block_sizes;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index n() const {
    Eigen::Index s = 0;
    for (int b : block_sizes)
      s += b;
    return s;
  }
};

// Checks squareness, non-negativity (entries in (-tol, 0) are clamped to
// zero) and row sums; returns the clamped matrix. Throws non_square,
// negative_entry or row_sum_violation.
Eigen::MatrixXd validate_stochastic(const Eigen::MatrixXd& matrix, double tol);

// Power iteration on pi^T from the uniform vector, renormalized each step.
// Throws no_convergence after max_iters (periodic or reducible chain).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& pi,
                                        double tol = 1e-12,
                                        int max_iters = 100000);

// Validates pi and attaches the stationary distribution.
TransitionModel make_model(const Eigen::MatrixXd& pi, double tol = 1e-12);

// Same, but trusts a precomputed gamma (e.g. loaded from a sidecar file);
// the invariance gamma^T pi = gamma^T is still checked.
TransitionModel make_model_with_gamma(const Eigen::MatrixXd& pi,
                                      const Eigen::VectorXd& gamma,
                                      double tol = 1e-12);

// Seeded NCD generator. Each core block row is Dirichlet(1); coupling moves
// a random fraction epsilon*u_i (u_i in [0.5, 1]) of row i's within-block
// mass, proportionally, onto a random distribution over off-block columns,
// so the coupling matrix has zero row sums by construction. Throws
// epsilon_too_large when the coupling would not leave the blocks dominant.
TransitionModel generate_ncd(const NcdSpec& spec);

// KL divergence in bits with the 0*log(0/q) = 0 convention. Returns +inf
// when p has mass where q has none. Throws length_mismatch /
// invalid_distribution.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

} // namespace mcagg
