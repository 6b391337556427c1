#pragma once

#include <Eigen/Dense>

#include "mcagg/errors.hpp"
#include "mcagg/markov.hpp"

namespace mcagg {

// Soft assignment of n original states to m groups; rows sum to 1.
struct PartitionMatrix {
  Eigen::MatrixXd psi; // n x m

  Eigen::Index n() const { return psi.rows(); }
  Eigen::Index m() const { return psi.cols(); }

  // m = 1 column of ones (every state in a single group)
  static PartitionMatrix ones(Eigen::Index n) {
    return {Eigen::MatrixXd::Ones(n, 1)};
  }
  static PartitionMatrix identity(Eigen::Index n) {
    return {Eigen::MatrixXd::Identity(n, n)};
  }
};

// Throws when psi has out-of-range entries, bad row sums, or m outside [1, n].
void check_partition(const PartitionMatrix& psi, double tol = 1e-12);

// m x n weighting matrix; each row is a distribution over original states,
// which makes rows of the reduced dynamics KL-comparable with rows of pi.
struct JointWeightMatrix {
  Eigen::MatrixXd theta;
};

// The aggregated chain: m x m stochastic matrix plus group marginals.
struct ReducedModel {
  Eigen::MatrixXd phi;
  Eigen::VectorXd alpha;
};

// Conditional tables for the bottleneck relevance variable q (the chain's
// next state): eta(q,i) = p(q|state i), omega(q) = p(q), kappa(q,j) =
// p(q|group j), rho(q,j) = p(q, group j), tau(i,j) = p(state i|group j).
struct RelevanceModel {
  Eigen::MatrixXd eta;   // n_q x n
  Eigen::VectorXd omega; // n_q
  Eigen::MatrixXd kappa; // n_q x m
  Eigen::MatrixXd rho;   // n_q x m
  Eigen::MatrixXd tau;   // n x m
};

// alpha_j = sum_i gamma_i psi_{i,j}
Eigen::VectorXd group_marginals(const Eigen::VectorXd& gamma,
                                const PartitionMatrix& psi);

// Theta = U^T pi with U_{i,j} = gamma_i psi_{i,j} / alpha_j. Throws
// empty_group when some alpha_j = 0.
JointWeightMatrix build_joint_weights(const TransitionModel& model,
                                      const PartitionMatrix& psi);

// phi_{i,j} = sum_k theta_{i,k} psi_{k,j} (row of theta pushed through psi).
ReducedModel build_reduced(const JointWeightMatrix& theta,
                           const PartitionMatrix& psi,
                           const Eigen::VectorXd& gamma);

// D = sum_{i,j} gamma_i psi_{i,j} KL(pi_i || theta_j), in bits. Throws
// infinite_divergence when a positive-weight pair has support mismatch.
double expected_divergence(const TransitionModel& model,
                           const PartitionMatrix& psi,
                           const JointWeightMatrix& theta);

// Mutual information between original state and group:
// I = sum_{i,j} gamma_i psi_{i,j} log2(psi_{i,j}/alpha_j).
double partition_information(const Eigen::VectorXd& gamma,
                             const PartitionMatrix& psi);

// The alpha-weighted information functional
// sum_j alpha_j sum_i psi_{i,j} log2(psi_{i,j}/gamma_i), reported alongside
// partition_information (the two coincide only in special cases).
double constraint_information(const Eigen::VectorXd& gamma,
                              const PartitionMatrix& psi);

RelevanceModel build_relevance(const TransitionModel& model,
                               const PartitionMatrix& psi);

// I(q; group) = sum_{q,j} rho_{q,j} log2(kappa_{q,j}/omega_q); the retained
// predictive information of the aggregated chain.
double relevance_information(const RelevanceModel& rel);

// Per-row argmax, ties to the lowest group index.
Eigen::VectorXi harden(const PartitionMatrix& psi);

} // namespace mcagg
