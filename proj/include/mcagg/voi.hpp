#pragma once

#include <vector>

#include "mcagg/aggregation.hpp"
#include "mcagg/markov.hpp"

namespace mcagg {

struct OptimizerConfig {
  double beta = 1.0;      // Lagrange multiplier (inverse temperature)
  int max_iters = 2000;
  double psi_tol = 1e-9;  // entrywise |delta psi| convergence threshold
  double support_floor = 1e-300; // floor for log arguments, never for weights
};

struct OptimizerState {
  PartitionMatrix psi;
  JointWeightMatrix theta;
  Eigen::VectorXd alpha;
  RelevanceModel relevance;
  int iterations = 0;
  std::vector<double> objective_trace; // bits, one entry per consistent state
  std::vector<double> delta_trace;     // max |delta psi| per applied update
  bool converged = false;
};

// One Gibbs reassignment against theta rows built from psi0 (the k = 0
// divergence-driven step). Rows of the result sum to 1.
PartitionMatrix init_update(const TransitionModel& model,
                            const PartitionMatrix& psi0,
                            const OptimizerConfig& config);

// One bottleneck step: recompute alpha and kappa from the current psi, then
// Gibbs-reassign with the relevance divergence as energy.
OptimizerState ib_update(const TransitionModel& model,
                         const OptimizerState& state,
                         const OptimizerConfig& config);

// Lagrangian value in bits: expected relevance divergence plus the partition
// information weighted by 1/beta (energy term alone when beta = 0). This is
// the quantity the alternating updates never increase.
double evaluate_objective(const TransitionModel& model,
                          const PartitionMatrix& psi, double beta);

// Builds a fully consistent state (alpha, theta, relevance, objective) for a
// given partition.
OptimizerState make_state(const TransitionModel& model,
                          const PartitionMatrix& psi,
                          const OptimizerConfig& config);

// Alternating updates until max entrywise |delta psi| < psi_tol or max_iters;
// an unconverged state is returned with converged = false rather than thrown.
OptimizerState run_fixed_point(const TransitionModel& model,
                               const PartitionMatrix& psi0,
                               const OptimizerConfig& config);

namespace detail {

// sum_q pi(i,q) ln pi(i,q) per row, in nats
Eigen::VectorXd row_negentropy_nats(const Eigen::MatrixXd& pi);

// E(i,j) = sum_q pi(i,q) ln(pi(i,q)/kappa(q,j)) in nats; +inf where row i has
// mass outside kappa column j's support.
Eigen::MatrixXd divergence_energies_nats(const Eigen::MatrixXd& pi,
                                         const Eigen::MatrixXd& kappa,
                                         double support_floor);

// same, with the per-row entropy term precomputed (hot-loop variant)
Eigen::MatrixXd divergence_energies_nats(const Eigen::MatrixXd& pi,
                                         const Eigen::MatrixXd& kappa,
                                         double support_floor,
                                         const Eigen::VectorXd& negentropy);

// psi(i,j) proportional to alpha_j exp(-beta E(i,j) + extra(i,j)), normalized
// per row in log space. Throws numeric_underflow when a whole row vanishes.
PartitionMatrix gibbs_rows(const Eigen::VectorXd& alpha,
                           const Eigen::MatrixXd& energies_nats, double beta,
                           const Eigen::MatrixXd* extra_nats = nullptr);

double lagrangian_bits(const Eigen::VectorXd& gamma, const PartitionMatrix& psi,
                       const Eigen::VectorXd& alpha,
                       const Eigen::MatrixXd& energies_nats, double beta);

} // namespace detail

} // namespace mcagg
