#pragma once

#include <cstdint>

#include "mcagg/aggregation.hpp"
#include "mcagg/markov.hpp"
#include "mcagg/voi.hpp"

namespace mcagg {

struct CorrectionConfig {
  int g_max = 2;                  // series truncation order
  std::int64_t sample_count = 0;  // 0 -> default_sample_count(n)
  // Reading of the expectation weights in the relevance correction: the
  // conditional table tau (on) or the joint weights gamma*psi (off).
  bool rho_as_tau = true;
  // Scale the k = 0 update correction by beta instead of leaving it as a
  // bare exponent term.
  bool beta_scaled_init_correction = false;
};

// Effective transition count behind the probability estimates when the
// caller does not supply one: ~55 observations per transition-matrix entry.
inline double default_sample_count(Eigen::Index n) {
  return 55.0 * double(n) * double(n);
}

// Zero-mean multinomial estimation-error model. gamma errors have covariance
// (diag(gamma) - gamma gamma^T)/N; the eta errors of state i have covariance
// (diag(pi_i) - pi_i pi_i^T)/(N gamma_i) over q, independent across states.
struct ErrorModel {
  Eigen::MatrixXd gamma_cov; // n x n
  Eigen::MatrixXd eta_var;   // (q,i) -> Var(eta_bar(q,i))
  Eigen::MatrixXd pi;
  Eigen::VectorXd row_visits; // N * gamma_i
  double sample_count = 0.0;

  Eigen::MatrixXd eta_cov(Eigen::Index i) const {
    const Eigen::VectorXd p = pi.row(i).transpose();
    return (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose()) /
           row_visits[i];
  }
};

ErrorModel multinomial_error_model(const TransitionModel& model,
                                   double sample_count);

// Added k = 0 correction: per group, the Gaussian-closure moments of the
// group-mass estimation error sum_i gamma_bar_i psi_{i,j}, in bits.
double gamma_correction_term(const PartitionMatrix& psi,
                             const Eigen::VectorXd& alpha,
                             const ErrorModel& error_model, int g_max);

// Subtracted k > 0 correction over the relevance table, truncated at g_max;
// cells with rho(q,j) = 0 contribute nothing.
double kappa_correction_term(const RelevanceModel& rel,
                             const PartitionMatrix& psi,
                             const ErrorModel& error_model, int g_max,
                             bool rho_as_tau = true);

// Raw Lagrangian plus the gamma term minus the kappa term.
double corrected_objective(const TransitionModel& model,
                           const PartitionMatrix& psi, double beta,
                           const CorrectionConfig& config,
                           const ErrorModel& error_model);

PartitionMatrix corrected_init_update(const TransitionModel& model,
                                      const PartitionMatrix& psi0,
                                      const OptimizerConfig& opt,
                                      const CorrectionConfig& config,
                                      const ErrorModel& error_model);

OptimizerState corrected_ib_update(const TransitionModel& model,
                                   const OptimizerState& state,
                                   const OptimizerConfig& opt,
                                   const CorrectionConfig& config,
                                   const ErrorModel& error_model);

OptimizerState run_corrected_fixed_point(const TransitionModel& model,
                                         const PartitionMatrix& psi0,
                                         const OptimizerConfig& opt,
                                         const CorrectionConfig& config,
                                         const ErrorModel& error_model);

// Per-level reporting bundle for the information curve.
struct CorrectionReport {
  double raw_information_bits = 0.0;
  double corrected_information_bits = 0.0;
  double gamma_term_bits = 0.0;
  double kappa_term_bits = 0.0;
  int g_max = 0;
  double sample_count = 0.0;
};

CorrectionReport correction_report(const TransitionModel& model,
                                   const PartitionMatrix& psi,
                                   const CorrectionConfig& config,
                                   const ErrorModel& error_model);

namespace detail {

// Gaussian-closure central moment E[S^g] for Var(S) = sigma2 (0 for odd g).
double gaussian_central_moment(double sigma2, int g);

// E[X Y^{g-1}] for zero-mean jointly Gaussian X, Y (0 when g is odd).
double gaussian_cross_moment(double cov, double sigma2, int g);

// Correction energies added to the k > 0 Gibbs exponent (already including
// the -beta factor). var_kappa(q,j) = Var(sum_i eta_bar(q,i) tau(i,j)).
Eigen::MatrixXd ib_correction_exponent(const Eigen::MatrixXd& pi,
                                       const Eigen::MatrixXd& eta_var,
                                       const Eigen::MatrixXd& tau,
                                       const Eigen::MatrixXd& kappa,
                                       const Eigen::MatrixXd& var_kappa,
                                       double beta, int g_max);

// kappa correction assembled from precomputed tables.
double kappa_term_core(const Eigen::MatrixXd& kappa,
                       const Eigen::MatrixXd& var_kappa,
                       const Eigen::VectorXd& alpha,
                       const Eigen::VectorXd& omega,
                       const Eigen::VectorXd& var_omega, int g_max);

} // namespace detail

} // namespace mcagg
