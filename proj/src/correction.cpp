#include "mcagg/correction.hpp"

#include <cmath>
#include <limits>

namespace mcagg {

namespace {
constexpr double kLn2 = 0.6931471805599453;
// keeps 1/kappa^g blow-ups finite so matrix products stay NaN-free; rows
// hitting the cap are saturated in the Gibbs step anyway
constexpr double kCellCap = 1e12;

double capped(double v) {
  if (!std::isfinite(v))
    return kCellCap;
  return std::min(std::max(v, -kCellCap), kCellCap);
}

double ipow(double x, int e) {
  double out = 1.0;
  for (int k = 0; k < e; ++k)
    out *= x;
  return out;
}

void check_groups(const Eigen::VectorXd& alpha) {
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    // the subnormal floor keeps 1/alpha finite downstream
    if (alpha[j] <= 1e-300)
      throw error(errc::empty_group,
                  "group " + std::to_string(j) + " has zero marginal mass", j);
}
} // namespace

namespace detail {

double gaussian_central_moment(double sigma2, int g) {
  if (g % 2 != 0)
    return 0.0;
  double m = 1.0; // (g-1)!!
  for (int k = g - 1; k > 1; k -= 2)
    m *= k;
  return m * ipow(sigma2, g / 2);
}

double gaussian_cross_moment(double cov, double sigma2, int g) {
  if (g % 2 != 0)
    return 0.0;
  // E[X Y^{g-1}] = (g-1) (g-3)!! Cov(X,Y) sigma^{g-2}
  double m = double(g - 1);
  for (int k = g - 3; k > 1; k -= 2)
    m *= k;
  return m * cov * ipow(sigma2, (g - 2) / 2);
}

double kappa_term_core(const Eigen::MatrixXd& kappa,
                       const Eigen::MatrixXd& var_kappa,
                       const Eigen::VectorXd& alpha,
                       const Eigen::VectorXd& omega,
                       const Eigen::VectorXd& var_omega, int g_max) {
  const Eigen::Index nq = kappa.rows(), m = kappa.cols();
  double acc = 0.0;
  for (int g = 2; g <= g_max; g += 2) {
    const double coef = 1.0 / (kLn2 * g * (g - 1));
    double inner = 0.0;
    for (Eigen::Index q = 0; q < nq; ++q) {
      if (omega[q] <= 0.0)
        continue;
      const double om = gaussian_central_moment(var_omega[q], g) /
                        ipow(omega[q], g - 1);
      for (Eigen::Index j = 0; j < m; ++j) {
        const double rho = kappa(q, j) * alpha[j];
        if (rho <= 0.0)
          continue;
        inner += gaussian_central_moment(var_kappa(q, j), g) /
                     ipow(rho, g - 1) -
                 om;
      }
    }
    acc += coef * inner;
  }
  return acc;
}

Eigen::MatrixXd ib_correction_exponent(const Eigen::MatrixXd& pi,
                                       const Eigen::MatrixXd& eta_var,
                                       const Eigen::MatrixXd& tau,
                                       const Eigen::MatrixXd& kappa,
                                       const Eigen::MatrixXd& var_kappa,
                                       double beta, int g_max) {
  const Eigen::Index n = pi.rows(), m = kappa.cols();
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, m);
  Eigen::MatrixXd a(kappa.rows(), m), b(kappa.rows(), m);
  for (int g = 2; g <= g_max; g += 2) {
    // first piece: sum_q eta(q,i) E[kappa_bar^g]/(g kappa^g)
    // second piece: E[eta_bar kappa_bar^{g-1}]/((g-1) kappa^g), whose
    // covariance factor tau(i,j) eta_var(q,i) splits out of the q-sum
    for (Eigen::Index q = 0; q < kappa.rows(); ++q)
      for (Eigen::Index j = 0; j < m; ++j) {
        const double k = kappa(q, j);
        if (k <= 0.0) {
          a(q, j) = 0.0;
          b(q, j) = 0.0;
          continue;
        }
        const double kg = ipow(k, g);
        a(q, j) = capped(gaussian_central_moment(var_kappa(q, j), g) /
                         (double(g) * kg));
        b(q, j) = capped(gaussian_cross_moment(1.0, var_kappa(q, j), g) /
                         (double(g - 1) * kg));
      }
    total.noalias() += pi * a;            // (i,j) <- sum_q eta(q,i) a(q,j)
    total -= tau.cwiseProduct(eta_var.transpose() * b);
  }
  return (-beta) * total.unaryExpr([](double v) { return capped(v); });
}

} // namespace detail

ErrorModel multinomial_error_model(const TransitionModel& model,
                                   double sample_count) {
  if (sample_count < 1.0)
    throw error(errc::invalid_distribution, "sample count must be >= 1");
  const Eigen::Index n = model.n();
  ErrorModel em;
  em.pi = model.pi;
  em.sample_count = sample_count;
  em.gamma_cov =
      (Eigen::MatrixXd(model.gamma.asDiagonal()) -
       model.gamma * model.gamma.transpose()) /
      sample_count;
  em.row_visits = sample_count * model.gamma;
  em.eta_var.resize(n, n); // (q,i)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index q = 0; q < n; ++q)
      em.eta_var(q, i) =
          model.pi(i, q) * (1.0 - model.pi(i, q)) / em.row_visits[i];
  return em;
}

double gamma_correction_term(const PartitionMatrix& psi,
                             const Eigen::VectorXd& alpha,
                             const ErrorModel& error_model, int g_max) {
  check_groups(alpha);
  double acc = 0.0;
  for (int g = 2; g <= g_max; g += 2) {
    const double coef = 1.0 / (kLn2 * g * (g - 1)); // (-1)^g = +1, even g
    double inner = 0.0;
    for (Eigen::Index j = 0; j < psi.m(); ++j) {
      const double sigma2 =
          psi.psi.col(j).dot(error_model.gamma_cov * psi.psi.col(j));
      inner += detail::gaussian_central_moment(std::max(sigma2, 0.0), g) /
               ipow(alpha[j], g - 1);
    }
    acc += coef * inner;
  }
  return acc;
}

double kappa_correction_term(const RelevanceModel& rel,
                             const PartitionMatrix& psi,
                             const ErrorModel& error_model, int g_max,
                             bool rho_as_tau) {
  const Eigen::VectorXd alpha = rel.rho.colwise().sum();

  Eigen::MatrixXd weights = rel.tau;
  if (!rho_as_tau)
    weights = rel.tau * alpha.asDiagonal(); // joint reading: gamma_i psi_{i,j}

  // Var over the relevance-table errors, all zero-mean and row-independent
  const Eigen::MatrixXd var_kappa =
      error_model.eta_var * weights.array().square().matrix();
  // tau * diag(alpha) reconstructs gamma_i psi_{i,j}; its row sums are gamma
  const Eigen::VectorXd gamma = (rel.tau * alpha.asDiagonal()).rowwise().sum();
  const Eigen::VectorXd var_omega =
      error_model.eta_var * gamma.array().square().matrix();
  return detail::kappa_term_core(rel.kappa, var_kappa, alpha, rel.omega,
                                 var_omega, g_max);
}

double corrected_objective(const TransitionModel& model,
                           const PartitionMatrix& psi, double beta,
                           const CorrectionConfig& config,
                           const ErrorModel& error_model) {
  const double raw = evaluate_objective(model, psi, beta);
  const Eigen::VectorXd alpha = group_marginals(model.gamma, psi);
  const RelevanceModel rel = build_relevance(model, psi);
  return raw + gamma_correction_term(psi, alpha, error_model, config.g_max) -
         kappa_correction_term(rel, psi, error_model, config.g_max,
                               config.rho_as_tau);
}

PartitionMatrix corrected_init_update(const TransitionModel& model,
                                      const PartitionMatrix& psi0,
                                      const OptimizerConfig& opt,
                                      const CorrectionConfig& config,
                                      const ErrorModel& error_model) {
  check_partition(psi0, 1e-9);
  const Eigen::Index n = psi0.n(), m = psi0.m();
  const Eigen::VectorXd alpha = group_marginals(model.gamma, psi0);
  const JointWeightMatrix theta = build_joint_weights(model, psi0);
  const Eigen::MatrixXd e = detail::divergence_energies_nats(
      model.pi, theta.theta.transpose(), opt.support_floor);

  // group-mass error moments; the sum over groups p makes the whole term
  // identical for every candidate group j of a given row
  Eigen::VectorXd sigma2(m);
  Eigen::MatrixXd cross(n, m); // Cov(gamma_bar_i, sum_s gamma_bar_s psi_{s,p})
  for (Eigen::Index p = 0; p < m; ++p) {
    const Eigen::VectorXd cp = error_model.gamma_cov * psi0.psi.col(p);
    sigma2[p] = std::max(psi0.psi.col(p).dot(cp), 0.0);
    cross.col(p) = cp;
  }

  Eigen::MatrixXd extra = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (int g = 2; g <= config.g_max; g += 2) {
      for (Eigen::Index p = 0; p < m; ++p) {
        const double a =
            detail::gaussian_central_moment(sigma2[p], g) /
            (double(g) * ipow(alpha[p], g));
        const double b =
            detail::gaussian_cross_moment(cross(i, p), sigma2[p], g) /
            (double(g - 1) * model.gamma[i] * ipow(alpha[p], g - 1));
        s += capped(a) - capped(b);
      }
    }
    if (config.beta_scaled_init_correction)
      s *= opt.beta;
    extra.row(i).setConstant(capped(s));
  }
  return detail::gibbs_rows(alpha, e, opt.beta, &extra);
}

OptimizerState corrected_ib_update(const TransitionModel& model,
                                   const OptimizerState& state,
                                   const OptimizerConfig& opt,
                                   const CorrectionConfig& config,
                                   const ErrorModel& error_model) {
  const Eigen::VectorXd alpha = group_marginals(model.gamma, state.psi);
  check_groups(alpha);
  const Eigen::MatrixXd tau = model.gamma.asDiagonal() * state.psi.psi *
                              alpha.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd kappa = model.pi.transpose() * tau;
  const Eigen::MatrixXd var_kappa =
      error_model.eta_var * tau.array().square().matrix();
  const Eigen::MatrixXd e =
      detail::divergence_energies_nats(model.pi, kappa, opt.support_floor);
  const Eigen::MatrixXd extra = detail::ib_correction_exponent(
      model.pi, error_model.eta_var, tau, kappa, var_kappa, opt.beta,
      config.g_max);
  PartitionMatrix next = detail::gibbs_rows(alpha, e, opt.beta, &extra);
  const double delta = (next.psi - state.psi.psi).array().abs().maxCoeff();

  OptimizerState out = make_state(model, next, opt);
  out.iterations = state.iterations + 1;
  out.converged = delta < opt.psi_tol;
  out.objective_trace = state.objective_trace;
  out.objective_trace.push_back(
      corrected_objective(model, next, opt.beta, config, error_model));
  out.delta_trace = state.delta_trace;
  out.delta_trace.push_back(delta);
  return out;
}

OptimizerState run_corrected_fixed_point(const TransitionModel& model,
                                         const PartitionMatrix& psi0,
                                         const OptimizerConfig& opt,
                                         const CorrectionConfig& config,
                                         const ErrorModel& error_model) {
  check_partition(psi0, 1e-9);
  PartitionMatrix psi = psi0;
  std::vector<double> objective_trace, delta_trace;
  double delta = std::numeric_limits<double>::infinity();
  int k = 0;
  bool converged = false;

  const Eigen::VectorXd negent = detail::row_negentropy_nats(model.pi);
  // omega = gamma is model-fixed, so its error variance is loop-invariant
  const Eigen::VectorXd var_omega =
      error_model.eta_var * model.gamma.array().square().matrix();

  while (true) {
    const Eigen::VectorXd alpha = group_marginals(model.gamma, psi);
    check_groups(alpha);
    const Eigen::MatrixXd tau = model.gamma.asDiagonal() * psi.psi *
                                alpha.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd kappa = model.pi.transpose() * tau;
    const Eigen::MatrixXd var_kappa =
        error_model.eta_var * tau.array().square().matrix();
    const Eigen::MatrixXd e = detail::divergence_energies_nats(
        model.pi, kappa, opt.support_floor, negent);

    double objective =
        detail::lagrangian_bits(model.gamma, psi, alpha, e, opt.beta) +
        gamma_correction_term(psi, alpha, error_model, config.g_max);
    if (config.rho_as_tau) {
      objective -= detail::kappa_term_core(kappa, var_kappa, alpha,
                                           model.gamma, var_omega,
                                           config.g_max);
    } else {
      const Eigen::MatrixXd joint_weights =
          tau * alpha.asDiagonal(); // gamma_i psi_{i,j}
      const Eigen::MatrixXd var_joint =
          error_model.eta_var * joint_weights.array().square().matrix();
      objective -= detail::kappa_term_core(kappa, var_joint, alpha,
                                           model.gamma, var_omega,
                                           config.g_max);
    }
    objective_trace.push_back(objective);
    delta_trace.push_back(k == 0 ? 0.0 : delta);
    if (delta < opt.psi_tol) {
      converged = true;
      break;
    }
    if (k >= opt.max_iters)
      break;

    PartitionMatrix next;
    if (k == 0) {
      next = corrected_init_update(model, psi, opt, config, error_model);
    } else {
      const Eigen::MatrixXd extra = detail::ib_correction_exponent(
          model.pi, error_model.eta_var, tau, kappa, var_kappa, opt.beta,
          config.g_max);
      next = detail::gibbs_rows(alpha, e, opt.beta, &extra);
    }
    delta = (next.psi - psi.psi).array().abs().maxCoeff();
    psi = std::move(next);
    ++k;
  }

  OptimizerState st = make_state(model, psi, opt);
  st.iterations = k;
  st.converged = converged;
  st.objective_trace = std::move(objective_trace);
  st.delta_trace = std::move(delta_trace);
  return st;
}

CorrectionReport correction_report(const TransitionModel& model,
                                   const PartitionMatrix& psi,
                                   const CorrectionConfig& config,
                                   const ErrorModel& error_model) {
  const Eigen::VectorXd alpha = group_marginals(model.gamma, psi);
  const RelevanceModel rel = build_relevance(model, psi);
  CorrectionReport rep;
  rep.raw_information_bits = relevance_information(rel);
  rep.gamma_term_bits =
      gamma_correction_term(psi, alpha, error_model, config.g_max);
  rep.kappa_term_bits = kappa_correction_term(rel, psi, error_model,
                                              config.g_max, config.rho_as_tau);
  rep.corrected_information_bits =
      rep.raw_information_bits - rep.kappa_term_bits;
  rep.g_max = config.g_max;
  rep.sample_count = error_model.sample_count;
  return rep;
}

} // namespace mcagg
