#include "mcagg/voi.hpp"

#include <cmath>
#include <limits>

namespace mcagg {

namespace detail {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;
} // namespace

Eigen::VectorXd row_negentropy_nats(const Eigen::MatrixXd& pi) {
  Eigen::VectorXd h(pi.rows());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < pi.cols(); ++q) {
      const double v = pi(i, q);
      if (v > 0.0)
        acc += v * std::log(v);
    }
    h[i] = acc;
  }
  return h;
}

Eigen::MatrixXd divergence_energies_nats(const Eigen::MatrixXd& pi,
                                         const Eigen::MatrixXd& kappa,
                                         double support_floor) {
  return divergence_energies_nats(pi, kappa, support_floor,
                                  row_negentropy_nats(pi));
}

Eigen::MatrixXd divergence_energies_nats(const Eigen::MatrixXd& pi,
                                         const Eigen::MatrixXd& kappa,
                                         double support_floor,
                                         const Eigen::VectorXd& negentropy) {
  const Eigen::Index n = pi.rows(), m = kappa.cols();
  bool has_zero = false;
  Eigen::MatrixXd lnk(kappa.rows(), m);
  for (Eigen::Index q = 0; q < kappa.rows(); ++q)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double v = kappa(q, j);
      if (v > 0.0) {
        lnk(q, j) = std::log(std::max(v, support_floor));
      } else {
        lnk(q, j) = 0.0; // placeholder, fixed up below
        has_zero = true;
      }
    }

  Eigen::MatrixXd e = negentropy.replicate(1, m) - pi * lnk;

  if (has_zero) {
    // rows with mass on a zero-support cell have infinite energy
    Eigen::MatrixXd mask = (pi.array() > 0.0).cast<double>().matrix() *
                           (kappa.array() == 0.0).cast<double>().matrix();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        if (mask(i, j) > 0.0)
          e(i, j) = kInf;
  }
  return e;
}

PartitionMatrix gibbs_rows(const Eigen::VectorXd& alpha,
                           const Eigen::MatrixXd& energies_nats, double beta,
                           const Eigen::MatrixXd* extra_nats) {
  const Eigen::Index n = energies_nats.rows(), m = energies_nats.cols();
  Eigen::VectorXd ln_alpha(m);
  for (Eigen::Index j = 0; j < m; ++j)
    ln_alpha[j] = alpha[j] > 0.0 ? std::log(alpha[j]) : -kInf;

  PartitionMatrix out{Eigen::MatrixXd(n, m)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double hi = -kInf;
    Eigen::ArrayXd logits(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      double l = ln_alpha[j];
      if (beta > 0.0) {
        const double e = energies_nats(i, j);
        l = (e == kInf) ? -kInf : l - beta * e;
      }
      if (extra_nats != nullptr && l != -kInf)
        l += (*extra_nats)(i, j);
      if (std::isnan(l))
        l = -kInf;
      logits[j] = l;
      hi = std::max(hi, l);
    }
    if (hi == -kInf)
      throw error(errc::numeric_underflow,
                  "all group weights vanished for state " + std::to_string(i),
                  i);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double w = logits[j] == -kInf ? 0.0 : std::exp(logits[j] - hi);
      out.psi(i, j) = w;
      sum += w;
    }
    out.psi.row(i) /= sum;
  }
  return out;
}

double lagrangian_bits(const Eigen::VectorXd& gamma, const PartitionMatrix& psi,
                       const Eigen::VectorXd& alpha,
                       const Eigen::MatrixXd& energies_nats, double beta) {
  double energy = 0.0;
  for (Eigen::Index i = 0; i < psi.n(); ++i)
    for (Eigen::Index j = 0; j < psi.m(); ++j) {
      const double w = gamma[i] * psi.psi(i, j);
      if (w <= 0.0)
        continue;
      const double e = energies_nats(i, j);
      if (e == kInf)
        return kInf;
      energy += w * e;
    }
  energy /= kLn2;
  if (beta == 0.0)
    return energy;
  double info = 0.0;
  for (Eigen::Index i = 0; i < psi.n(); ++i)
    for (Eigen::Index j = 0; j < psi.m(); ++j) {
      const double v = psi.psi(i, j);
      if (v > 0.0 && gamma[i] > 0.0 && alpha[j] > 0.0)
        info += gamma[i] * v * std::log2(v / alpha[j]);
    }
  return energy + info / beta;
}

} // namespace detail

namespace {

void check_config(const OptimizerConfig& c) {
  if (c.beta < 0.0 || c.max_iters < 1 || c.psi_tol <= 0.0 || c.psi_tol >= 1.0 ||
      c.support_floor < 0.0 || c.support_floor > 1e-12)
    throw error(errc::invalid_distribution, "bad optimizer configuration");
}

Eigen::VectorXd marginals_checked(const Eigen::VectorXd& gamma,
                                  const PartitionMatrix& psi) {
  Eigen::VectorXd alpha = group_marginals(gamma, psi);
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    // below ~1e-300 the inverse overflows and poisons tau with NaNs, so a
    // numerically starved group counts as empty
    if (alpha[j] <= 1e-300)
      throw error(errc::empty_group,
                  "group " + std::to_string(j) + " has zero marginal mass", j);
  return alpha;
}

// kappa(q,j) = sum_i gamma_i eta(q,i) psi(i,j) / alpha_j, with eta = pi^T
Eigen::MatrixXd kappa_from(const TransitionModel& model,
                           const PartitionMatrix& psi,
                           const Eigen::VectorXd& alpha) {
  Eigen::MatrixXd tau = model.gamma.asDiagonal() * psi.psi *
                        alpha.cwiseInverse().asDiagonal();
  return model.pi.transpose() * tau;
}

} // namespace

PartitionMatrix init_update(const TransitionModel& model,
                            const PartitionMatrix& psi0,
                            const OptimizerConfig& config) {
  check_config(config);
  check_partition(psi0, 1e-9);
  const Eigen::VectorXd alpha = marginals_checked(model.gamma, psi0);
  const JointWeightMatrix theta = build_joint_weights(model, psi0);
  const Eigen::MatrixXd e = detail::divergence_energies_nats(
      model.pi, theta.theta.transpose(), config.support_floor);
  return detail::gibbs_rows(alpha, e, config.beta);
}

OptimizerState make_state(const TransitionModel& model,
                          const PartitionMatrix& psi,
                          const OptimizerConfig& config) {
  OptimizerState st;
  st.psi = psi;
  st.alpha = marginals_checked(model.gamma, psi);
  st.relevance = build_relevance(model, psi);
  st.theta = JointWeightMatrix{st.relevance.kappa.transpose()};
  const Eigen::MatrixXd e = detail::divergence_energies_nats(
      model.pi, st.relevance.kappa, config.support_floor);
  st.objective_trace.push_back(
      detail::lagrangian_bits(model.gamma, psi, st.alpha, e, config.beta));
  st.delta_trace.push_back(0.0);
  return st;
}

OptimizerState ib_update(const TransitionModel& model,
                         const OptimizerState& state,
                         const OptimizerConfig& config) {
  check_config(config);
  const Eigen::VectorXd alpha = marginals_checked(model.gamma, state.psi);
  const Eigen::MatrixXd kappa = kappa_from(model, state.psi, alpha);
  const Eigen::MatrixXd e =
      detail::divergence_energies_nats(model.pi, kappa, config.support_floor);
  PartitionMatrix next = detail::gibbs_rows(alpha, e, config.beta);
  const double delta =
      (next.psi - state.psi.psi).array().abs().maxCoeff();

  OptimizerState out = make_state(model, next, config);
  const double objective = out.objective_trace.front();
  out.iterations = state.iterations + 1;
  out.converged = delta < config.psi_tol;
  out.objective_trace = state.objective_trace;
  out.objective_trace.push_back(objective);
  out.delta_trace = state.delta_trace;
  out.delta_trace.push_back(delta);
  return out;
}

double evaluate_objective(const TransitionModel& model,
                          const PartitionMatrix& psi, double beta) {
  const Eigen::VectorXd alpha = marginals_checked(model.gamma, psi);
  const Eigen::MatrixXd kappa = kappa_from(model, psi, alpha);
  const Eigen::MatrixXd e =
      detail::divergence_energies_nats(model.pi, kappa, 1e-300);
  return detail::lagrangian_bits(model.gamma, psi, alpha, e, beta);
}

OptimizerState run_fixed_point(const TransitionModel& model,
                               const PartitionMatrix& psi0,
                               const OptimizerConfig& config) {
  check_config(config);
  check_partition(psi0, 1e-9);

  PartitionMatrix psi = psi0;
  std::vector<double> objective_trace, delta_trace;
  double delta = std::numeric_limits<double>::infinity();
  int k = 0;
  bool converged = false;
  const Eigen::VectorXd negent = detail::row_negentropy_nats(model.pi);

  while (true) {
    const Eigen::VectorXd alpha = marginals_checked(model.gamma, psi);
    const Eigen::MatrixXd kappa = kappa_from(model, psi, alpha);
    const Eigen::MatrixXd e = detail::divergence_energies_nats(
        model.pi, kappa, config.support_floor, negent);
    objective_trace.push_back(
        detail::lagrangian_bits(model.gamma, psi, alpha, e, config.beta));
    delta_trace.push_back(k == 0 ? 0.0 : delta);
    if (delta < config.psi_tol) {
      converged = true;
      break;
    }
    if (k >= config.max_iters)
      break;
    PartitionMatrix next = detail::gibbs_rows(alpha, e, config.beta);
    delta = (next.psi - psi.psi).array().abs().maxCoeff();
    psi = std::move(next);
    ++k;
  }

  OptimizerState st = make_state(model, psi, config);
  st.iterations = k;
  st.converged = converged;
  st.objective_trace = std::move(objective_trace);
  st.delta_trace = std::move(delta_trace);
  return st;
}

} // namespace mcagg
