#include "mcagg/aggregation.hpp"

#include <cmath>
#include <limits>

namespace mcagg {

void check_partition(const PartitionMatrix& psi, double tol) {
  const Eigen::Index n = psi.n(), m = psi.m();
  if (m < 1 || m > n)
    throw error(errc::dimension_mismatch, "group count outside [1, n]", n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double v = psi.psi(i, j);
      if (!std::isfinite(v) || v < -tol || v > 1.0 + tol)
        throw error(errc::invalid_distribution,
                    "membership outside [0,1] at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")",
                    i, j, v);
    }
    const double s = psi.psi.row(i).sum();
    if (std::abs(s - 1.0) > tol)
      throw error(errc::row_sum_violation,
                  "partition row " + std::to_string(i) + " sums to " +
                      std::to_string(s),
                  i, -1, s);
  }
}

Eigen::VectorXd group_marginals(const Eigen::VectorXd& gamma,
                                const PartitionMatrix& psi) {
  return psi.psi.transpose() * gamma;
}

static void require_nonempty(const Eigen::VectorXd& alpha) {
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    // the subnormal floor keeps 1/alpha finite downstream
    if (alpha[j] <= 1e-300)
      throw error(errc::empty_group, "group " + std::to_string(j) +
                                         " has zero marginal mass",
                  j);
}

JointWeightMatrix build_joint_weights(const TransitionModel& model,
                                      const PartitionMatrix& psi) {
  const Eigen::VectorXd alpha = group_marginals(model.gamma, psi);
  require_nonempty(alpha);
  // U_{i,j} = gamma_i psi_{i,j} / alpha_j; each theta row is a convex
  // combination of pi rows, hence stochastic.
  Eigen::MatrixXd u = model.gamma.asDiagonal() * psi.psi;
  u = u * alpha.cwiseInverse().asDiagonal();
  return {u.transpose() * model.pi};
}

ReducedModel build_reduced(const JointWeightMatrix& theta,
                           const PartitionMatrix& psi,
                           const Eigen::VectorXd& gamma) {
  if (theta.theta.cols() != psi.n() || theta.theta.rows() != psi.m() ||
      gamma.size() != psi.n())
    throw error(errc::dimension_mismatch,
                "theta/psi/gamma shapes are inconsistent");
  ReducedModel red;
  red.phi = theta.theta * psi.psi;
  red.alpha = group_marginals(gamma, psi);
  return red;
}

double expected_divergence(const TransitionModel& model,
                           const PartitionMatrix& psi,
                           const JointWeightMatrix& theta) {
  const Eigen::Index n = psi.n(), m = psi.m();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double w = model.gamma[i] * psi.psi(i, j);
      if (w <= 0.0)
        continue;
      double kl = 0.0;
      for (Eigen::Index p = 0; p < n; ++p) {
        const double a = model.pi(i, p);
        if (a <= 0.0)
          continue;
        const double b = theta.theta(j, p);
        if (b <= 0.0)
          throw error(errc::infinite_divergence,
                      "support mismatch: pi(" + std::to_string(i) + "," +
                          std::to_string(p) + ") > 0 but theta(" +
                          std::to_string(j) + ",...) = 0",
                      i, j);
        kl += a * std::log2(a / b);
      }
      acc += w * kl;
    }
  }
  return acc;
}

double partition_information(const Eigen::VectorXd& gamma,
                             const PartitionMatrix& psi) {
  const Eigen::VectorXd alpha = group_marginals(gamma, psi);
  require_nonempty(alpha);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < psi.n(); ++i)
    for (Eigen::Index j = 0; j < psi.m(); ++j) {
      const double v = psi.psi(i, j);
      if (v > 0.0 && gamma[i] > 0.0)
        acc += gamma[i] * v * std::log2(v / alpha[j]);
    }
  return acc;
}

double constraint_information(const Eigen::VectorXd& gamma,
                              const PartitionMatrix& psi) {
  const Eigen::VectorXd alpha = group_marginals(gamma, psi);
  require_nonempty(alpha);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < psi.m(); ++j) {
    double inner = 0.0;
    for (Eigen::Index i = 0; i < psi.n(); ++i) {
      const double v = psi.psi(i, j);
      if (v > 0.0 && gamma[i] > 0.0)
        inner += v * std::log2(v / gamma[i]);
    }
    acc += alpha[j] * inner;
  }
  return acc;
}

RelevanceModel build_relevance(const TransitionModel& model,
                               const PartitionMatrix& psi) {
  RelevanceModel rel;
  const Eigen::VectorXd alpha = group_marginals(model.gamma, psi);
  require_nonempty(alpha);
  rel.eta = model.pi.transpose();          // eta(q,i) = pi(i,q)
  rel.omega = rel.eta * model.gamma;       // = gamma by stationarity
  rel.tau = model.gamma.asDiagonal() * psi.psi *
            alpha.cwiseInverse().asDiagonal();
  rel.kappa = rel.eta * rel.tau;           // kappa(q,j) = sum_i eta(q,i) tau(i,j)
  rel.rho = rel.kappa * alpha.asDiagonal();
  return rel;
}

double relevance_information(const RelevanceModel& rel) {
  double acc = 0.0;
  for (Eigen::Index q = 0; q < rel.rho.rows(); ++q)
    for (Eigen::Index j = 0; j < rel.rho.cols(); ++j) {
      const double r = rel.rho(q, j);
      if (r > 0.0 && rel.omega[q] > 0.0)
        acc += r * std::log2(rel.kappa(q, j) / rel.omega[q]);
    }
  return acc;
}

Eigen::VectorXi harden(const PartitionMatrix& psi) {
  Eigen::VectorXi labels(psi.n());
  for (Eigen::Index i = 0; i < psi.n(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < psi.m(); ++j)
      if (psi.psi(i, j) > psi.psi(i, best))
        best = j;
    labels[i] = int(best);
  }
  return labels;
}

} // namespace mcagg
