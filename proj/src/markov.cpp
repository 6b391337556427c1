#include "mcagg/markov.hpp"

#include <cmath>
#include <limits>

#include "mcagg/rng.hpp"

namespace mcagg {

Eigen::MatrixXd validate_stochastic(const Eigen::MatrixXd& matrix,
                                    double tol) {
  if (matrix.rows() != matrix.cols())
    throw error(errc::non_square, "matrix is not square", matrix.rows(),
                matrix.cols());
  Eigen::MatrixXd out = matrix;
  const Eigen::Index n = out.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = out(i, j);
      if (!std::isfinite(v) || v < -tol)
        throw error(errc::negative_entry,
                    "negative entry at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")",
                    i, j, v);
      if (v < 0.0)
        out(i, j) = 0.0;
    }
    const double s = out.row(i).sum();
    if (std::abs(s - 1.0) > tol)
      throw error(errc::row_sum_violation,
                  "row " + std::to_string(i) + " sums to " + std::to_string(s),
                  i, -1, s);
  }
  return out;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& pi, double tol,
                                        int max_iters) {
  const Eigen::Index n = pi.rows();
  Eigen::VectorXd g = Eigen::VectorXd::Constant(n, 1.0 / double(n));
  const Eigen::MatrixXd pit = pi.transpose();
  for (int k = 0; k < max_iters; ++k) {
    Eigen::VectorXd next = pit * g;
    next /= next.sum();
    const double residual = (pit * next - next).lpNorm<Eigen::Infinity>();
    if (residual < tol)
      return next;
    g = std::move(next);
  }
  throw error(errc::no_convergence,
              "power iteration did not converge in " +
                  std::to_string(max_iters) + " iterations",
              max_iters);
}

TransitionModel make_model(const Eigen::MatrixXd& pi, double tol) {
  TransitionModel m;
  m.pi = validate_stochastic(pi, tol);
  m.gamma = stationary_distribution(m.pi);
  return m;
}

TransitionModel make_model_with_gamma(const Eigen::MatrixXd& pi,
                                      const Eigen::VectorXd& gamma,
                                      double tol) {
  TransitionModel m;
  m.pi = validate_stochastic(pi, tol);
  if (gamma.size() != m.pi.rows())
    throw error(errc::length_mismatch, "gamma length does not match matrix");
  if (std::abs(gamma.sum() - 1.0) > 1e-10 || gamma.minCoeff() < -1e-12)
    throw error(errc::invalid_distribution, "gamma is not a distribution");
  const double inv =
      (gamma.transpose() * m.pi - gamma.transpose()).lpNorm<Eigen::Infinity>();
  if (inv > 1e-10)
    throw error(errc::invalid_distribution,
                "gamma is not invariant under pi", -1, -1, inv);
  m.gamma = gamma;
  return m;
}

TransitionModel generate_ncd(const NcdSpec& spec) {
  const Eigen::Index n = spec.n();
  if (n <= 0)
    throw error(errc::invalid_distribution, "empty block list");
  for (int b : spec.block_sizes)
    if (b <= 0)
      throw error(errc::invalid_distribution, "non-positive block size");
  // Coupling must leave every row dominated by its own block; with the
  // proportional-removal recipe the moved fraction is at most epsilon, so
  // epsilon < 1/2 keeps the within-block mass strictly larger than the
  // off-block mass.
  if (spec.epsilon < 0.0 || spec.epsilon >= 0.5)
    throw error(errc::epsilon_too_large,
                "epsilon must lie in [0, 0.5) to keep blocks dominant", -1, -1,
                spec.epsilon);

  rng r(spec.seed);
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(n, n);

  // block-diagonal core
  Eigen::Index offset = 0;
  std::vector<Eigen::Index> block_of(n);
  std::vector<Eigen::Index> block_start, block_len;
  for (std::size_t b = 0; b < spec.block_sizes.size(); ++b) {
    const Eigen::Index len = spec.block_sizes[b];
    block_start.push_back(offset);
    block_len.push_back(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      block_of[offset + i] = Eigen::Index(b);
      pi.row(offset + i).segment(offset, len) = r.dirichlet(len).transpose();
    }
    offset += len;
  }

  // weak coupling: scale each row's block mass down by epsilon*u_i and
  // spread that mass over the off-block columns (zero row sum change)
  if (spec.epsilon > 0.0 && spec.block_sizes.size() > 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index b = block_of[i];
      const Eigen::Index start = block_start[b], len = block_len[b];
      const double moved = spec.epsilon * r.uniform(0.5, 1.0);
      pi.row(i).segment(start, len) *= (1.0 - moved);
      const Eigen::Index off = n - len;
      const Eigen::VectorXd w = r.dirichlet(off);
      Eigen::Index k = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j >= start && j < start + len)
          continue;
        pi(i, j) += moved * w[k++];
      }
    }
  }

  if (pi.minCoeff() < 0.0)
    throw error(errc::epsilon_too_large, "coupling produced a negative entry");

  TransitionModel m;
  m.pi = validate_stochastic(pi, 1e-12);
  m.gamma = stationary_distribution(m.pi);
  return m;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size())
    throw error(errc::length_mismatch, "distributions differ in length",
                p.size(), q.size());
  const double tol = 1e-9;
  if (std::abs(p.sum() - 1.0) > tol || p.minCoeff() < -1e-12)
    throw error(errc::invalid_distribution, "p is not a distribution");
  if (std::abs(q.sum() - 1.0) > tol || q.minCoeff() < -1e-12)
    throw error(errc::invalid_distribution, "q is not a distribution");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0)
      continue;
    if (q[i] <= 0.0)
      return std::numeric_limits<double>::infinity();
    acc += p[i] * std::log2(p[i] / q[i]);
  }
  return acc;
}

} // namespace mcagg
