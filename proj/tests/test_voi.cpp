#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mcagg/voi.hpp"
#include "support.hpp"

using namespace mcagg;

namespace {

// Literal transcription of the k = 0 update: psi(i,j) proportional to
// alpha_j exp(-beta sum_r pi(i,r) ln(pi(i,r)/theta(j,r))).
Eigen::MatrixXd naive_init_update(const TransitionModel& m,
                                  const Eigen::MatrixXd& psi0, double beta) {
  const Eigen::Index n = psi0.rows(), groups = psi0.cols();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(groups);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < groups; ++j)
      alpha[j] += m.gamma[i] * psi0(i, j);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(groups, n);
  for (Eigen::Index j = 0; j < groups; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      theta.row(j) += m.gamma[i] * psi0(i, j) / alpha[j] * m.pi.row(i);
  Eigen::MatrixXd out(n, groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm = 0.0;
    for (Eigen::Index j = 0; j < groups; ++j) {
      double energy = 0.0;
      for (Eigen::Index r = 0; r < n; ++r)
        if (m.pi(i, r) > 0.0)
          energy += m.pi(i, r) * std::log(m.pi(i, r) / theta(j, r));
      out(i, j) = alpha[j] * std::exp(-beta * energy);
      norm += out(i, j);
    }
    out.row(i) /= norm;
  }
  return out;
}

// Literal transcription of the k > 0 update with eta(q,i) = pi(i,q).
Eigen::MatrixXd naive_ib_update(const TransitionModel& m,
                                const Eigen::MatrixXd& psi, double beta) {
  const Eigen::Index n = psi.rows(), groups = psi.cols();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(groups);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < groups; ++j)
      alpha[j] += m.gamma[i] * psi(i, j);
  Eigen::MatrixXd kappa = Eigen::MatrixXd::Zero(n, groups);
  for (Eigen::Index q = 0; q < n; ++q)
    for (Eigen::Index j = 0; j < groups; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        kappa(q, j) += m.gamma[i] * m.pi(i, q) * psi(i, j) / alpha[j];
  Eigen::MatrixXd out(n, groups);
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm = 0.0;
    for (Eigen::Index j = 0; j < groups; ++j) {
      double energy = 0.0;
      for (Eigen::Index q = 0; q < n; ++q)
        if (m.pi(i, q) > 0.0)
          energy += m.pi(i, q) * std::log(m.pi(i, q) / kappa(q, j));
      out(i, j) = alpha[j] * std::exp(-beta * energy);
      norm += out(i, j);
    }
    out.row(i) /= norm;
  }
  return out;
}

} // namespace

TEST_CASE("init_update at beta 0 reproduces the prior") {
  const TransitionModel m = testsup::random_chain(5, 7);
  const PartitionMatrix psi0 = testsup::random_partition(5, 3, 8);
  OptimizerConfig cfg;
  cfg.beta = 0.0;
  const PartitionMatrix next = init_update(m, psi0, cfg);
  const Eigen::VectorXd alpha = group_marginals(m.gamma, psi0);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK((next.psi.row(i).transpose() - alpha).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("init_update at large beta snaps to the nearest theta row") {
  const TransitionModel m = testsup::lumpable_block_chain({2, 2}, 17);
  const PartitionMatrix psi0 = testsup::hard_partition({0, 0, 1, 1}, 2);
  OptimizerConfig cfg;
  cfg.beta = 1e6;
  const PartitionMatrix next = init_update(m, psi0, cfg);
  CHECK(next.psi(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(next.psi(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(next.psi(2, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(next.psi(3, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("init_update matches the formula transcription") {
  Eigen::MatrixXd pi(2, 2);
  pi << 0.8, 0.2, 0.3, 0.7;
  const TransitionModel m = make_model(pi);
  OptimizerConfig cfg;
  cfg.beta = 1.0;
  const PartitionMatrix got =
      init_update(m, PartitionMatrix::identity(2), cfg);
  const Eigen::MatrixXd expected =
      naive_init_update(m, Eigen::MatrixXd::Identity(2, 2), 1.0);
  CHECK((got.psi - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("ib_update at beta 0 degenerates to the marginals") {
  const TransitionModel m = testsup::random_chain(4, 23);
  const PartitionMatrix psi0 = testsup::random_partition(4, 2, 24);
  OptimizerConfig cfg;
  cfg.beta = 0.0;
  const OptimizerState st = make_state(m, psi0, cfg);
  const OptimizerState next = ib_update(m, st, cfg);
  const Eigen::VectorXd alpha = group_marginals(m.gamma, psi0);
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK((next.psi.psi.row(i).transpose() - alpha).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("block partitions of decoupled chains are fixed points") {
  const TransitionModel m = testsup::lumpable_block_chain({3, 2}, 29);
  const PartitionMatrix block = testsup::hard_partition({0, 0, 0, 1, 1}, 2);
  OptimizerConfig cfg;
  cfg.beta = 50.0;
  const OptimizerState st = make_state(m, block, cfg);
  const OptimizerState next = ib_update(m, st, cfg);
  CHECK((next.psi.psi - block.psi).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ib_update matches the formula transcription") {
  const TransitionModel m = testsup::random_chain(3, 31);
  const PartitionMatrix psi = testsup::random_partition(3, 2, 32);
  OptimizerConfig cfg;
  cfg.beta = 5.0;
  const OptimizerState st = make_state(m, psi, cfg);
  const OptimizerState next = ib_update(m, st, cfg);
  const Eigen::MatrixXd expected = naive_ib_update(m, psi.psi, 5.0);
  CHECK((next.psi.psi - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("evaluate_objective closed forms") {
  const TransitionModel m = testsup::random_chain(4, 37);

  // identity partition: zero divergence, objective is the information term
  const double beta = 2.5;
  const double obj = evaluate_objective(m, PartitionMatrix::identity(4), beta);
  const double info =
      partition_information(m.gamma, PartitionMatrix::identity(4));
  CHECK(obj == doctest::Approx(info / beta).epsilon(1e-12));

  // single group: no information term, pure distortion
  const PartitionMatrix ones = PartitionMatrix::ones(4);
  const double d = expected_divergence(m, ones, build_joint_weights(m, ones));
  CHECK(evaluate_objective(m, ones, beta) == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("evaluate_objective equals term-by-term summation") {
  const TransitionModel m = testsup::random_chain(4, 41);
  const PartitionMatrix psi = testsup::random_partition(4, 2, 42);
  const double beta = 3.0;

  const RelevanceModel rel = build_relevance(m, psi);
  double energy = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) {
      double kl = 0.0;
      for (int q = 0; q < 4; ++q)
        if (rel.eta(q, i) > 0.0)
          kl += rel.eta(q, i) * std::log2(rel.eta(q, i) / rel.kappa(q, j));
      energy += m.gamma[i] * psi.psi(i, j) * kl;
    }
  const double expected = energy + partition_information(m.gamma, psi) / beta;
  CHECK(evaluate_objective(m, psi, beta) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("run_fixed_point converges instantly on decoupled blocks") {
  const TransitionModel m = testsup::lumpable_block_chain({2, 3}, 43);
  const PartitionMatrix block = testsup::hard_partition({0, 0, 1, 1, 1}, 2);
  for (double beta : {0.5, 5.0, 500.0}) {
    OptimizerConfig cfg;
    cfg.beta = beta;
    const OptimizerState st = run_fixed_point(m, block, cfg);
    CHECK(st.converged);
    CHECK(st.iterations <= 2);
    CHECK((st.psi.psi - block.psi).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("run_fixed_point at beta 0 reaches the degenerate solution") {
  const TransitionModel m = testsup::random_chain(5, 47);
  OptimizerConfig cfg;
  cfg.beta = 0.0;
  const OptimizerState st =
      run_fixed_point(m, testsup::random_partition(5, 2, 48), cfg);
  CHECK(st.converged);
  CHECK(st.iterations <= 3);
  // every row equals the group marginals: zero information retained
  CHECK(partition_information(m.gamma, st.psi) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("objective trace is non-increasing") {
  mcagg::rng seeds(51);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 3 + Eigen::Index(seeds.raw() % 6);
    const Eigen::Index groups = 1 + Eigen::Index(seeds.raw() % std::uint64_t(n));
    const TransitionModel m = testsup::random_chain(n, seeds.raw());
    const PartitionMatrix psi0 =
        testsup::random_partition(n, groups, seeds.raw());
    OptimizerConfig cfg;
    cfg.beta = std::exp(seeds.uniform(std::log(0.1), std::log(100.0)));
    const OptimizerState st = run_fixed_point(m, psi0, cfg);
    for (std::size_t k = 1; k < st.objective_trace.size(); ++k)
      CHECK(st.objective_trace[k] <= st.objective_trace[k - 1] + 1e-9);
  }
}

TEST_CASE("updates preserve row stochasticity") {
  const TransitionModel m = testsup::random_chain(6, 53);
  PartitionMatrix psi = testsup::random_partition(6, 3, 54);
  OptimizerConfig cfg;
  cfg.beta = 4.0;
  OptimizerState st = make_state(m, psi, cfg);
  for (int k = 0; k < 20; ++k) {
    st = ib_update(m, st, cfg);
    for (Eigen::Index i = 0; i < 6; ++i)
      CHECK(std::abs(st.psi.psi.row(i).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("converged states are Gibbs self-consistent") {
  const TransitionModel m = testsup::random_chain(5, 59);
  OptimizerConfig cfg;
  cfg.beta = 8.0;
  const OptimizerState st =
      run_fixed_point(m, testsup::random_partition(5, 2, 60), cfg);
  REQUIRE(st.converged);
  const Eigen::MatrixXd again = naive_ib_update(m, st.psi.psi, cfg.beta);
  CHECK((again - st.psi.psi).cwiseAbs().maxCoeff() < cfg.psi_tol * 10.0);
}

TEST_CASE("converged information is non-decreasing in beta") {
  const TransitionModel m = testsup::random_chain(5, 61);
  const PartitionMatrix psi0 = testsup::random_partition(5, 3, 62);
  double prev = -1.0;
  double beta = 0.2;
  for (int k = 0; k < 10; ++k, beta *= 2.0) {
    OptimizerConfig cfg;
    cfg.beta = beta;
    const OptimizerState st = run_fixed_point(m, psi0, cfg);
    const double info = partition_information(m.gamma, st.psi);
    CHECK(info >= prev - 1e-6);
    prev = info;
  }
}

TEST_CASE("column permutation of the start permutes the solution") {
  const TransitionModel m = testsup::random_chain(5, 67);
  const PartitionMatrix psi0 = testsup::random_partition(5, 3, 68);
  PartitionMatrix perm0{Eigen::MatrixXd(5, 3)};
  const int order[3] = {1, 2, 0};
  for (int j = 0; j < 3; ++j)
    perm0.psi.col(order[j]) = psi0.psi.col(j);

  OptimizerConfig cfg;
  cfg.beta = 6.0;
  const OptimizerState a = run_fixed_point(m, psi0, cfg);
  const OptimizerState b = run_fixed_point(m, perm0, cfg);
  for (int j = 0; j < 3; ++j)
    CHECK((a.psi.psi.col(j) - b.psi.psi.col(order[j])).cwiseAbs().maxCoeff() <
          1e-7);
}

TEST_CASE("unconverged runs are returned flagged") {
  const TransitionModel m = testsup::random_chain(6, 71);
  OptimizerConfig cfg;
  cfg.beta = 5.0;
  cfg.max_iters = 1;
  cfg.psi_tol = 1e-15;
  const OptimizerState st =
      run_fixed_point(m, testsup::random_partition(6, 3, 72), cfg);
  CHECK_FALSE(st.converged);
  CHECK(st.iterations == 1);
  CHECK(st.objective_trace.size() == 2);
}
