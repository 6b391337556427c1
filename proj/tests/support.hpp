#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here recomputes expected values by direct transcription or enumeration,
// never by calling the code path under test.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mcagg/aggregation.hpp"
#include "mcagg/markov.hpp"
#include "mcagg/rng.hpp"

namespace testsup {

// dense random chain: Dirichlet(1) rows, strictly positive
inline mcagg::TransitionModel random_chain(Eigen::Index n, std::uint64_t seed) {
  mcagg::rng r(seed);
  Eigen::MatrixXd pi(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    pi.row(i) = r.dirichlet(n).transpose();
  return mcagg::make_model(pi);
}

// decoupled blocks whose member states share one row each: aggregating to
// the blocks loses nothing, so the block partition has zero divergence
inline mcagg::TransitionModel
lumpable_block_chain(const std::vector<int>& sizes, std::uint64_t seed) {
  mcagg::rng r(seed);
  Eigen::Index n = 0;
  for (int s : sizes)
    n += s;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index offset = 0;
  for (int s : sizes) {
    const Eigen::VectorXd row = r.dirichlet(s);
    for (Eigen::Index i = 0; i < s; ++i)
      pi.row(offset + i).segment(offset, s) = row.transpose();
    offset += s;
  }
  return mcagg::make_model(pi);
}

// hard partition matrix from labels
inline mcagg::PartitionMatrix hard_partition(const std::vector<int>& labels,
                                             int m) {
  Eigen::MatrixXd psi =
      Eigen::MatrixXd::Zero(Eigen::Index(labels.size()), m);
  for (std::size_t i = 0; i < labels.size(); ++i)
    psi(Eigen::Index(i), labels[i]) = 1.0;
  return {psi};
}

// random soft partition (Dirichlet rows)
inline mcagg::PartitionMatrix random_partition(Eigen::Index n, Eigen::Index m,
                                               std::uint64_t seed) {
  mcagg::rng r(seed);
  Eigen::MatrixXd psi(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    psi.row(i) = r.dirichlet(m).transpose();
  return {psi};
}

// scalar KL in bits by direct summation
inline double kl_bits(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0)
      acc += p[i] * std::log2(p[i] / q[i]);
  return acc;
}

// all assignments of n states to exactly two non-empty unordered groups
inline std::vector<std::vector<int>> bipartitions(int n) {
  std::vector<std::vector<int>> out;
  for (unsigned mask = 1; mask < (1u << (n - 1)); ++mask) {
    // state n-1 pinned to group 0 to kill the label swap
    std::vector<int> labels(std::size_t(n), 0);
    bool any = false;
    for (int i = 0; i < n - 1; ++i)
      if (mask & (1u << i)) {
        labels[std::size_t(i)] = 1;
        any = true;
      }
    if (any)
      out.push_back(std::move(labels));
  }
  return out;
}

// multinomial draw via sequential binomials (test-only; std distributions
// are fine here)
inline Eigen::VectorXd multinomial_fractions(const Eigen::VectorXd& p,
                                             long long count,
                                             std::mt19937_64& gen) {
  const Eigen::Index k = p.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  long long remaining = count;
  double mass = 1.0;
  for (Eigen::Index i = 0; i < k && remaining > 0; ++i) {
    if (i == k - 1) {
      out[i] = double(remaining);
      remaining = 0;
      break;
    }
    const double pr = mass > 0.0 ? std::min(1.0, std::max(0.0, p[i] / mass)) : 0.0;
    std::binomial_distribution<long long> bin(remaining, pr);
    const long long c = bin(gen);
    out[i] = double(c);
    remaining -= c;
    mass -= p[i];
  }
  return out / double(count);
}

} // namespace testsup
