#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace mcagg {

// Deterministic random helpers. std::mt19937_64 has a portable bit stream,
// but the std distributions do not, so the few draws we need are built
// directly on the raw generator. Same seed, same chain, on any platform.
class rng {
public:
  explicit rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  double exponential() {
    double u;
    do {
      u = uniform01();
    } while (u <= 0.0);
    return -std::log(u);
  }

  // symmetric Dirichlet(1): normalized i.i.d. exponentials
  Eigen::VectorXd dirichlet(Eigen::Index k) {
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i)
      v[i] = exponential();
    v /= v.sum();
    return v;
  }

private:
  std::mt19937_64 gen_;
};

// Stateless mix used to derive independent sub-seeds (per trial, per probe)
// from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace mcagg
