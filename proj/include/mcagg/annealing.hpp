#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mcagg/correction.hpp"
#include "mcagg/markov.hpp"
#include "mcagg/rng.hpp"
#include "mcagg/voi.hpp"

namespace mcagg {

struct AnnealConfig {
  double beta_min = 0.0;    // 0 -> 1/(2n), the m = 1 balance point
  double beta_max = 0.0;    // 0 -> 10 n
  double beta_factor = 1.05;
  double split_perturbation = 1e-3;
  // L-inf distance between the probe twins' theta rows above which a split
  // is considered genuine (identical-row duplicates give exactly 0).
  double split_persistence_tol = 1e-4;
  int max_groups = 0;       // 0 -> n
  int trials_per_split = 5; // random perturbation directions per group
  std::uint64_t seed = 0;
};

struct HierarchyLevel {
  double beta_critical = 0.0;
  int m = 1;
  PartitionMatrix psi;
  JointWeightMatrix theta;
  ReducedModel phi;
  double divergence_bits = 0.0;
  double information_bits = 0.0;
  double corrected_information_bits = 0.0;
  double beta_star = 0.0;
  CorrectionReport correction;
};

struct Hierarchy {
  std::vector<HierarchyLevel> levels;
  bool complete = true; // false when some solve hit max_iters
};

struct PhaseProbe {
  bool unstable = false;
  int group = -1;
  double objective_drop = 0.0;
};

// Stability probe for the current solution at beta: each group is duplicated,
// the twin columns are nudged apart along random zero-row-sum directions and
// re-converged. A group is unstable when the twins stay separated and the
// re-converged configuration strictly lowers the Lagrangian. Among unstable
// groups the one with the largest drop wins, ties to the lowest index.
PhaseProbe detect_phase_change(const TransitionModel& model,
                               const PartitionMatrix& psi, double beta,
                               const AnnealConfig& anneal,
                               const OptimizerConfig& opt,
                               const CorrectionConfig* correction,
                               const ErrorModel* error_model, rng& r);

// Splits column `group` into itself plus a new trailing column, dividing each
// state's responsibility by an independent uniform fraction.
PartitionMatrix split_bootstrap(const PartitionMatrix& psi, int group, rng& r,
                                int max_groups);

// beta* = 2^I / (2n) with I the partition information in bits.
double compute_beta_star(const Eigen::VectorXd& gamma,
                         const PartitionMatrix& psi);

// Multiplicative beta sweep from the all-ones partition: re-converge at every
// grid point, bootstrap a new group whenever the probe fires, and record one
// level per accepted split (plus the m = 1 root at beta = 0).
Hierarchy run_hierarchy(const TransitionModel& model,
                        const AnnealConfig& anneal, const OptimizerConfig& opt,
                        const std::optional<CorrectionConfig>& correction);

struct Selection {
  int m_star = 0;
  std::size_t level_index = 0;
  double beta_critical = 0.0;
  double corrected_information_bits = 0.0;
  int beta_star_crossing_m = -1; // first level with beta_critical >= beta*
  bool no_interior_max = false;  // argmax sits on the last level
};

// Level maximizing the corrected information, ties toward smaller m.
Selection select_group_count(const Hierarchy& hierarchy);

} // namespace mcagg
