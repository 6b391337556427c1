#include "mcagg/annealing.hpp"

#include <algorithm>
#include <cmath>

namespace mcagg {

namespace {

constexpr double kDropTol = 1e-9;

bool recoverable(const error& e) {
  return e.code() == errc::empty_group || e.code() == errc::numeric_underflow;
}

OptimizerState solve_at(const TransitionModel& model,
                        const PartitionMatrix& start, double beta,
                        const OptimizerConfig& opt,
                        const CorrectionConfig* correction,
                        const ErrorModel* error_model) {
  OptimizerConfig cfg = opt;
  cfg.beta = beta;
  if (correction != nullptr && error_model != nullptr)
    return run_corrected_fixed_point(model, start, cfg, *correction,
                                     *error_model);
  return run_fixed_point(model, start, cfg);
}

// duplicate column `group`, halving its mass, then shift the halves apart by
// +/- delta*d_i with d_i uniform in [-1, 1]; row sums are untouched
PartitionMatrix duplicate_and_perturb(const PartitionMatrix& psi, int group,
                                      double delta, rng& r) {
  const Eigen::Index n = psi.n(), m = psi.m();
  PartitionMatrix out{Eigen::MatrixXd(n, m + 1)};
  out.psi.leftCols(m) = psi.psi;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double half = psi.psi(i, group) / 2.0;
    const double shift =
        std::clamp(delta * r.uniform(-1.0, 1.0), -half, half);
    out.psi(i, group) = half + shift;
    out.psi(i, m) = half - shift;
  }
  return out;
}

} // namespace

PhaseProbe detect_phase_change(const TransitionModel& model,
                               const PartitionMatrix& psi, double beta,
                               const AnnealConfig& anneal,
                               const OptimizerConfig& opt,
                               const CorrectionConfig* correction,
                               const ErrorModel* error_model, rng& r) {
  PhaseProbe best;
  const Eigen::Index m = psi.m();
  const double f_pre = evaluate_objective(model, psi, beta);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (int t = 0; t < anneal.trials_per_split; ++t) {
      PartitionMatrix probe =
          duplicate_and_perturb(psi, int(j), anneal.split_perturbation, r);
      try {
        const OptimizerState st =
            solve_at(model, probe, beta, opt, correction, error_model);
        if (!st.converged)
          continue; // an oscillating probe is no evidence either way
        const JointWeightMatrix theta = build_joint_weights(model, st.psi);
        const double separation =
            (theta.theta.row(j) - theta.theta.row(m)).lpNorm<Eigen::Infinity>();
        if (separation <= anneal.split_persistence_tol)
          continue;
        const double drop = f_pre - evaluate_objective(model, st.psi, beta);
        if (drop > kDropTol && drop > best.objective_drop) {
          best.unstable = true;
          best.group = int(j);
          best.objective_drop = drop;
        }
      } catch (const error& e) {
        if (!recoverable(e))
          throw;
      }
    }
  }
  return best;
}

PartitionMatrix split_bootstrap(const PartitionMatrix& psi, int group, rng& r,
                                int max_groups) {
  const Eigen::Index n = psi.n(), m = psi.m();
  if (m >= max_groups)
    throw error(errc::group_cap_reached,
                "cannot split beyond " + std::to_string(max_groups) +
                    " groups",
                m);
  PartitionMatrix out{Eigen::MatrixXd(n, m + 1)};
  out.psi.leftCols(m) = psi.psi;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = r.uniform01();
    const double mass = psi.psi(i, group);
    out.psi(i, group) = mass * (1.0 - f);
    out.psi(i, m) = mass * f;
  }
  return out;
}

double compute_beta_star(const Eigen::VectorXd& gamma,
                         const PartitionMatrix& psi) {
  const double info = partition_information(gamma, psi);
  return std::exp2(info) / (2.0 * double(psi.n()));
}

namespace {

HierarchyLevel make_level(const TransitionModel& model,
                          const PartitionMatrix& psi, double beta_critical,
                          const CorrectionConfig* correction,
                          const ErrorModel* error_model) {
  HierarchyLevel lvl;
  lvl.beta_critical = beta_critical;
  lvl.m = int(psi.m());
  lvl.psi = psi;
  lvl.theta = build_joint_weights(model, psi);
  lvl.phi = build_reduced(lvl.theta, psi, model.gamma);
  lvl.divergence_bits = expected_divergence(model, psi, lvl.theta);
  lvl.information_bits = relevance_information(build_relevance(model, psi));
  lvl.beta_star = compute_beta_star(model.gamma, psi);
  if (correction != nullptr && error_model != nullptr) {
    lvl.correction = correction_report(model, psi, *correction, *error_model);
  } else {
    lvl.correction.raw_information_bits = lvl.information_bits;
    lvl.correction.corrected_information_bits = lvl.information_bits;
  }
  lvl.corrected_information_bits = lvl.correction.corrected_information_bits;
  return lvl;
}

} // namespace

Hierarchy run_hierarchy(const TransitionModel& model, const AnnealConfig& anneal,
                        const OptimizerConfig& opt,
                        const std::optional<CorrectionConfig>& correction) {
  const Eigen::Index n = model.n();
  const double beta_min =
      anneal.beta_min > 0.0 ? anneal.beta_min : 1.0 / (2.0 * double(n));
  const double beta_max =
      anneal.beta_max > 0.0 ? anneal.beta_max : 10.0 * double(n);
  const int max_groups = anneal.max_groups > 0 ? anneal.max_groups : int(n);
  if (beta_min >= beta_max || anneal.beta_factor <= 1.0 || max_groups > n ||
      max_groups < 1 || anneal.trials_per_split < 1)
    throw error(errc::invalid_distribution, "bad anneal configuration");

  CorrectionConfig ccfg;
  std::optional<ErrorModel> em;
  const CorrectionConfig* ccfg_ptr = nullptr;
  const ErrorModel* em_ptr = nullptr;
  if (correction.has_value()) {
    ccfg = *correction;
    if (ccfg.sample_count <= 0)
      ccfg.sample_count = std::int64_t(default_sample_count(n));
    em = multinomial_error_model(model, double(ccfg.sample_count));
    ccfg_ptr = &ccfg;
    em_ptr = &*em;
  }

  rng r(anneal.seed);
  Hierarchy h;
  PartitionMatrix psi = PartitionMatrix::ones(n);
  h.levels.push_back(make_level(model, psi, 0.0, ccfg_ptr, em_ptr));
  if (max_groups == 1)
    return h;

  for (double beta = beta_min; beta <= beta_max * (1.0 + 1e-12);
       beta *= anneal.beta_factor) {
    OptimizerState st;
    try {
      st = solve_at(model, psi, beta, opt, ccfg_ptr, em_ptr);
    } catch (const error& e) {
      // a grid point where the dynamics starve a group is skipped; the last
      // valid state and its recorded level stand
      if (!recoverable(e))
        throw;
      h.complete = false;
      continue;
    }
    if (!st.converged) {
      // oscillating high-beta solves are flagged and skipped so they never
      // contaminate the recorded levels
      h.complete = false;
      continue;
    }
    psi = st.psi;

    // the stage's snapshot follows the sweep: keep the level's critical beta
    // but refresh its converged state and functionals
    if (h.levels.back().m == int(psi.m())) {
      const double beta_critical = h.levels.back().beta_critical;
      h.levels.back() = make_level(model, psi, beta_critical, ccfg_ptr, em_ptr);
    }

    const PhaseProbe probe = detect_phase_change(
        model, psi, beta, anneal, opt, ccfg_ptr, em_ptr, r);
    if (probe.unstable) {
      const double f_pre = evaluate_objective(model, psi, beta);
      for (int t = 0; t < anneal.trials_per_split; ++t) {
        try {
          const PartitionMatrix cand =
              split_bootstrap(psi, probe.group, r, max_groups);
          const OptimizerState split_state =
              solve_at(model, cand, beta, opt, ccfg_ptr, em_ptr);
          if (evaluate_objective(model, split_state.psi, beta) <
              f_pre - kDropTol) {
            psi = split_state.psi;
            if (!split_state.converged)
              h.complete = false;
            h.levels.push_back(
                make_level(model, psi, beta, ccfg_ptr, em_ptr));
            break;
          }
        } catch (const error& e) {
          if (!recoverable(e))
            throw;
        }
      }
      if (psi.m() >= max_groups)
        break;
    }
  }
  return h;
}

Selection select_group_count(const Hierarchy& hierarchy) {
  if (hierarchy.levels.empty())
    throw error(errc::empty_hierarchy, "hierarchy has no levels");
  std::size_t best = 0;
  for (std::size_t i = 1; i < hierarchy.levels.size(); ++i)
    if (hierarchy.levels[i].corrected_information_bits >
        hierarchy.levels[best].corrected_information_bits)
      best = i;

  Selection sel;
  sel.m_star = hierarchy.levels[best].m;
  sel.level_index = best;
  sel.beta_critical = hierarchy.levels[best].beta_critical;
  sel.corrected_information_bits =
      hierarchy.levels[best].corrected_information_bits;
  sel.no_interior_max = (best + 1 == hierarchy.levels.size());
  for (const HierarchyLevel& lvl : hierarchy.levels) {
    if (lvl.beta_critical >= lvl.beta_star) {
      sel.beta_star_crossing_m = lvl.m;
      break;
    }
  }
  return sel;
}

} // namespace mcagg
