#include <chrono>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcagg/annealing.hpp"
#include "mcagg/correction.hpp"
#include "mcagg/io.hpp"
#include "mcagg/markov.hpp"
#include "mcagg/rng.hpp"
#include "mcagg/voi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoConvergence = 3;

bool is_input_error(mcagg::errc c) {
  return c != mcagg::errc::no_convergence;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

json optimizer_to_json(const mcagg::OptimizerConfig& c) {
  return {{"max_iters", c.max_iters},
          {"psi_tol", c.psi_tol},
          {"support_floor", c.support_floor}};
}

mcagg::OptimizerConfig optimizer_from_json(const json& j) {
  mcagg::OptimizerConfig c;
  c.max_iters = j.value("max_iters", c.max_iters);
  c.psi_tol = j.value("psi_tol", c.psi_tol);
  c.support_floor = j.value("support_floor", c.support_floor);
  return c;
}

json anneal_to_json(const mcagg::AnnealConfig& c) {
  return {{"beta_min", c.beta_min},
          {"beta_max", c.beta_max},
          {"beta_factor", c.beta_factor},
          {"split_perturbation", c.split_perturbation},
          {"split_persistence_tol", c.split_persistence_tol},
          {"max_groups", c.max_groups},
          {"trials_per_split", c.trials_per_split},
          {"seed", c.seed}};
}

mcagg::AnnealConfig anneal_from_json(const json& j) {
  mcagg::AnnealConfig c;
  c.beta_min = j.value("beta_min", c.beta_min);
  c.beta_max = j.value("beta_max", c.beta_max);
  c.beta_factor = j.value("beta_factor", c.beta_factor);
  c.split_perturbation = j.value("split_perturbation", c.split_perturbation);
  c.split_persistence_tol =
      j.value("split_persistence_tol", c.split_persistence_tol);
  c.max_groups = j.value("max_groups", c.max_groups);
  c.trials_per_split = j.value("trials_per_split", c.trials_per_split);
  c.seed = j.value("seed", c.seed);
  return c;
}

json correction_to_json(const mcagg::CorrectionConfig& c) {
  return {{"g_max", c.g_max},
          {"sample_count", c.sample_count},
          {"rho_as_tau", c.rho_as_tau},
          {"beta_scaled_init_correction", c.beta_scaled_init_correction}};
}

mcagg::CorrectionConfig correction_from_json(const json& j) {
  mcagg::CorrectionConfig c;
  c.g_max = j.value("g_max", c.g_max);
  c.sample_count = j.value("sample_count", c.sample_count);
  c.rho_as_tau = j.value("rho_as_tau", c.rho_as_tau);
  c.beta_scaled_init_correction =
      j.value("beta_scaled_init_correction", c.beta_scaled_init_correction);
  return c;
}

struct GenerateArgs {
  std::vector<int> blocks;
  int states = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string out = "chain.csv";
};

int cmd_generate(const GenerateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  mcagg::NcdSpec spec;
  spec.block_sizes = a.blocks;
  if (spec.block_sizes.empty()) {
    if (a.states <= 0) {
      std::cerr << "error: provide --blocks or --states\n";
      return kExitInput;
    }
    spec.block_sizes = {a.states};
  }
  if (a.states > 0 && spec.n() != a.states) {
    std::cerr << "error: --states " << a.states
              << " does not match the sum of --blocks (" << spec.n() << ")\n";
    return kExitInput;
  }
  spec.epsilon = a.epsilon;
  spec.seed = a.seed;

  const mcagg::TransitionModel model = mcagg::generate_ncd(spec);
  if (const fs::path dir = fs::path(a.out).parent_path(); !dir.empty())
    fs::create_directories(dir);
  mcagg::io::write_chain(a.out, model, spec);

  mcagg::io::RunManifest man;
  man.command = "generate";
  man.inputs = json::object();
  man.outputs = {{"chain", a.out},
                 {"sidecar", mcagg::io::sidecar_path(a.out)}};
  man.configs = {{"spec",
                  {{"block_sizes", spec.block_sizes},
                   {"epsilon", spec.epsilon},
                   {"seed", spec.seed}}}};
  man.duration_seconds = seconds_since(t0);
  const std::string man_path =
      mcagg::io::sidecar_path(a.out).substr(
          0, mcagg::io::sidecar_path(a.out).size() - 5) +
      ".manifest.json";
  mcagg::io::write_manifest(man_path, man);

  std::cout << "wrote " << a.out << " (" << model.n() << " states)\n";
  std::cout << "gamma =";
  for (Eigen::Index i = 0; i < model.gamma.size(); ++i)
    std::cout << ' ' << mcagg::io::format_double(model.gamma[i]);
  std::cout << '\n';
  return kExitOk;
}

struct AggregateArgs {
  std::string input;
  int groups = 1;
  double beta = 1.0;
  std::uint64_t seed = 0;
  int max_iters = 2000;
  double tol = 1e-9;
  bool corrected = false;
  int g_max = 2;
  std::int64_t sample_count = 0;
  bool rho_as_tau = true;
  bool beta_scaled_init = false;
  std::string out;
};

int cmd_aggregate(const AggregateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const mcagg::io::ChainFile chain = mcagg::io::load_chain(a.input);
  const Eigen::Index n = chain.model.n();
  if (a.groups < 1 || a.groups > n) {
    std::cerr << "error: --groups must lie in [1, " << n << "]\n";
    return kExitInput;
  }

  // seeded random soft partition as the starting point
  mcagg::rng r(a.seed);
  mcagg::PartitionMatrix psi0{Eigen::MatrixXd(n, a.groups)};
  for (Eigen::Index i = 0; i < n; ++i)
    psi0.psi.row(i) = r.dirichlet(a.groups).transpose();

  mcagg::OptimizerConfig ocfg;
  ocfg.beta = a.beta;
  ocfg.max_iters = a.max_iters;
  ocfg.psi_tol = a.tol;

  mcagg::OptimizerState st;
  mcagg::CorrectionConfig ccfg;
  if (a.corrected) {
    ccfg.g_max = a.g_max;
    ccfg.sample_count = a.sample_count > 0
                            ? a.sample_count
                            : std::int64_t(mcagg::default_sample_count(n));
    ccfg.rho_as_tau = a.rho_as_tau;
    ccfg.beta_scaled_init_correction = a.beta_scaled_init;
    const mcagg::ErrorModel em =
        mcagg::multinomial_error_model(chain.model, double(ccfg.sample_count));
    st = mcagg::run_corrected_fixed_point(chain.model, psi0, ocfg, ccfg, em);
  } else {
    st = mcagg::run_fixed_point(chain.model, psi0, ocfg);
  }

  mcagg::io::ResultBundle bundle;
  bundle.m = a.groups;
  bundle.beta = a.beta;
  bundle.psi = st.psi;
  bundle.theta = st.theta;
  bundle.phi = mcagg::build_reduced(st.theta, st.psi, chain.model.gamma);
  bundle.divergence_bits =
      mcagg::expected_divergence(chain.model, st.psi, st.theta);
  bundle.information_bits = mcagg::relevance_information(st.relevance);
  bundle.converged = st.converged;

  const std::string stem = a.out.empty()
                               ? (fs::path(a.input).stem().string() + "_m" +
                                  std::to_string(a.groups))
                               : fs::path(a.out).stem().string();
  const fs::path dir = a.out.empty() ? fs::path(a.input).parent_path()
                                     : fs::path(a.out).parent_path();
  if (!dir.empty())
    fs::create_directories(dir);
  const std::string bundle_path = (dir / (stem + "_bundle.json")).string();
  const std::string hard_path = (dir / (stem + "_hard.csv")).string();
  mcagg::io::write_text(bundle_path,
                        mcagg::io::bundle_to_json(bundle).dump(2) + "\n");
  {
    const Eigen::VectorXi labels = mcagg::harden(st.psi);
    std::string text;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      text += std::to_string(labels[i]) + "\n";
    mcagg::io::write_text(hard_path, text);
  }

  mcagg::io::RunManifest man;
  man.command = "aggregate";
  man.inputs = {{"chain", a.input}};
  man.outputs = {{"bundle", bundle_path}, {"hard", hard_path}};
  man.configs = {{"optimizer", optimizer_to_json(ocfg)},
                 {"beta", a.beta},
                 {"groups", a.groups},
                 {"seed", a.seed},
                 {"correction",
                  a.corrected ? correction_to_json(ccfg) : json(nullptr)}};
  man.duration_seconds = seconds_since(t0);
  mcagg::io::write_manifest((dir / (stem + ".manifest.json")).string(), man);

  std::cout << "m=" << bundle.m << " beta=" << bundle.beta
            << " divergence_bits=" << bundle.divergence_bits
            << " information_bits=" << bundle.information_bits
            << (st.converged ? "" : "  [not converged]") << '\n';
  return st.converged ? kExitOk : kExitNoConvergence;
}

struct SweepArgs {
  std::string input;
  mcagg::AnnealConfig anneal;
  int max_iters = 2000;
  double tol = 1e-9;
  bool raw = false;
  int g_max = 2;
  std::int64_t sample_count = 0;
  bool rho_as_tau = true;
  bool beta_scaled_init = false;
  int trials = 1;
  std::string out_dir = ".";
  std::string from_manifest;
};

struct SweepOutcome {
  mcagg::Hierarchy hierarchy;
  mcagg::Selection selection;
};

int cmd_sweep(SweepArgs a) {
  const auto t0 = std::chrono::steady_clock::now();

  if (!a.from_manifest.empty()) {
    const mcagg::io::RunManifest man = mcagg::io::read_manifest(a.from_manifest);
    if (man.command != "sweep") {
      std::cerr << "error: manifest is not a sweep manifest\n";
      return kExitInput;
    }
    a.input = man.inputs.at("chain").get<std::string>();
    a.anneal = anneal_from_json(man.configs.at("anneal"));
    const mcagg::OptimizerConfig oc =
        optimizer_from_json(man.configs.at("optimizer"));
    a.max_iters = oc.max_iters;
    a.tol = oc.psi_tol;
    a.raw = man.configs.at("correction").is_null();
    if (!a.raw) {
      const mcagg::CorrectionConfig cc =
          correction_from_json(man.configs.at("correction"));
      a.g_max = cc.g_max;
      a.sample_count = cc.sample_count;
      a.rho_as_tau = cc.rho_as_tau;
      a.beta_scaled_init = cc.beta_scaled_init_correction;
    }
    a.trials = man.configs.value("trials", 1);
    a.out_dir = man.configs.value("out_dir", a.out_dir);
  }

  const mcagg::io::ChainFile chain = mcagg::io::load_chain(a.input);

  mcagg::OptimizerConfig ocfg;
  ocfg.max_iters = a.max_iters;
  ocfg.psi_tol = a.tol;

  std::optional<mcagg::CorrectionConfig> ccfg;
  if (!a.raw) {
    mcagg::CorrectionConfig c;
    c.g_max = a.g_max;
    c.sample_count = a.sample_count;
    c.rho_as_tau = a.rho_as_tau;
    c.beta_scaled_init_correction = a.beta_scaled_init;
    ccfg = c;
  }

  fs::create_directories(a.out_dir);

  const auto run_trial = [&](int t) {
    mcagg::AnnealConfig cfg = a.anneal;
    cfg.seed = a.trials == 1 ? a.anneal.seed
                             : mcagg::mix_seed(a.anneal.seed, std::uint64_t(t));
    SweepOutcome out;
    out.hierarchy = mcagg::run_hierarchy(chain.model, cfg, ocfg, ccfg);
    out.selection = mcagg::select_group_count(out.hierarchy);
    return out;
  };

  std::vector<SweepOutcome> outcomes(std::size_t(a.trials));
  if (a.trials == 1) {
    outcomes[0] = run_trial(0);
  } else {
    std::vector<std::future<SweepOutcome>> futures;
    futures.reserve(std::size_t(a.trials));
    for (int t = 0; t < a.trials; ++t)
      futures.push_back(
          std::async(std::launch::async, [&run_trial, t] { return run_trial(t); }));
    for (int t = 0; t < a.trials; ++t)
      outcomes[std::size_t(t)] = futures[std::size_t(t)].get();
  }

  bool all_complete = true;
  json summary = json::array();
  std::string hier_path, curve_path;
  for (int t = 0; t < a.trials; ++t) {
    const std::string suffix = a.trials == 1 ? "" : "_t" + std::to_string(t);
    hier_path = (fs::path(a.out_dir) / ("hierarchy" + suffix + ".json")).string();
    curve_path = (fs::path(a.out_dir) / ("curve" + suffix + ".csv")).string();
    mcagg::io::write_hierarchy(hier_path, outcomes[std::size_t(t)].hierarchy);
    mcagg::io::write_curve_csv(curve_path, outcomes[std::size_t(t)].hierarchy);
    all_complete =
        all_complete && outcomes[std::size_t(t)].hierarchy.complete;
    summary.push_back({{"trial", t},
                       {"m_star", outcomes[std::size_t(t)].selection.m_star},
                       {"levels",
                        outcomes[std::size_t(t)].hierarchy.levels.size()}});
  }
  if (a.trials > 1)
    mcagg::io::write_text(
        (fs::path(a.out_dir) / "summary.json").string(),
        json{{"trials", summary}}.dump(2) + "\n");

  mcagg::io::RunManifest man;
  man.command = "sweep";
  man.inputs = {{"chain", a.input}};
  man.outputs = {{"hierarchy", hier_path}, {"curve", curve_path}};
  man.configs = {{"optimizer", optimizer_to_json(ocfg)},
                 {"anneal", anneal_to_json(a.anneal)},
                 {"correction",
                  ccfg.has_value() ? correction_to_json(*ccfg) : json(nullptr)},
                 {"trials", a.trials},
                 {"out_dir", a.out_dir}};
  man.duration_seconds = seconds_since(t0);
  mcagg::io::write_manifest(
      (fs::path(a.out_dir) / "manifest.json").string(), man);

  for (int t = 0; t < a.trials; ++t)
    std::cout << "trial " << t << ": m_star="
              << outcomes[std::size_t(t)].selection.m_star << " levels="
              << outcomes[std::size_t(t)].hierarchy.levels.size()
              << (outcomes[std::size_t(t)].hierarchy.complete
                      ? ""
                      : "  [partial]")
              << '\n';
  return all_complete ? kExitOk : kExitNoConvergence;
}

struct SelectArgs {
  std::string input;
  std::string out;
};

int cmd_select(const SelectArgs& a) {
  const mcagg::Hierarchy h = mcagg::io::read_hierarchy(a.input);
  const mcagg::Selection sel = mcagg::select_group_count(h);
  const json j = mcagg::io::selection_to_json(sel);
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!a.out.empty())
    mcagg::io::write_text(a.out, text);
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov chain aggregation by annealed value-of-information"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand(
      "generate", "generate a nearly-completely-decomposable chain");
  generate->add_option("--blocks", gen.blocks,
                       "comma-separated block sizes, e.g. 2,2,2,3")
      ->delimiter(',');
  generate->add_option("--states", gen.states,
                       "state count (single block when --blocks is omitted)");
  generate->add_option("--epsilon", gen.epsilon, "coupling strength");
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_option("--out", gen.out, "output CSV path");

  AggregateArgs agg;
  CLI::App* aggregate =
      app.add_subcommand("aggregate", "fixed-beta aggregation to m groups");
  aggregate->add_option("input", agg.input, "chain CSV")->required();
  aggregate->add_option("--groups,-m", agg.groups, "group count")->required();
  aggregate->add_option("--beta", agg.beta, "Lagrange multiplier")->required();
  aggregate->add_option("--seed", agg.seed, "initial-partition seed");
  aggregate->add_option("--max-iters", agg.max_iters, "update cap");
  aggregate->add_option("--tol", agg.tol, "entrywise psi tolerance");
  aggregate->add_flag("--corrected", agg.corrected,
                      "use error-corrected updates");
  aggregate->add_option("--g-max", agg.g_max, "correction series order");
  aggregate->add_option("--sample-count", agg.sample_count,
                        "effective transition count (0 = default)");
  aggregate->add_flag("--rho-as-tau,!--rho-as-joint", agg.rho_as_tau,
                      "relevance correction weight reading");
  aggregate->add_flag("--beta-scaled-init-correction", agg.beta_scaled_init,
                      "scale the k=0 correction by beta");
  aggregate->add_option("--out", agg.out, "output bundle path stem");

  SweepArgs sw;
  CLI::App* sweep =
      app.add_subcommand("sweep", "anneal beta and build the hierarchy");
  sweep->add_option("input", sw.input, "chain CSV");
  sweep->add_option("--beta-min", sw.anneal.beta_min, "grid start (0 = 1/2n)");
  sweep->add_option("--beta-max", sw.anneal.beta_max, "grid end (0 = 10n)");
  sweep->add_option("--beta-factor", sw.anneal.beta_factor, "grid factor");
  sweep->add_option("--max-groups", sw.anneal.max_groups,
                    "group cap (0 = n)");
  sweep->add_option("--split-perturbation", sw.anneal.split_perturbation,
                    "probe perturbation scale");
  sweep->add_option("--split-tol", sw.anneal.split_persistence_tol,
                    "probe separation threshold");
  sweep->add_option("--trials-per-split", sw.anneal.trials_per_split,
                    "probe directions per group");
  sweep->add_option("--seed", sw.anneal.seed, "master seed");
  sweep->add_option("--max-iters", sw.max_iters, "update cap per solve");
  sweep->add_option("--tol", sw.tol, "entrywise psi tolerance");
  sweep->add_flag("--raw", sw.raw, "disable the error correction");
  sweep->add_option("--g-max", sw.g_max, "correction series order");
  sweep->add_option("--sample-count", sw.sample_count,
                    "effective transition count (0 = default)");
  sweep->add_flag("--rho-as-tau,!--rho-as-joint", sw.rho_as_tau,
                  "relevance correction weight reading");
  sweep->add_flag("--beta-scaled-init-correction", sw.beta_scaled_init,
                  "scale the k=0 correction by beta");
  sweep->add_option("--trials", sw.trials, "independent repetitions");
  sweep->add_option("--out-dir", sw.out_dir, "output directory");
  sweep->add_option("--from-manifest", sw.from_manifest,
                    "replay a recorded sweep manifest");

  SelectArgs selargs;
  CLI::App* select =
      app.add_subcommand("select", "pick the group count from a hierarchy");
  select->add_option("input", selargs.input, "hierarchy JSON")->required();
  select->add_option("--out", selargs.out, "selection report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (generate->parsed())
      return cmd_generate(gen);
    if (aggregate->parsed())
      return cmd_aggregate(agg);
    if (sweep->parsed()) {
      if (sw.input.empty() && sw.from_manifest.empty()) {
        std::cerr << "error: sweep needs a chain CSV or --from-manifest\n";
        return kExitInput;
      }
      return cmd_sweep(sw);
    }
    if (select->parsed())
      return cmd_select(selargs);
  } catch (const mcagg::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitInput : kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
