#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "mcagg/annealing.hpp"
#include "mcagg/markov.hpp"

namespace mcagg::io {

inline constexpr const char* kToolVersion = "mcagg 0.1.0";

// 17-significant-digit decimal form; round-trips doubles exactly.
std::string format_double(double v);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

// Chain files: CSV matrix plus an optional JSON sidecar carrying gamma and,
// when generated, the NCD recipe.
std::string sidecar_path(const std::string& csv_path);
void write_chain(const std::string& csv_path, const TransitionModel& model,
                 const std::optional<NcdSpec>& spec);

struct ChainFile {
  TransitionModel model;
  std::optional<NcdSpec> spec;
};
ChainFile load_chain(const std::string& csv_path);

// Result bundle of a single fixed-beta aggregation run.
struct ResultBundle {
  int m = 0;
  double beta = 0.0;
  PartitionMatrix psi;
  JointWeightMatrix theta;
  ReducedModel phi;
  double divergence_bits = 0.0;
  double information_bits = 0.0;
  bool converged = true;
};
nlohmann::json bundle_to_json(const ResultBundle& b);
ResultBundle bundle_from_json(const nlohmann::json& j);

nlohmann::json hierarchy_to_json(const Hierarchy& h);
Hierarchy hierarchy_from_json(const nlohmann::json& j);
void write_hierarchy(const std::string& path, const Hierarchy& h);
Hierarchy read_hierarchy(const std::string& path);

// Plot-ready curve: one row per level.
void write_curve_csv(const std::string& path, const Hierarchy& h);

nlohmann::json selection_to_json(const Selection& sel);

// Everything needed to reproduce a run bitwise (given the same build).
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  nlohmann::json inputs;  // name -> path
  nlohmann::json outputs; // name -> path
  nlohmann::json configs; // per-command config bundles
  double duration_seconds = 0.0;
};
nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

void write_text(const std::string& path, const std::string& text);
nlohmann::json read_json(const std::string& path);

} // namespace mcagg::io
