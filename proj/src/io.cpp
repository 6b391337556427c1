#include "mcagg/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mcagg::io {

namespace {

[[noreturn]] void parse_fail(const std::string& what) {
  throw error(errc::parse_error, what);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    parse_fail("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw error(errc::parse_error, "cannot write " + path);
  return out;
}

} // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0)
        out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        parse_fail("bad number '" + cell + "' in " + path);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      parse_fail("ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    parse_fail("empty matrix file " + path);
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    parse_fail("expected a matrix (array of arrays)");
  const Eigen::Index r = Eigen::Index(j.size());
  const Eigen::Index c = Eigen::Index(j.front().size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (Eigen::Index(j[i].size()) != c)
      parse_fail("ragged matrix rows in JSON");
    for (Eigen::Index k = 0; k < c; ++k)
      m(i, k) = j[i][k].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array())
    parse_fail("expected an array");
  Eigen::VectorXd v(Eigen::Index(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = j[i].get<double>();
  return v;
}

std::string sidecar_path(const std::string& csv_path) {
  const std::size_t dot = csv_path.rfind('.');
  if (dot == std::string::npos)
    return csv_path + ".json";
  return csv_path.substr(0, dot) + ".json";
}

void write_chain(const std::string& csv_path, const TransitionModel& model,
                 const std::optional<NcdSpec>& spec) {
  write_matrix_csv(csv_path, model.pi);
  nlohmann::json side;
  side["n"] = model.n();
  side["gamma"] = vector_to_json(model.gamma);
  if (spec.has_value()) {
    side["spec"] = {{"block_sizes", spec->block_sizes},
                    {"epsilon", spec->epsilon},
                    {"seed", spec->seed}};
  }
  write_text(sidecar_path(csv_path), side.dump(2) + "\n");
}

ChainFile load_chain(const std::string& csv_path) {
  const Eigen::MatrixXd pi = read_matrix_csv(csv_path);
  ChainFile cf;
  std::ifstream side(sidecar_path(csv_path));
  if (side) {
    nlohmann::json j;
    try {
      side >> j;
    } catch (const nlohmann::json::exception& e) {
      parse_fail(std::string("bad sidecar JSON: ") + e.what());
    }
    cf.model = make_model_with_gamma(pi, vector_from_json(j.at("gamma")));
    if (j.contains("spec")) {
      NcdSpec s;
      s.block_sizes = j["spec"].at("block_sizes").get<std::vector<int>>();
      s.epsilon = j["spec"].at("epsilon").get<double>();
      s.seed = j["spec"].at("seed").get<std::uint64_t>();
      cf.spec = s;
    }
  } else {
    cf.model = make_model(pi, 1e-9);
  }
  return cf;
}

nlohmann::json bundle_to_json(const ResultBundle& b) {
  nlohmann::json j;
  j["m"] = b.m;
  j["beta"] = b.beta;
  j["psi"] = matrix_to_json(b.psi.psi);
  j["theta"] = matrix_to_json(b.theta.theta);
  j["phi"] = matrix_to_json(b.phi.phi);
  j["alpha"] = vector_to_json(b.phi.alpha);
  j["divergence_bits"] = b.divergence_bits;
  j["information_bits"] = b.information_bits;
  j["converged"] = b.converged;
  return j;
}

ResultBundle bundle_from_json(const nlohmann::json& j) {
  ResultBundle b;
  try {
    b.m = j.at("m").get<int>();
    b.beta = j.at("beta").get<double>();
    b.psi.psi = matrix_from_json(j.at("psi"));
    b.theta.theta = matrix_from_json(j.at("theta"));
    b.phi.phi = matrix_from_json(j.at("phi"));
    b.phi.alpha = vector_from_json(j.at("alpha"));
    b.divergence_bits = j.at("divergence_bits").get<double>();
    b.information_bits = j.at("information_bits").get<double>();
    b.converged = j.value("converged", true);
  } catch (const nlohmann::json::exception& e) {
    parse_fail(std::string("bad bundle JSON: ") + e.what());
  }
  return b;
}

namespace {

nlohmann::json level_to_json(const HierarchyLevel& lvl) {
  nlohmann::json j;
  j["m"] = lvl.m;
  j["beta_critical"] = lvl.beta_critical;
  j["beta_star"] = lvl.beta_star;
  j["divergence_bits"] = lvl.divergence_bits;
  j["information_bits"] = lvl.information_bits;
  j["corrected_information_bits"] = lvl.corrected_information_bits;
  j["psi"] = matrix_to_json(lvl.psi.psi);
  j["theta"] = matrix_to_json(lvl.theta.theta);
  j["phi"] = matrix_to_json(lvl.phi.phi);
  j["alpha"] = vector_to_json(lvl.phi.alpha);
  j["correction"] = {
      {"m", lvl.m},
      {"raw_information_bits", lvl.correction.raw_information_bits},
      {"corrected_information_bits",
       lvl.correction.corrected_information_bits},
      {"gamma_term_bits", lvl.correction.gamma_term_bits},
      {"kappa_term_bits", lvl.correction.kappa_term_bits},
      {"g_max", lvl.correction.g_max},
      {"sample_count", lvl.correction.sample_count}};
  return j;
}

HierarchyLevel level_from_json(const nlohmann::json& j) {
  HierarchyLevel lvl;
  lvl.m = j.at("m").get<int>();
  lvl.beta_critical = j.at("beta_critical").get<double>();
  lvl.beta_star = j.at("beta_star").get<double>();
  lvl.divergence_bits = j.at("divergence_bits").get<double>();
  lvl.information_bits = j.at("information_bits").get<double>();
  lvl.corrected_information_bits =
      j.at("corrected_information_bits").get<double>();
  lvl.psi.psi = matrix_from_json(j.at("psi"));
  lvl.theta.theta = matrix_from_json(j.at("theta"));
  lvl.phi.phi = matrix_from_json(j.at("phi"));
  lvl.phi.alpha = vector_from_json(j.at("alpha"));
  const nlohmann::json& c = j.at("correction");
  lvl.correction.raw_information_bits =
      c.at("raw_information_bits").get<double>();
  lvl.correction.corrected_information_bits =
      c.at("corrected_information_bits").get<double>();
  lvl.correction.gamma_term_bits = c.at("gamma_term_bits").get<double>();
  lvl.correction.kappa_term_bits = c.at("kappa_term_bits").get<double>();
  lvl.correction.g_max = c.at("g_max").get<int>();
  lvl.correction.sample_count = c.at("sample_count").get<double>();
  return lvl;
}

} // namespace

nlohmann::json hierarchy_to_json(const Hierarchy& h) {
  nlohmann::json j;
  j["complete"] = h.complete;
  nlohmann::json levels = nlohmann::json::array();
  for (const HierarchyLevel& lvl : h.levels)
    levels.push_back(level_to_json(lvl));
  j["levels"] = std::move(levels);
  return j;
}

Hierarchy hierarchy_from_json(const nlohmann::json& j) {
  Hierarchy h;
  try {
    h.complete = j.value("complete", true);
    for (const nlohmann::json& lj : j.at("levels"))
      h.levels.push_back(level_from_json(lj));
  } catch (const nlohmann::json::exception& e) {
    parse_fail(std::string("bad hierarchy JSON: ") + e.what());
  }
  return h;
}

void write_hierarchy(const std::string& path, const Hierarchy& h) {
  write_text(path, hierarchy_to_json(h).dump(2) + "\n");
}

Hierarchy read_hierarchy(const std::string& path) {
  return hierarchy_from_json(read_json(path));
}

void write_curve_csv(const std::string& path, const Hierarchy& h) {
  std::ofstream out = open_out(path);
  out << "m,beta_critical,divergence_bits,information_bits,"
         "corrected_information_bits,beta_star\n";
  for (const HierarchyLevel& lvl : h.levels) {
    out << lvl.m << ',' << format_double(lvl.beta_critical) << ','
        << format_double(lvl.divergence_bits) << ','
        << format_double(lvl.information_bits) << ','
        << format_double(lvl.corrected_information_bits) << ','
        << format_double(lvl.beta_star) << '\n';
  }
}

nlohmann::json selection_to_json(const Selection& sel) {
  nlohmann::json j;
  j["m_star"] = sel.m_star;
  j["beta_critical"] = sel.beta_critical;
  j["beta_star_crossing_m"] = sel.beta_star_crossing_m;
  j["corrected_information_bits"] = sel.corrected_information_bits;
  j["no_interior_max"] = sel.no_interior_max;
  return j;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["tool_version"] = m.tool_version;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["configs"] = m.configs;
  j["duration_seconds"] = m.duration_seconds;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.value("tool_version", std::string(kToolVersion));
    m.inputs = j.value("inputs", nlohmann::json::object());
    m.outputs = j.value("outputs", nlohmann::json::object());
    m.configs = j.value("configs", nlohmann::json::object());
    m.duration_seconds = j.value("duration_seconds", 0.0);
  } catch (const nlohmann::json::exception& e) {
    parse_fail(std::string("bad manifest JSON: ") + e.what());
  }
  return m;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  write_text(path, manifest_to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  return manifest_from_json(read_json(path));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in = open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    parse_fail("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

} // namespace mcagg::io
