#ifndef GNNEAR_CLI_H_
#define GNNEAR_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gnnear/graph.h"
#include "gnnear/simulator.h"

namespace gnnear::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitValidation = 3;

// Flat "section.key" -> value view of a config file.
using ConfigMap = std::map<std::string, std::string>;

// Lines are "key = value", "[section]", blank, or comments starting with
// '#' or ';'. ParseError on malformed lines or repeated keys.
ConfigMap read_config(std::istream& in);
// "section.key=value". ConfigError when malformed.
void apply_override(ConfigMap& m, const std::string& assignment);

struct RunConfig {
  uint64_t seed = 1;

  std::string graph_source = "generate";  // generate | file | preset
  std::string graph_file;
  std::string graph_format = "edges";  // edges | csr
  std::string preset;
  double scale = 1.0;  // vertex-count factor for presets
  uint32_t vertices = 1000;
  double avg_degree = 10.0;
  bool symmetric = true;

  ModelConfig model = make_model(Variant::kGcn, {32, 16, 8});
  bool dims_set = false;
  std::string features_file;
  std::string labels_file;

  SimOptions sim;
  bool validate = true;
  uint32_t validate_max_vertices = 2000;

  std::string report_path;
  std::string trace_path;
  std::string commands_path;
  std::string placement_path;
  std::string csv_path;
};

// ConfigError on unknown keys or bad values; ParamError on unknown variants.
RunConfig parse_run_config(const ConfigMap& m);

struct Workload {
  CsrGraph graph;
  SimInputs inputs;  // inputs.graph points into this object
  Workload() = default;
  Workload(const Workload&) = delete;
  Workload& operator=(const Workload&) = delete;
};

// Loads or generates the graph, features, labels and initial weights.
void build_workload(const RunConfig& rc, Workload& w);

// Runs one subcommand and returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gnnear::cli

#endif  // GNNEAR_CLI_H_
