#include "gnnear/cli.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "gnnear/common.h"
#include "gnnear/isa.h"
#include "gnnear/partition.h"

namespace gnnear::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

uint32_t to_u32(const std::string& key, const std::string& v) {
  uint64_t x = to_u64(key, v);
  if (x > UINT32_MAX) throw ConfigError(key + ": value out of range");
  return static_cast<uint32_t>(x);
}

int64_t to_i64(const std::string& key, const std::string& v) {
  int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  std::istringstream s(v);
  double x = 0;
  s >> x;
  if (!s || !s.eof()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "1" || l == "true" || l == "on" || l == "yes") return true;
  if (l == "0" || l == "false" || l == "off" || l == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<uint32_t> to_list(const std::string& key, const std::string& v) {
  std::vector<uint32_t> out;
  std::stringstream s(v);
  std::string item;
  while (std::getline(s, item, ',')) out.push_back(to_u32(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

Precision to_precision(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "fp32") return Precision::kFp32;
  if (l == "bf16") return Precision::kBf16;
  throw ConfigError(key + ": precision must be fp32 or bf16");
}

}  // namespace

ConfigMap read_config(std::istream& in) {
  ConfigMap m;
  std::string line;
  std::string section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ParseError(n, "bad section header");
      section = lower(trim(t.substr(1, t.size() - 2)));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected key = value");
    std::string key = lower(trim(t.substr(0, eq)));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(n, "empty key");
    if (!section.empty()) key = section + "." + key;
    if (!m.emplace(key, value).second) throw ParseError(n, "repeated key " + key);
  }
  return m;
}

void apply_override(ConfigMap& m, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  m[lower(trim(assignment.substr(0, eq)))] = trim(assignment.substr(eq + 1));
}

RunConfig parse_run_config(const ConfigMap& m) {
  RunConfig rc;
  std::vector<uint32_t> widths{32, 16, 8};
  std::string variant = "gcn";
  Precision precision = Precision::kFp32;
  double lr = rc.model.learning_rate;
  double eps = rc.model.gin_eps;
  double slope = rc.model.gat_slope;
  bool lambda_set = false;
  SimOptions& o = rc.sim;
  Toggles& tg = o.toggles;
  for (const auto& [k, v] : m) {
    if (k == "run.seed") rc.seed = to_u64(k, v);
    else if (k == "graph.source") rc.graph_source = lower(v);
    else if (k == "graph.file") rc.graph_file = v;
    else if (k == "graph.format") rc.graph_format = lower(v);
    else if (k == "graph.preset") rc.preset = v;
    else if (k == "graph.scale") rc.scale = to_double(k, v);
    else if (k == "graph.vertices") rc.vertices = to_u32(k, v);
    else if (k == "graph.avg_degree") rc.avg_degree = to_double(k, v);
    else if (k == "graph.symmetric") rc.symmetric = to_bool(k, v);
    else if (k == "model.variant") variant = v;
    else if (k == "model.dims") { widths = to_list(k, v); rc.dims_set = true; }
    else if (k == "model.precision") precision = to_precision(k, v);
    else if (k == "model.learning_rate") lr = to_double(k, v);
    else if (k == "model.gin_eps") eps = to_double(k, v);
    else if (k == "model.gat_slope") slope = to_double(k, v);
    else if (k == "model.features") rc.features_file = v;
    else if (k == "model.labels") rc.labels_file = v;
    else if (k == "system.channels") o.shape.channels = to_u32(k, v);
    else if (k == "system.dimms_per_channel") o.shape.dimms_per_channel = to_u32(k, v);
    else if (k == "system.ranks_per_dimm") o.shape.ranks_per_dimm = to_u32(k, v);
    else if (k == "system.dimm_capacity_gb") o.shape.dimm_capacity_bytes = to_u64(k, v) << 30;
    else if (k == "partition.lambda") { o.lambda = to_double(k, v); lambda_set = true; }
    else if (k == "shard.r") o.shard.R = to_u32(k, v);
    else if (k == "shard.c") o.shard.C = to_u32(k, v);
    else if (k == "schedule.window") o.window_size = to_u32(k, v);
    else if (k == "toggles.nmp") tg.nmp = to_bool(k, v);
    else if (k == "toggles.narrow_shard") tg.narrow_shard = to_bool(k, v);
    else if (k == "toggles.hgp") tg.hgp = to_bool(k, v);
    else if (k == "toggles.broadcast") tg.broadcast = to_bool(k, v);
    else if (k == "toggles.window") tg.window = to_bool(k, v);
    else if (k == "toggles.interleave") tg.interleave = to_bool(k, v);
    else if (k == "toggles.overlap") tg.overlap = to_bool(k, v);
    else if (k == "toggles.ieo") tg.ieo = to_bool(k, v);
    else if (k == "sim.timed") o.timed = to_bool(k, v);
    else if (k == "sim.functional") o.functional = to_bool(k, v);
    else if (k == "sim.record_commands") o.record_commands = to_bool(k, v);
    else if (k == "sim.record_trace") o.record_trace = to_bool(k, v);
    else if (k == "sim.audit") o.audit = to_bool(k, v);
    else if (k == "sim.count_as_fp32") o.count_as_fp32 = to_bool(k, v);
    else if (k == "sim.fault_edge") o.fault_edge = to_i64(k, v);
    else if (k == "nme.buffer_bytes") o.nme.buffer_bytes = to_u32(k, v);
    else if (k == "nme.vector_budget") o.nme.vector_budget = to_u32(k, v);
    else if (k == "validate.enabled") rc.validate = to_bool(k, v);
    else if (k == "validate.max_vertices") rc.validate_max_vertices = to_u32(k, v);
    else if (k == "output.report") rc.report_path = v;
    else if (k == "output.trace") rc.trace_path = v;
    else if (k == "output.commands") rc.commands_path = v;
    else if (k == "output.placement") rc.placement_path = v;
    else if (k == "output.csv") rc.csv_path = v;
    else throw ConfigError("unknown config key '" + k + "'");
  }
  if (rc.graph_source != "generate" && rc.graph_source != "file" &&
      rc.graph_source != "preset") {
    throw ConfigError("graph.source must be generate, file or preset");
  }
  if (rc.graph_format != "edges" && rc.graph_format != "csr") {
    throw ConfigError("graph.format must be edges or csr");
  }
  if (rc.graph_source == "file" && rc.graph_file.empty()) {
    throw ConfigError("graph.file is required for a file source");
  }
  if (rc.graph_source == "preset") {
    auto p = find_preset(rc.preset);
    if (!p) throw ConfigError("unknown graph preset '" + rc.preset + "'");
    if (!(rc.scale > 0 && rc.scale <= 1)) {
      throw ConfigError("graph.scale must lie in (0, 1]");
    }
    rc.vertices = static_cast<uint32_t>(
        std::max<double>(2, std::llround(p->num_vertices * rc.scale)));
    rc.avg_degree = p->avg_degree;
    if (!rc.dims_set) widths.front() = p->feature_dim;
    if (!lambda_set) o.lambda = p->lambda;
  }
  if (widths.size() < 2) throw ConfigError("model.dims needs at least two widths");
  rc.model = make_model(parse_variant(variant), widths, precision);
  rc.model.learning_rate = lr;
  rc.model.gin_eps = eps;
  rc.model.gat_slope = slope;
  rc.model.validate();
  if (rc.model.variant == Variant::kGat && tg.ieo) {
    throw ConfigError(
        "GAT has a nonlinear aggregator; set toggles.ieo = false");
  }
  o.validate();
  return rc;
}

void build_workload(const RunConfig& rc, Workload& w) {
  if (rc.graph_source == "file") {
    std::ifstream f(rc.graph_file, std::ios::binary);
    if (!f) throw InputError("cannot open graph file " + rc.graph_file);
    w.graph = rc.graph_format == "csr" ? read_csr(f)
                                       : load_edge_list(f, rc.symmetric);
  } else {
    w.graph = generate_power_law(rc.vertices, rc.avg_degree, rc.seed);
  }
  const uint32_t n = w.graph.num_vertices;
  SimInputs& in = w.inputs;
  in.graph = &w.graph;
  in.model = rc.model;
  in.state = init_state(rc.model, rc.seed + 1);
  if (!rc.features_file.empty()) {
    std::ifstream f(rc.features_file, std::ios::binary);
    if (!f) throw InputError("cannot open features " + rc.features_file);
    in.features = read_matrix(f);
  } else {
    in.features = random_features(n, rc.model.dims.front().d_in, rc.seed + 2);
  }
  if (in.features.rows != n || in.features.cols != rc.model.dims.front().d_in) {
    throw InputError("feature matrix shape does not match graph and model");
  }
  if (!rc.labels_file.empty()) {
    std::ifstream f(rc.labels_file, std::ios::binary);
    if (!f) throw InputError("cannot open labels " + rc.labels_file);
    in.labels = read_labels(f);
  } else {
    in.labels = random_labels(n, rc.model.dims.back().d_out, rc.seed + 3);
  }
  if (in.labels.size() != n) throw InputError("label count does not match graph");
}

namespace {

struct Outcome {
  SimResult result;
  SimReport report;
};

Outcome simulate(const RunConfig& rc, const Workload& w, bool validate) {
  Outcome o;
  o.result = simulate_epoch(w.inputs, rc.sim);
  Validation v;
  const bool check = validate && rc.sim.functional &&
                     w.graph.num_vertices <= rc.validate_max_vertices;
  if (check) v = validate_against_reference(w.inputs, o.result);
  o.report = make_report(w.inputs, rc.sim, o.result, check ? &v : nullptr);
  return o;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << data;
  if (!f) throw InputError("write failed for " + path);
}

void write_outputs(const RunConfig& rc, const Outcome& o, std::ostream& out) {
  std::ostringstream rep;
  write_report(rep, o.report);
  if (rc.report_path.empty()) {
    out << rep.str();
  } else {
    write_file(rc.report_path, rep.str());
  }
  if (!rc.trace_path.empty()) {
    for (std::size_t c = 0; c < o.result.trace.size(); ++c) {
      std::ostringstream t;
      isa::write_trace(t, o.result.trace[c]);
      write_file(rc.trace_path + ".ch" + std::to_string(c), t.str());
    }
  }
  if (!rc.commands_path.empty()) {
    std::ostringstream t;
    write_command_trace(t, o.result.commands);
    write_file(rc.commands_path, t.str());
  }
}

RunConfig load(const std::string& path, const std::vector<std::string>& sets) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  ConfigMap m = read_config(f);
  for (const auto& s : sets) apply_override(m, s);
  return parse_run_config(m);
}

// Applies one sweep value; returns the CSV parameter label.
std::string apply_sweep(RunConfig& rc, const std::string& param,
                        const std::string& value) {
  SimOptions& o = rc.sim;
  const std::string key = "sweep " + param;
  if (param == "shard") {
    o.shard.C = to_u32(key, value);
    o.shard.validate();
    o.shard.check_budget(o.nme.vector_budget);
  } else if (param == "window") {
    o.window_size = to_u32(key, value);
    o.toggles.window = true;
  } else if (param == "lambda") {
    o.lambda = to_double(key, value);
    o.toggles.hgp = true;
  } else if (param == "ranks") {
    o.shape.ranks_per_dimm = to_u32(key, value);
  } else if (param == "rxc") {
    const auto x = lower(value).find('x');
    if (x == std::string::npos) throw ConfigError("rxc values look like 2x126");
    o.shard.R = to_u32(key, value.substr(0, x));
    o.shard.C = to_u32(key, value.substr(x + 1));
    o.shard.validate();
    o.shard.check_budget(o.nme.vector_budget);
  } else {
    throw ParamError("sweep parameter must be shard, window, lambda, ranks or rxc");
  }
  o.validate();
  return param + "=" + value;
}

int cmd_simulate(const RunConfig& rc, std::ostream& out) {
  Workload w;
  build_workload(rc, w);
  Outcome o = simulate(rc, w, rc.validate);
  write_outputs(rc, o, out);
  return kExitOk;
}

int cmd_validate(RunConfig rc, std::ostream& out) {
  Workload w;
  build_workload(rc, w);
  if (w.graph.num_vertices > rc.validate_max_vertices) {
    throw ConfigError("graph has " + std::to_string(w.graph.num_vertices) +
                      " vertices, above validate.max_vertices");
  }
  rc.sim.functional = true;
  SimResult r = simulate_epoch(w.inputs, rc.sim);
  Validation v = validate_against_reference(w.inputs, r);
  out << (v.pass ? "PASS" : "FAIL") << " max_deviation=" << std::setprecision(6)
      << v.max_deviation << " tolerance=" << tolerance_for(rc.model.precision)
      << '\n';
  if (!v.pass) out << "divergence: " << v.divergence << '\n';
  return v.pass ? kExitOk : kExitValidation;
}

int cmd_sweep(const RunConfig& rc, const std::string& param,
              const std::vector<std::string>& values, uint32_t jobs,
              std::ostream& out) {
  if (values.empty()) throw ParamError("sweep needs at least one value");
  Workload w;
  build_workload(rc, w);
  std::vector<RunConfig> points;
  std::vector<SweepRow> rows(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    points.push_back(rc);
    rows[i].parameter = apply_sweep(points.back(), param, values[i]);
  }
  auto one = [&](std::size_t i) {
    Outcome o = simulate(points[i], w, false);
    rows[i].cycles = o.report.counters.makespan_cycles;
    rows[i].off_chip_bytes = o.report.counters.off_chip_read_bytes +
                             o.report.counters.off_chip_write_bytes;
    rows[i].energy_j = o.report.energy.total_j();
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t b = 0; b < points.size(); b += jobs) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = b; i < std::min(points.size(), b + jobs); ++i) {
      batch.push_back(std::async(std::launch::async, one, i));
    }
    for (auto& f : batch) f.get();
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  if (rc.csv_path.empty()) {
    out << csv.str();
  } else {
    write_file(rc.csv_path, csv.str());
  }
  return kExitOk;
}

int cmd_partition(const RunConfig& rc, std::ostream& out) {
  Workload w;
  build_workload(rc, w);
  Placement p = make_placement(w.graph, rc.sim.partition_config());
  if (!rc.placement_path.empty()) {
    std::ostringstream s;
    write_placement(s, p);
    write_file(rc.placement_path, s.str());
    return kExitOk;
  }
  out << "vertex channel dimm duplicated\n";
  for (uint32_t v = 0; v < p.num_vertices(); ++v) {
    out << v << ' ' << int{p.home_channel[v]} << ' ' << int{p.home_dimm[v]}
        << ' ' << int{p.duplicated[v]} << '\n';
  }
  return kExitOk;
}

void summarize(const SimReport& r, std::ostream& out) {
  const Counters& c = r.counters;
  out << "workload      " << r.workload << '\n'
      << "config        " << r.config << '\n'
      << "dimms         " << r.num_dimms << '\n'
      << "makespan      " << c.makespan_cycles << " cycles\n"
      << "off-chip      " << c.off_chip_read_bytes << " B read, "
      << c.off_chip_write_bytes << " B written\n"
      << "local reads   " << c.local_read_bytes << " B\n"
      << "energy        " << r.energy.total_j() << " J active, "
      << r.energy_always_on_j << " J always-on\n"
      << "loss          " << r.loss << '\n'
      << "verdict       " << r.verdict;
  if (r.verdict != "SKIPPED") out << " (max deviation " << r.max_deviation << ')';
  out << '\n';
  if (!r.divergence.empty()) out << "divergence    " << r.divergence << '\n';
  for (const RooflinePoint& p : r.roofline) {
    out << "roofline      " << p.name << ": " << p.intensity << " Ops/B, "
        << p.attainable << " Ops/s attainable\n";
  }
}

int cmd_report(const std::string& path, bool summary, std::ostream& out) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open report " + path);
  SimReport r = parse_report(f);
  if (summary) {
    summarize(r, out);
  } else {
    write_report(out, r);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Near-memory GNN training simulator"};
  app.require_subcommand(1);
  std::string config;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "Run configuration file")->required();
    sub->add_option("--set", sets, "Override a key: section.key=value");
  };
  CLI::App* sim = app.add_subcommand("simulate", "Simulate one training epoch");
  add_common(sim);
  CLI::App* val = app.add_subcommand("validate", "Compare against the reference trainer");
  add_common(val);
  CLI::App* sweep = app.add_subcommand("sweep", "Design-space sweep");
  add_common(sweep);
  std::string param;
  std::vector<std::string> values;
  uint32_t jobs = 0;
  sweep->add_option("--param", param, "shard, window, lambda, ranks or rxc")->required();
  sweep->add_option("--values", values, "Comma-separated values")
      ->delimiter(',')
      ->required();
  sweep->add_option("--jobs", jobs, "Concurrent points (0: hardware threads)");
  CLI::App* part = app.add_subcommand("partition", "Export the vertex placement");
  add_common(part);
  CLI::App* rep = app.add_subcommand("report", "Re-render a saved report");
  std::string report_path;
  bool summary = false;
  rep->add_option("file", report_path, "Report file")->required();
  rep->add_flag("--summary", summary, "Human-readable summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rep->parsed()) return cmd_report(report_path, summary, out);
    RunConfig rc = load(config, sets);
    if (sim->parsed()) return cmd_simulate(rc, out);
    if (val->parsed()) return cmd_validate(rc, out);
    if (sweep->parsed()) return cmd_sweep(rc, param, values, jobs, out);
    if (part->parsed()) return cmd_partition(rc, out);
  } catch (const ParamError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitUsage;
}

}  // namespace gnnear::cli
