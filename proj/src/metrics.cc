#include "gnnear/metrics.h"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gnnear/common.h"

namespace gnnear {

LayerCounters& Counters::layer(uint32_t l, bool backward) {
  std::size_t i = 2 * std::size_t{l} + (backward ? 1 : 0);
  if (layers.size() <= i) layers.resize(i + 1);
  return layers[i];
}

const LayerCounters& Counters::layer(uint32_t l, bool backward) const {
  std::size_t i = 2 * std::size_t{l} + (backward ? 1 : 0);
  if (i >= layers.size()) throw ParamError("no counters for that layer");
  return layers[i];
}

uint64_t Counters::reduce_off_chip_bytes() const {
  uint64_t s = 0;
  for (const auto& l : layers) s += l.reduce_off_chip_bytes;
  return s;
}

void EnergyModel::validate() const {
  const double all[] = {off_chip_pj_per_bit, local_read_pj_per_bit, nme_eu_mw,
                        nme_buffer_mw,       gemm_mw,               vpu_mw,
                        scratchpad_mw};
  for (double v : all) {
    if (!(v > 0)) throw ConfigError("energy constants must be positive");
  }
}

double makespan_seconds(const Counters& c, const TimingParams& t) {
  return static_cast<double>(c.makespan_cycles) / (t.clock_mhz * 1e6);
}

EnergyBreakdown energy_total(const Counters& c, const EnergyModel& m,
                             PowerMode mode, uint32_t num_nmes,
                             const TimingParams& t, const CaeConfig& cae) {
  m.validate();
  EnergyBreakdown e;
  const double bits_off =
      8.0 * static_cast<double>(c.off_chip_read_bytes + c.off_chip_write_bytes);
  e.off_chip_j = bits_off * m.off_chip_pj_per_bit * 1e-12;
  e.local_read_j = 8.0 * static_cast<double>(c.local_read_bytes) *
                   m.local_read_pj_per_bit * 1e-12;
  const double tick_s = 1e-9 / static_cast<double>(kTicksPerNs);
  const double cae_cycle_s = 1.0 / (cae.clock_mhz * 1e6);
  if (mode == PowerMode::kActive) {
    e.nme_eu_j = static_cast<double>(c.nme_eu_ticks) * tick_s * m.nme_eu_mw * 1e-3;
    e.nme_buffer_j =
        static_cast<double>(c.nme_buffer_ticks) * tick_s * m.nme_buffer_mw * 1e-3;
    const double gemm_s = static_cast<double>(c.gemm_busy_cycles) * cae_cycle_s;
    const double vpu_s = static_cast<double>(c.vpu_busy_cycles) * cae_cycle_s;
    e.gemm_j = gemm_s * m.gemm_mw * 1e-3;
    e.vpu_j = vpu_s * m.vpu_mw * 1e-3;
    e.scratchpad_j = (gemm_s + vpu_s) * m.scratchpad_mw * 1e-3;
  } else {
    const double T = makespan_seconds(c, t);
    e.nme_eu_j = T * num_nmes * m.nme_eu_mw * 1e-3;
    e.nme_buffer_j = T * num_nmes * m.nme_buffer_mw * 1e-3;
    e.gemm_j = T * m.gemm_mw * 1e-3;
    e.vpu_j = T * m.vpu_mw * 1e-3;
    e.scratchpad_j = T * m.scratchpad_mw * 1e-3;
  }
  return e;
}

RooflinePoint roofline_point(std::string name, double intensity, double peak,
                             double bandwidth) {
  if (intensity < 0 || peak <= 0 || bandwidth <= 0) {
    throw ParamError("roofline inputs must be positive");
  }
  RooflinePoint p{std::move(name), intensity, 0, peak, bandwidth};
  p.attainable = std::min(peak, intensity * bandwidth);
  return p;
}

double nmp_bandwidth(const SystemShape& s, const TimingParams& t) {
  return static_cast<double>(s.num_dimms()) * s.ranks_per_dimm *
         t.bus_bandwidth();
}

double channel_bandwidth(const SystemShape& s, const TimingParams& t) {
  return static_cast<double>(s.channels) * t.bus_bandwidth();
}

void finalize_energy(SimReport& r, const EnergyModel& m) {
  r.energy = energy_total(r.counters, m, PowerMode::kActive, r.num_dimms);
  r.energy_always_on_j =
      energy_total(r.counters, m, PowerMode::kAlwaysOn, r.num_dimms).total_j();
}

double reduction_saving(const SimReport& base, const SimReport& nmp) {
  if (base.workload != nmp.workload) {
    throw ComparisonError("reports describe different workloads");
  }
  const double b = static_cast<double>(base.counters.reduce_off_chip_bytes());
  const double n = static_cast<double>(nmp.counters.reduce_off_chip_bytes());
  if (b == 0) return 0.0;
  return 100.0 * (1.0 - n / b);
}

// ---- Report text --------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

struct Field {
  const char* key;
  uint64_t Counters::*ptr;
};

constexpr Field kScalarFields[] = {
    {"off_chip_read_bytes", &Counters::off_chip_read_bytes},
    {"off_chip_write_bytes", &Counters::off_chip_write_bytes},
    {"local_read_bytes", &Counters::local_read_bytes},
    {"local_write_bytes", &Counters::local_write_bytes},
    {"dup_write_bytes", &Counters::dup_write_bytes},
    {"b_types", &Counters::b_types},
    {"eu_mac_ops", &Counters::eu_mac_ops},
    {"gemm_flops", &Counters::gemm_flops},
    {"vpu_ops", &Counters::vpu_ops},
    {"makespan_cycles", &Counters::makespan_cycles},
    {"nme_eu_ticks", &Counters::nme_eu_ticks},
    {"nme_buffer_ticks", &Counters::nme_buffer_ticks},
    {"gemm_busy_cycles", &Counters::gemm_busy_cycles},
    {"vpu_busy_cycles", &Counters::vpu_busy_cycles},
    {"fifo_stall_cycles", &Counters::fifo_stall_cycles},
    {"queue_stall_cycles", &Counters::queue_stall_cycles},
    {"buffer_high_water", &Counters::buffer_high_water},
    {"dram_commands", &Counters::dram_commands},
    {"row_hits", &Counters::row_hits},
    {"row_misses", &Counters::row_misses},
};

struct VectorField {
  const char* key;
  std::vector<uint64_t> Counters::*ptr;
};

constexpr VectorField kVectorFields[] = {
    {"channel_read_bytes", &Counters::channel_read_bytes},
    {"channel_write_bytes", &Counters::channel_write_bytes},
    {"dimm_local_read_bytes", &Counters::dimm_local_read_bytes},
    {"dimm_local_write_bytes", &Counters::dimm_local_write_bytes},
};

struct LayerField {
  const char* key;
  uint64_t LayerCounters::*ptr;
};

constexpr LayerField kLayerFields[] = {
    {"l_types", &LayerCounters::l_types},
    {"c_types", &LayerCounters::c_types},
    {"r_types", &LayerCounters::r_types},
    {"reduce_source_bytes", &LayerCounters::reduce_source_bytes},
    {"reduce_off_chip_bytes", &LayerCounters::reduce_off_chip_bytes},
    {"update_stream_bytes", &LayerCounters::update_stream_bytes},
};

uint64_t parse_u64(const std::string& s, std::size_t line) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError(line, "expected an unsigned integer, got '" + s + "'");
  }
  return v;
}

double parse_f64(const std::string& s, std::size_t line) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError(line, "expected a number, got '" + s + "'");
  }
  return v;
}

std::vector<uint64_t> parse_list(const std::string& s, std::size_t line) {
  std::vector<uint64_t> out;
  if (s.empty()) return out;
  std::size_t a = 0;
  while (true) {
    std::size_t b = s.find(',', a);
    out.push_back(parse_u64(s.substr(a, b - a), line));
    if (b == std::string::npos) break;
    a = b + 1;
  }
  return out;
}

}  // namespace

void write_report(std::ostream& out, const SimReport& r) {
  const Counters& c = r.counters;
  out << "workload=" << r.workload << '\n';
  out << "config=" << r.config << '\n';
  out << "num_dimms=" << r.num_dimms << '\n';
  out << "loss=" << fmt_double(r.loss) << '\n';
  out << "makespan_s=" << fmt_double(makespan_seconds(c)) << '\n';
  for (const auto& f : kScalarFields) {
    out << "counter." << f.key << '=' << c.*f.ptr << '\n';
  }
  for (const auto& f : kVectorFields) {
    out << "counter." << f.key << '=' << join(c.*f.ptr) << '\n';
  }
  out << "layers=" << c.layers.size() << '\n';
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const char* dir = i % 2 ? "bwd" : "fwd";
    for (const auto& f : kLayerFields) {
      out << "layer." << i / 2 << '.' << dir << '.' << f.key << '='
          << c.layers[i].*f.ptr << '\n';
    }
  }
  const EnergyBreakdown& e = r.energy;
  out << "energy.off_chip_j=" << fmt_double(e.off_chip_j) << '\n';
  out << "energy.local_read_j=" << fmt_double(e.local_read_j) << '\n';
  out << "energy.nme_eu_j=" << fmt_double(e.nme_eu_j) << '\n';
  out << "energy.nme_buffer_j=" << fmt_double(e.nme_buffer_j) << '\n';
  out << "energy.gemm_j=" << fmt_double(e.gemm_j) << '\n';
  out << "energy.vpu_j=" << fmt_double(e.vpu_j) << '\n';
  out << "energy.scratchpad_j=" << fmt_double(e.scratchpad_j) << '\n';
  out << "energy.total_j=" << fmt_double(e.total_j()) << '\n';
  out << "energy.always_on_j=" << fmt_double(r.energy_always_on_j) << '\n';
  for (const auto& p : r.roofline) {
    out << "roofline." << p.name << '=' << fmt_double(p.intensity) << ','
        << fmt_double(p.attainable) << ',' << fmt_double(p.peak) << ','
        << fmt_double(p.bandwidth) << '\n';
  }
  out << "verdict=" << r.verdict << '\n';
  out << "max_deviation=" << fmt_double(r.max_deviation) << '\n';
  out << "divergence=" << r.divergence << '\n';
}

SimReport parse_report(std::istream& in) {
  SimReport r;
  Counters& c = r.counters;
  std::map<std::string, uint64_t Counters::*> scalars;
  for (const auto& f : kScalarFields) scalars[f.key] = f.ptr;
  std::map<std::string, std::vector<uint64_t> Counters::*> vectors;
  for (const auto& f : kVectorFields) vectors[f.key] = f.ptr;
  std::map<std::string, uint64_t LayerCounters::*> layer_fields;
  for (const auto& f : kLayerFields) layer_fields[f.key] = f.ptr;

  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(no, "missing '='");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "workload") {
      r.workload = val;
    } else if (key == "config") {
      r.config = val;
    } else if (key == "num_dimms") {
      r.num_dimms = static_cast<uint32_t>(parse_u64(val, no));
    } else if (key == "loss") {
      r.loss = parse_f64(val, no);
    } else if (key == "makespan_s" || key == "energy.total_j") {
      // Derived values.
    } else if (key.rfind("counter.", 0) == 0) {
      std::string k = key.substr(8);
      if (auto it = scalars.find(k); it != scalars.end()) {
        c.*(it->second) = parse_u64(val, no);
      } else if (auto jt = vectors.find(k); jt != vectors.end()) {
        c.*(jt->second) = parse_list(val, no);
      } else {
        throw ParseError(no, "unknown counter '" + k + "'");
      }
    } else if (key == "layers") {
      c.layers.assign(parse_u64(val, no), {});
    } else if (key.rfind("layer.", 0) == 0) {
      std::istringstream ks(key.substr(6));
      std::string idx, dir, field;
      std::getline(ks, idx, '.');
      std::getline(ks, dir, '.');
      std::getline(ks, field);
      auto it = layer_fields.find(field);
      if (it == layer_fields.end() || (dir != "fwd" && dir != "bwd")) {
        throw ParseError(no, "bad layer key '" + key + "'");
      }
      c.layer(static_cast<uint32_t>(parse_u64(idx, no)), dir == "bwd").*
          (it->second) = parse_u64(val, no);
    } else if (key.rfind("energy.", 0) == 0) {
      std::string k = key.substr(7);
      double v = parse_f64(val, no);
      EnergyBreakdown& e = r.energy;
      if (k == "off_chip_j") e.off_chip_j = v;
      else if (k == "local_read_j") e.local_read_j = v;
      else if (k == "nme_eu_j") e.nme_eu_j = v;
      else if (k == "nme_buffer_j") e.nme_buffer_j = v;
      else if (k == "gemm_j") e.gemm_j = v;
      else if (k == "vpu_j") e.vpu_j = v;
      else if (k == "scratchpad_j") e.scratchpad_j = v;
      else if (k == "always_on_j") r.energy_always_on_j = v;
      else throw ParseError(no, "unknown energy key '" + k + "'");
    } else if (key.rfind("roofline.", 0) == 0) {
      RooflinePoint p;
      p.name = key.substr(9);
      std::istringstream vs(val);
      std::string part;
      double* dst[] = {&p.intensity, &p.attainable, &p.peak, &p.bandwidth};
      for (double* d : dst) {
        if (!std::getline(vs, part, ',')) throw ParseError(no, "short roofline");
        *d = parse_f64(part, no);
      }
      r.roofline.push_back(p);
    } else if (key == "verdict") {
      r.verdict = val;
    } else if (key == "max_deviation") {
      r.max_deviation = parse_f64(val, no);
    } else if (key == "divergence") {
      r.divergence = val;
    } else {
      throw ParseError(no, "unknown key '" + key + "'");
    }
  }
  return r;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "parameter,cycles,off_chip_bytes,energy_j\n";
  for (const auto& r : rows) {
    out << r.parameter << ',' << r.cycles << ',' << r.off_chip_bytes << ','
        << fmt_double(r.energy_j) << '\n';
  }
}

}  // namespace gnnear
