#include "gnnear/partition.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "gnnear/binio.h"
#include "gnnear/common.h"

namespace gnnear {

void PartitionConfig::validate() const {
  if (channels == 0 || dimms_per_channel == 0 || ranks_per_dimm == 0) {
    throw ConfigError("channels, dimms and ranks must be positive");
  }
  if (channels > 256 || dimms_per_channel > 16) {
    throw ConfigError("at most 256 channels and 16 DIMMs per channel");
  }
  if (!(lambda >= 0.0 && lambda <= 0.5)) {
    throw ConfigError("lambda must lie in [0, 0.5]");
  }
  if (mode == PartitionMode::kEven && lambda != 0.0) {
    throw ConfigError("even partitioning requires lambda = 0");
  }
}

void ShardConfig::validate() const {
  if (R == 0 || C == 0) throw ConfigError("shard R and C must be positive");
  if (C > 256) throw ConfigError("shard C exceeds the dst_index field");
}

void ShardConfig::check_budget(uint32_t vector_budget) const {
  if (static_cast<uint64_t>(R) + C > vector_budget) {
    throw ConfigError("R + C exceeds the NME vector budget of " +
                      std::to_string(vector_budget));
  }
}

std::vector<uint32_t> Placement::holders(uint32_t u) const {
  std::vector<uint32_t> out;
  if (duplicated[u]) {
    for (uint32_t d = 0; d < dimms_per_channel; ++d) {
      out.push_back(global_dimm(home_channel[u], d));
    }
  } else {
    out.push_back(home_global(u));
  }
  return out;
}

std::vector<uint32_t> Placement::home_counts() const {
  std::vector<uint32_t> counts(num_dimms(), 0);
  for (uint32_t v = 0; v < num_vertices(); ++v) counts[home_global(v)]++;
  return counts;
}

uint64_t Placement::duplicate_count() const {
  uint64_t n = 0;
  for (auto& s : high_degree_set) n += s.size();
  return n;
}

namespace {

Placement empty_placement(uint32_t n, const PartitionConfig& cfg) {
  Placement p;
  p.channels = cfg.channels;
  p.dimms_per_channel = cfg.dimms_per_channel;
  p.interleave = cfg.interleave;
  p.home_channel.resize(n);
  p.home_dimm.resize(n);
  p.duplicated.assign(n, 0);
  p.high_degree_set.assign(cfg.channels, {});
  return p;
}

}  // namespace

Placement even_partition(const CsrGraph& g, const PartitionConfig& cfg) {
  cfg.validate();
  Placement p = empty_placement(g.num_vertices, cfg);
  for (uint32_t v = 0; v < g.num_vertices; ++v) {
    p.home_channel[v] = static_cast<uint8_t>(v % cfg.channels);
    p.home_dimm[v] =
        static_cast<uint8_t>((v / cfg.channels) % cfg.dimms_per_channel);
  }
  return p;
}

Placement hybrid_partition(const CsrGraph& g, const PartitionConfig& cfg) {
  cfg.validate();
  const uint32_t C = cfg.channels;
  const uint32_t D = cfg.dimms_per_channel;
  Placement p = empty_placement(g.num_vertices, cfg);
  std::vector<uint32_t> members;
  for (uint32_t ch = 0; ch < C; ++ch) {
    members.clear();
    for (uint32_t v = ch; v < g.num_vertices; v += C) members.push_back(v);
    auto k = static_cast<std::size_t>(
        std::ceil(cfg.lambda * static_cast<double>(members.size()) - 1e-9));
    k = std::min(k, members.size());
    std::vector<uint32_t> ranked = members;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](uint32_t a, uint32_t b) {
                       return g.degree(a) > g.degree(b);
                     });
    for (std::size_t i = 0; i < k; ++i) p.duplicated[ranked[i]] = 1;
    uint32_t next = 0;
    for (uint32_t v : members) {
      p.home_channel[v] = static_cast<uint8_t>(ch);
      if (p.duplicated[v]) {
        p.home_dimm[v] = static_cast<uint8_t>((v / C) % D);
        p.high_degree_set[ch].push_back(v);
      } else {
        p.home_dimm[v] = static_cast<uint8_t>(next++ % D);
      }
    }
  }
  if (cfg.bytes_per_vertex > 0) {
    std::vector<uint64_t> stored(p.num_dimms(), 0);
    for (uint32_t v = 0; v < g.num_vertices; ++v) {
      if (!p.duplicated[v]) stored[p.home_global(v)]++;
    }
    for (uint32_t ch = 0; ch < C; ++ch) {
      for (uint32_t d = 0; d < D; ++d) {
        uint64_t copies =
            stored[p.global_dimm(ch, d)] + p.high_degree_set[ch].size();
        if (copies * cfg.bytes_per_vertex > cfg.dimm_capacity_bytes) {
          throw CapacityError("duplicated vertices exceed DIMM capacity on "
                              "channel " + std::to_string(ch) + " dimm " +
                              std::to_string(d));
        }
      }
    }
  }
  return p;
}

Placement make_placement(const CsrGraph& g, const PartitionConfig& cfg) {
  return cfg.mode == PartitionMode::kHybrid ? hybrid_partition(g, cfg)
                                            : even_partition(g, cfg);
}

std::vector<uint32_t> interleave_intervals(uint32_t num_intervals,
                                           const Placement& p) {
  if (p.dimms_per_channel == 0) throw ParamError("no DIMMs per channel");
  std::vector<uint32_t> owner(num_intervals);
  for (uint32_t i = 0; i < num_intervals; ++i) owner[i] = i % p.dimms_per_channel;
  return owner;
}

void write_placement(std::ostream& out, const Placement& p) {
  binio::put_magic(out, "GNPL");
  binio::put<uint64_t>(out, p.num_vertices());
  binio::put<uint32_t>(out, p.channels);
  binio::put<uint32_t>(out, p.dimms_per_channel);
  binio::put<uint8_t>(out, p.interleave ? 1 : 0);
  for (uint32_t v = 0; v < p.num_vertices(); ++v) {
    binio::put<uint32_t>(out, v);
    binio::put<uint8_t>(out, p.home_channel[v]);
    binio::put<uint8_t>(out, p.home_dimm[v]);
    binio::put<uint8_t>(out, p.duplicated[v]);
  }
}

Placement read_placement(std::istream& in) {
  binio::expect_magic(in, "GNPL");
  uint64_t n = binio::get<uint64_t>(in);
  PartitionConfig cfg;
  cfg.channels = binio::get<uint32_t>(in);
  cfg.dimms_per_channel = binio::get<uint32_t>(in);
  cfg.interleave = binio::get<uint8_t>(in) != 0;
  cfg.validate();
  Placement p = empty_placement(static_cast<uint32_t>(n), cfg);
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t v = binio::get<uint32_t>(in);
    if (v >= n) throw InputError("placement vertex out of range");
    p.home_channel[v] = binio::get<uint8_t>(in);
    p.home_dimm[v] = binio::get<uint8_t>(in);
    p.duplicated[v] = binio::get<uint8_t>(in);
    if (p.home_channel[v] >= cfg.channels ||
        p.home_dimm[v] >= cfg.dimms_per_channel) {
      throw InputError("placement coordinates out of range");
    }
  }
  for (uint32_t v = 0; v < n; ++v) {
    if (p.duplicated[v]) p.high_degree_set[p.home_channel[v]].push_back(v);
  }
  return p;
}

// ---- AddressMap -------------------------------------------------------------

namespace {
constexpr int kColumnBits = 13;
constexpr int kBankBits = 4;
}  // namespace

AddressMap::AddressMap(const Placement& p, const TimingParams& t,
                       uint32_t ranks_per_dimm, std::vector<RegionSpec> regions,
                       uint64_t dimm_capacity_bytes)
    : duplicated_(p.duplicated),
      home_channel_(p.home_channel),
      dimms_per_channel_(p.dimms_per_channel),
      banks_(t.banks_per_rank),
      ranks_(ranks_per_dimm),
      row_bytes_(t.row_bytes) {
  if (ranks_ == 0) throw ConfigError("ranks_per_dimm must be positive");
  if (row_bytes_ > (1u << kColumnBits) || banks_ > (1u << kBankBits)) {
    throw ConfigError("row or bank count exceeds the local address layout");
  }
  const uint32_t n = p.num_vertices();
  home_global_.resize(n);
  for (uint32_t v = 0; v < n; ++v) home_global_[v] = p.home_global(v);

  // Slots: duplicates of a channel first, then each DIMM's own vertices.
  home_slot_.assign(n, 0);
  dup_slot_.assign(n, 0);
  std::vector<uint32_t> dup_in_bank(std::size_t{p.channels} * banks_, 0);
  for (uint32_t ch = 0; ch < p.channels; ++ch) {
    for (uint32_t v : p.high_degree_set[ch]) {
      dup_slot_[v] = dup_in_bank[std::size_t{ch} * banks_ + v % banks_]++;
    }
  }
  std::vector<uint32_t> used(std::size_t{p.num_dimms()} * banks_, 0);
  for (uint32_t dimm = 0; dimm < p.num_dimms(); ++dimm) {
    uint32_t ch = dimm / p.dimms_per_channel;
    for (uint32_t b = 0; b < banks_; ++b) {
      used[std::size_t{dimm} * banks_ + b] =
          dup_in_bank[std::size_t{ch} * banks_ + b];
    }
  }
  for (uint32_t v = 0; v < n; ++v) {
    if (duplicated_[v]) continue;
    home_slot_[v] = used[std::size_t{home_global_[v]} * banks_ + v % banks_]++;
  }
  uint32_t max_slots = 0;
  for (uint32_t u : used) max_slots = std::max(max_slots, u);

  uint64_t row_base = 0;
  for (const auto& spec : regions) {
    Region r;
    r.spec = spec;
    uint64_t sub = ceil_div(spec.vector_bytes, ranks_);
    sub += sub % 2;
    if (sub == 0 || sub > row_bytes_) {
      throw ConfigError("sub-vector does not fit one DRAM row");
    }
    r.sub_bytes = static_cast<uint32_t>(sub);
    r.per_row = static_cast<uint32_t>(row_bytes_ / sub);
    r.row_base = static_cast<uint32_t>(row_base);
    row_base += ceil_div(std::max<uint32_t>(max_slots, 1), r.per_row);
    regions_.push_back(r);
  }
  rows_used_ = row_base;
  uint64_t rows_per_bank =
      dimm_capacity_bytes / (std::uint64_t{ranks_} * banks_ * row_bytes_);
  if (rows_used_ > rows_per_bank) {
    throw CapacityError("vertex data exceeds DIMM capacity");
  }
}

const AddressMap::Region& AddressMap::region(DataType type,
                                             uint32_t layer) const {
  for (const auto& r : regions_) {
    if (r.spec.type == type && r.spec.layer == layer) return r;
  }
  throw MappingError("unmapped region type " +
                     std::to_string(static_cast<int>(type)) + " layer " +
                     std::to_string(layer));
}

uint32_t AddressMap::subvector_bytes(DataType type, uint32_t layer) const {
  return region(type, layer).sub_bytes;
}

uint32_t AddressMap::vector_bytes(DataType type, uint32_t layer) const {
  return region(type, layer).spec.vector_bytes;
}

uint32_t AddressMap::slot(uint32_t v, uint32_t global_dimm) const {
  if (v >= home_global_.size()) throw MappingError("vertex out of range");
  if (duplicated_[v]) {
    if (global_dimm / dimms_per_channel_ != home_channel_[v]) {
      throw MappingError("replica requested outside the vertex's channel");
    }
    return dup_slot_[v];
  }
  if (global_dimm != home_global_[v]) {
    throw MappingError("vertex " + std::to_string(v) +
                       " is not stored on DIMM " + std::to_string(global_dimm));
  }
  return home_slot_[v];
}

DramCoord AddressMap::map(uint32_t v, DataType type, uint32_t layer,
                          uint32_t byte_offset) const {
  if (v >= home_global_.size()) throw MappingError("vertex out of range");
  return map_on(v, type, layer, byte_offset, home_global_[v]);
}

DramCoord AddressMap::map_on(uint32_t v, DataType type, uint32_t layer,
                             uint32_t byte_offset, uint32_t global_dimm) const {
  const Region& r = region(type, layer);
  if (byte_offset >= r.spec.vector_bytes) {
    throw MappingError("byte offset beyond vector");
  }
  uint32_t s = slot(v, global_dimm);
  DramCoord c;
  c.channel = global_dimm / dimms_per_channel_;
  c.dimm = global_dimm % dimms_per_channel_;
  c.rank = byte_offset / r.sub_bytes;
  c.bank = v % banks_;
  c.row = r.row_base + s / r.per_row;
  c.column = (s % r.per_row) * r.sub_bytes + byte_offset % r.sub_bytes;
  return c;
}

uint64_t AddressMap::daddr(uint32_t v, DataType type, uint32_t layer,
                           uint32_t global_dimm) const {
  DramCoord c = map_on(v, type, layer, 0, global_dimm);
  return (static_cast<uint64_t>(c.row) << (kColumnBits + kBankBits)) |
         (static_cast<uint64_t>(c.bank) << kColumnBits) | c.column;
}

AddressMap::Local AddressMap::decode_daddr(uint64_t daddr) {
  Local l;
  l.column = static_cast<uint32_t>(daddr & ((1u << kColumnBits) - 1));
  l.bank = static_cast<uint32_t>((daddr >> kColumnBits) & ((1u << kBankBits) - 1));
  l.row = static_cast<uint32_t>(daddr >> (kColumnBits + kBankBits));
  return l;
}

}  // namespace gnnear
