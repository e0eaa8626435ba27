#ifndef GNNEAR_PARTITION_H_
#define GNNEAR_PARTITION_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gnnear/graph.h"
#include "gnnear/hw_config.h"

namespace gnnear {

enum class PartitionMode : uint8_t { kEven, kHybrid };

struct PartitionConfig {
  uint32_t channels = 4;
  uint32_t dimms_per_channel = 4;
  uint32_t ranks_per_dimm = 2;
  double lambda = 0.0;
  PartitionMode mode = PartitionMode::kEven;
  bool interleave = true;
  uint64_t dimm_capacity_bytes = 32ull << 30;
  // Storage per vertex copy across all regions; 0 skips the capacity check.
  uint64_t bytes_per_vertex = 0;

  uint32_t num_dimms() const { return channels * dimms_per_channel; }
  void validate() const;  // ConfigError
};

// R source rows by C destination columns.
struct ShardConfig {
  uint32_t R = 1;
  uint32_t C = 127;
  void validate() const;  // ConfigError
  void check_budget(uint32_t vector_budget) const;
};

struct Placement {
  uint32_t channels = 1;
  uint32_t dimms_per_channel = 1;
  bool interleave = true;
  std::vector<uint8_t> home_channel;
  std::vector<uint8_t> home_dimm;
  std::vector<uint8_t> duplicated;
  // Per channel, ascending vertex ids copied to every DIMM of the channel.
  std::vector<std::vector<uint32_t>> high_degree_set;

  uint32_t num_vertices() const {
    return static_cast<uint32_t>(home_channel.size());
  }
  uint32_t num_dimms() const { return channels * dimms_per_channel; }
  uint32_t global_dimm(uint32_t channel, uint32_t dimm) const {
    return channel * dimms_per_channel + dimm;
  }
  uint32_t home_global(uint32_t v) const {
    return global_dimm(home_channel[v], home_dimm[v]);
  }
  uint32_t interval_owner(uint32_t interval) const {
    return interleave ? interval % dimms_per_channel : 0;
  }
  // DIMM (global index) that reduces source u into destinations of the
  // given interval.
  uint32_t worker_dimm(uint32_t u, uint32_t interval) const {
    if (duplicated[u]) {
      return global_dimm(home_channel[u], interval_owner(interval));
    }
    return home_global(u);
  }
  // DIMMs that hold a copy of u, as global indices.
  std::vector<uint32_t> holders(uint32_t u) const;
  std::vector<uint32_t> home_counts() const;
  uint64_t duplicate_count() const;

  bool operator==(const Placement&) const = default;
};

Placement even_partition(const CsrGraph& g, const PartitionConfig& cfg);
Placement hybrid_partition(const CsrGraph& g, const PartitionConfig& cfg);
Placement make_placement(const CsrGraph& g, const PartitionConfig& cfg);

std::vector<uint32_t> interleave_intervals(uint32_t num_intervals,
                                           const Placement& p);

void write_placement(std::ostream& out, const Placement& p);
Placement read_placement(std::istream& in);

enum class DataType : uint8_t { kH, kA, kT, kP, kD, kDp, kG };

struct DramCoord {
  uint32_t channel = 0;
  uint32_t dimm = 0;
  uint32_t rank = 0;
  uint32_t bank = 0;
  uint32_t row = 0;
  uint32_t column = 0;
  bool operator==(const DramCoord&) const = default;
};

struct RegionSpec {
  DataType type;
  uint32_t layer;
  uint32_t vector_bytes;
};

// Bank = v mod banks. Vertices sharing a bank fill rows in order, with the
// channel's duplicated vertices first so their slots match in every DIMM.
class AddressMap {
 public:
  AddressMap(const Placement& p, const TimingParams& t,
             uint32_t ranks_per_dimm, std::vector<RegionSpec> regions,
             uint64_t dimm_capacity_bytes = 32ull << 30);

  uint32_t subvector_bytes(DataType type, uint32_t layer) const;
  uint32_t vector_bytes(DataType type, uint32_t layer) const;
  uint32_t ranks() const { return ranks_; }
  uint64_t rows_used() const { return rows_used_; }

  // Coordinates on the vertex's home DIMM.
  DramCoord map(uint32_t v, DataType type, uint32_t layer,
                uint32_t byte_offset) const;
  // Coordinates on a specific DIMM holding v (home or replica).
  DramCoord map_on(uint32_t v, DataType type, uint32_t layer,
                   uint32_t byte_offset, uint32_t global_dimm) const;

  // DIMM-local address of the start of v's vector.
  uint64_t daddr(uint32_t v, DataType type, uint32_t layer,
                 uint32_t global_dimm) const;
  struct Local {
    uint32_t bank;
    uint32_t row;
    uint32_t column;
  };
  static Local decode_daddr(uint64_t daddr);

 private:
  struct Region {
    RegionSpec spec;
    uint32_t sub_bytes;
    uint32_t per_row;
    uint32_t row_base;
  };
  const Region& region(DataType type, uint32_t layer) const;
  uint32_t slot(uint32_t v, uint32_t global_dimm) const;

  std::vector<uint8_t> duplicated_;
  std::vector<uint8_t> home_channel_;
  std::vector<uint32_t> home_global_;
  uint32_t dimms_per_channel_;
  uint32_t banks_;
  uint32_t ranks_;
  uint32_t row_bytes_;
  std::vector<Region> regions_;
  std::vector<uint32_t> home_slot_;
  std::vector<uint32_t> dup_slot_;
  uint64_t rows_used_ = 0;
};

}  // namespace gnnear

#endif  // GNNEAR_PARTITION_H_
