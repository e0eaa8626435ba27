#ifndef GNNEAR_HW_CONFIG_H_
#define GNNEAR_HW_CONFIG_H_

#include <cstdint>

namespace gnnear {

// DDR4-2400 timing, memory-clock cycles.
struct TimingParams {
  uint32_t tRC = 56;
  uint32_t tRCD = 17;
  uint32_t tCL = 17;
  uint32_t tRP = 17;
  uint32_t tBL = 4;
  uint32_t tCCD_S = 4;
  uint32_t tCCD_L = 6;
  uint32_t tRRD_S = 4;
  uint32_t tRRD_L = 6;
  uint32_t tFAW = 26;
  uint32_t turnaround = 2;
  uint32_t clock_mhz = 1200;
  uint32_t burst_bytes = 64;
  uint32_t banks_per_rank = 16;
  uint32_t bank_groups = 4;
  uint32_t row_bytes = 8192;
  uint32_t queue_depth = 32;

  uint32_t bank_group(uint32_t bank) const {
    return bank / (banks_per_rank / bank_groups);
  }
  // Bytes per second moved by one rank or one channel data bus.
  double bus_bandwidth() const {
    return static_cast<double>(burst_bytes) / tBL * clock_mhz * 1e6;
  }
  void validate() const;
};

struct NmeConfig {
  uint32_t num_pes = 16;
  uint32_t macs_per_pe = 8;
  uint32_t clock_mhz = 500;
  uint32_t buffer_bytes = 256 * 1024;
  uint32_t word_bytes = 16;
  uint32_t vector_budget = 128;

  double peak_flops() const {
    return 2.0 * num_pes * macs_per_pe * clock_mhz * 1e6;
  }
};

struct CaeConfig {
  uint32_t gemm_rows = 128;
  uint32_t gemm_cols = 128;
  uint32_t clock_mhz = 700;
  uint32_t vpu_cores = 32;
  uint32_t vpu_simd = 16;
  uint64_t scratchpad_bytes = 16ull << 20;
  uint32_t fifo_depth = 8;
  // Capacity quoted for the GEMM engine; the array itself peaks slightly
  // higher at 2*128*128*700 MHz.
  double quoted_peak_flops = 22e12;

  uint32_t vpu_lanes() const { return vpu_cores * vpu_simd; }
  double gemm_array_peak_flops() const {
    return 2.0 * gemm_rows * gemm_cols * clock_mhz * 1e6;
  }
};

struct SystemShape {
  uint32_t channels = 4;
  uint32_t dimms_per_channel = 4;
  uint32_t ranks_per_dimm = 2;
  uint64_t dimm_capacity_bytes = 32ull << 30;

  uint32_t num_dimms() const { return channels * dimms_per_channel; }
};

}  // namespace gnnear

#endif  // GNNEAR_HW_CONFIG_H_
