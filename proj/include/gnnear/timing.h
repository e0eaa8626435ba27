#ifndef GNNEAR_TIMING_H_
#define GNNEAR_TIMING_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "gnnear/hw_config.h"

namespace gnnear {

enum class Command : uint8_t { kAct, kPre, kRd, kWr };

std::string_view command_name(Command c);

struct DramRequest {
  uint64_t id = 0;
  bool write = false;
  uint32_t rank = 0;
  uint32_t bank = 0;
  uint32_t row = 0;
  uint32_t column = 0;
  uint32_t bursts = 1;
};

struct CommandRecord {
  uint64_t cycle = 0;
  uint32_t channel = 0;
  uint32_t dimm = 0;
  uint32_t rank = 0;
  uint32_t bank = 0;
  Command cmd = Command::kAct;
  uint32_t row = 0;
  uint32_t column = 0;
  uint32_t bursts = 0;
  bool operator==(const CommandRecord&) const = default;
};

// Text form: "cycle channel dimm rank bank cmd row col".
void write_command_trace(std::ostream& out,
                         const std::vector<CommandRecord>& records);

struct DramCompletion {
  uint64_t id = 0;
  uint64_t cycle = 0;  // memory cycle at which the last data beat ends
};

// One DIMM: ranks x banks with per-bank state machines, a shared command
// bus (one command per cycle), per-rank data buses and FR-FCFS RD/WR queues
// under an open-page policy.
class DramEngine {
 public:
  DramEngine(const TimingParams& t, uint32_t ranks, uint32_t channel = 0,
             uint32_t dimm = 0, bool record = false);

  bool can_enqueue(bool write) const;
  // False signals backpressure; the caller retries later.
  bool enqueue(const DramRequest& r);

  // Advances one memory cycle: issues at most one command. Column commands
  // append their data-completion cycle to `done`.
  void tick(uint64_t now, std::vector<DramCompletion>& done);

  // ProtocolError when the command is illegal for the bank state.
  bool can_issue(Command c, uint32_t rank, uint32_t bank, uint32_t row,
                 uint32_t bursts, uint64_t now) const;
  // Issues a command directly; ProtocolError when not issuable. Returns the
  // data-completion cycle for column commands and `now` otherwise.
  uint64_t issue(Command c, uint32_t rank, uint32_t bank, uint32_t row,
                 uint32_t column, uint32_t bursts, uint64_t now);

  std::optional<uint32_t> open_row(uint32_t rank, uint32_t bank) const;
  bool has_pending() const { return !queue_.empty(); }
  std::size_t queued(bool write) const { return write ? num_wr_ : num_rd_; }
  uint64_t row_hits() const { return row_hits_; }
  uint64_t row_misses() const { return row_misses_; }
  uint64_t commands() const { return commands_; }
  const std::vector<CommandRecord>& trace() const { return trace_; }
  const TimingParams& params() const { return t_; }

 private:
  static constexpr int64_t kNever = INT64_MIN / 4;

  struct Bank {
    std::optional<uint32_t> open_row;
    int64_t last_act = kNever;
    int64_t last_pre = kNever;
    int64_t data_end = kNever;
  };
  struct Rank {
    std::vector<Bank> banks;
    std::array<int64_t, 4> act_window{kNever, kNever, kNever, kNever};
    std::vector<int64_t> last_act_bg;
    std::vector<int64_t> last_col_bg;
    int64_t last_act = kNever;
    int64_t last_col = kNever;
    int64_t data_free = kNever;
    bool last_write = false;
  };
  struct Pending {
    DramRequest req;
    bool counted = false;
  };

  Command next_command(const DramRequest& r) const;
  void check_coords(uint32_t rank, uint32_t bank) const;

  TimingParams t_;
  uint32_t channel_;
  uint32_t dimm_;
  bool record_;
  std::vector<Rank> ranks_;
  std::vector<Pending> queue_;  // arrival order
  std::size_t num_rd_ = 0;
  std::size_t num_wr_ = 0;
  int64_t last_cmd_ = kNever;
  uint64_t row_hits_ = 0;
  uint64_t row_misses_ = 0;
  uint64_t commands_ = 0;
  std::vector<CommandRecord> trace_;
};

}  // namespace gnnear

#endif  // GNNEAR_TIMING_H_
