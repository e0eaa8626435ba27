#include "gnnear/timing.h"

#include <algorithm>
#include <ostream>

#include "gnnear/common.h"

namespace gnnear {

void TimingParams::validate() const {
  const uint32_t all[] = {tRC,    tRCD,   tCL,    tRP,    tBL,
                          tCCD_S, tCCD_L, tRRD_S, tRRD_L, tFAW};
  for (uint32_t v : all) {
    if (v == 0) throw ConfigError("timing parameters must be positive");
  }
  if (tCCD_L < tCCD_S) throw ConfigError("tCCD_L must be >= tCCD_S");
  if (tRRD_L < tRRD_S) throw ConfigError("tRRD_L must be >= tRRD_S");
  if (tRC < tRP) throw ConfigError("tRC must cover tRP");
  if (banks_per_rank == 0 || bank_groups == 0 ||
      banks_per_rank % bank_groups != 0) {
    throw ConfigError("banks must split evenly into bank groups");
  }
  if (burst_bytes == 0 || row_bytes == 0 || queue_depth == 0 ||
      clock_mhz == 0) {
    throw ConfigError("bus, row and queue sizes must be positive");
  }
}

std::string_view command_name(Command c) {
  switch (c) {
    case Command::kAct: return "ACT";
    case Command::kPre: return "PRE";
    case Command::kRd: return "RD";
    case Command::kWr: return "WR";
  }
  return "?";
}

void write_command_trace(std::ostream& out,
                         const std::vector<CommandRecord>& records) {
  for (const auto& r : records) {
    out << r.cycle << ' ' << r.channel << ' ' << r.dimm << ' ' << r.rank
        << ' ' << r.bank << ' ' << command_name(r.cmd) << ' ' << r.row << ' '
        << r.column << '\n';
  }
}

DramEngine::DramEngine(const TimingParams& t, uint32_t ranks, uint32_t channel,
                       uint32_t dimm, bool record)
    : t_(t), channel_(channel), dimm_(dimm), record_(record) {
  t_.validate();
  if (ranks == 0) throw ConfigError("a DIMM needs at least one rank");
  ranks_.resize(ranks);
  for (auto& r : ranks_) {
    r.banks.resize(t_.banks_per_rank);
    r.last_act_bg.assign(t_.bank_groups, kNever);
    r.last_col_bg.assign(t_.bank_groups, kNever);
  }
}

bool DramEngine::can_enqueue(bool write) const {
  return (write ? num_wr_ : num_rd_) < t_.queue_depth;
}

bool DramEngine::enqueue(const DramRequest& r) {
  check_coords(r.rank, r.bank);
  if (r.bursts == 0) throw ParamError("request must move at least one burst");
  if (!can_enqueue(r.write)) return false;
  queue_.push_back({r, false});
  (r.write ? num_wr_ : num_rd_)++;
  return true;
}

void DramEngine::check_coords(uint32_t rank, uint32_t bank) const {
  if (rank >= ranks_.size() || bank >= t_.banks_per_rank) {
    throw ParamError("rank or bank out of range");
  }
}

std::optional<uint32_t> DramEngine::open_row(uint32_t rank,
                                             uint32_t bank) const {
  check_coords(rank, bank);
  return ranks_[rank].banks[bank].open_row;
}

bool DramEngine::can_issue(Command c, uint32_t rank, uint32_t bank,
                           uint32_t row, uint32_t bursts, uint64_t now) const {
  check_coords(rank, bank);
  const auto n = static_cast<int64_t>(now);
  if (n <= last_cmd_) return false;
  const Rank& rk = ranks_[rank];
  const Bank& b = rk.banks[bank];
  const uint32_t bg = t_.bank_group(bank);
  switch (c) {
    case Command::kAct: {
      if (b.open_row) throw ProtocolError("ACT to a bank with an open row");
      if (n < b.last_act + t_.tRC) return false;
      if (n < b.last_pre + t_.tRP) return false;
      if (n < rk.last_act_bg[bg] + t_.tRRD_L) return false;
      if (n < rk.last_act + t_.tRRD_S) return false;
      int64_t oldest = *std::min_element(rk.act_window.begin(),
                                         rk.act_window.end());
      return n >= oldest + t_.tFAW;
    }
    case Command::kPre:
      if (!b.open_row) throw ProtocolError("PRE to a closed bank");
      if (n < b.last_act + (t_.tRC - t_.tRP)) return false;
      return n >= b.data_end;
    case Command::kRd:
    case Command::kWr: {
      if (!b.open_row || *b.open_row != row) {
        throw ProtocolError("column command without the target row open");
      }
      if (n < b.last_act + t_.tRCD) return false;
      if (n < rk.last_col_bg[bg] + t_.tCCD_L) return false;
      if (n < rk.last_col + t_.tCCD_S) return false;
      const bool write = c == Command::kWr;
      int64_t free = rk.data_free;
      if (free != kNever && write != rk.last_write) free += t_.turnaround;
      (void)bursts;
      return n + t_.tCL >= free;
    }
  }
  return false;
}

uint64_t DramEngine::issue(Command c, uint32_t rank, uint32_t bank,
                           uint32_t row, uint32_t column, uint32_t bursts,
                           uint64_t now) {
  if (!can_issue(c, rank, bank, row, bursts, now)) {
    throw ProtocolError(std::string(command_name(c)) +
                        " violates a timing constraint");
  }
  const auto n = static_cast<int64_t>(now);
  Rank& rk = ranks_[rank];
  Bank& b = rk.banks[bank];
  const uint32_t bg = t_.bank_group(bank);
  uint64_t done = now;
  switch (c) {
    case Command::kAct: {
      b.open_row = row;
      b.last_act = n;
      rk.last_act = n;
      rk.last_act_bg[bg] = n;
      auto oldest = std::min_element(rk.act_window.begin(),
                                     rk.act_window.end());
      *oldest = n;
      break;
    }
    case Command::kPre:
      b.open_row.reset();
      b.last_pre = n;
      break;
    case Command::kRd:
    case Command::kWr: {
      int64_t end = n + t_.tCL + static_cast<int64_t>(bursts) * t_.tBL;
      b.data_end = std::max(b.data_end, end);
      rk.last_col = n;
      rk.last_col_bg[bg] = n;
      rk.data_free = end;
      rk.last_write = c == Command::kWr;
      done = static_cast<uint64_t>(end);
      break;
    }
  }
  last_cmd_ = n;
  ++commands_;
  if (record_) {
    trace_.push_back({now, channel_, dimm_, rank, bank, c, row,
                      (c == Command::kRd || c == Command::kWr) ? column : 0,
                      (c == Command::kRd || c == Command::kWr) ? bursts : 0});
  }
  return done;
}

Command DramEngine::next_command(const DramRequest& r) const {
  const Bank& b = ranks_[r.rank].banks[r.bank];
  if (!b.open_row) return Command::kAct;
  if (*b.open_row != r.row) return Command::kPre;
  return r.write ? Command::kWr : Command::kRd;
}

void DramEngine::tick(uint64_t now, std::vector<DramCompletion>& done) {
  if (queue_.empty() || static_cast<int64_t>(now) <= last_cmd_) return;
  auto finish = [&](std::size_t i, Command c) {
    Pending& p = queue_[i];
    const DramRequest& r = p.req;
    uint64_t end = issue(c, r.rank, r.bank, r.row, r.column, r.bursts, now);
    if (c == Command::kRd || c == Command::kWr) {
      if (!p.counted) ++row_hits_;
      done.push_back({r.id, end});
      (r.write ? num_wr_ : num_rd_)--;
      queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(i));
    } else if (!p.counted) {
      p.counted = true;
      ++row_misses_;
    }
  };
  // First ready: row hits, oldest first.
  for (std::size_t i = 0; i < queue_.size(); ++i) {
    const DramRequest& r = queue_[i].req;
    Command c = next_command(r);
    if (c != Command::kRd && c != Command::kWr) continue;
    if (can_issue(c, r.rank, r.bank, r.row, r.bursts, now)) {
      finish(i, c);
      return;
    }
  }
  // Then the oldest request whose next command is ready.
  for (std::size_t i = 0; i < queue_.size(); ++i) {
    const DramRequest& r = queue_[i].req;
    Command c = next_command(r);
    if (c == Command::kRd || c == Command::kWr) continue;
    if (can_issue(c, r.rank, r.bank, r.row, r.bursts, now)) {
      finish(i, c);
      return;
    }
  }
}

}  // namespace gnnear
