#include <algorithm>
#include <deque>
#include <memory>
#include <queue>
#include <unordered_map>

#include "gnnear/bf16.h"
#include "gnnear/common.h"
#include "gnnear/isa.h"
#include "gnnear/nme.h"
#include "gnnear/timing.h"
#include "sim_core.h"

namespace gnnear {
namespace {

constexpr uint64_t kNever = UINT64_MAX;

uint64_t to_cycle(uint64_t tick) { return ceil_div(tick, kMemCycleTicks); }

enum class Ev : uint8_t { kDramDone, kFifoArrive, kMergeDone, kTailDone, kDirectMerge };

struct Event {
  uint64_t tick;
  uint64_t seq;
  Ev kind;
  uint32_t a;
  uint64_t b;
  bool operator>(const Event& o) const {
    return tick != o.tick ? tick > o.tick : seq > o.seq;
  }
};

struct LoadState {
  uint32_t pending = 0;
  uint64_t issue_tick = 0;
  uint64_t done_tick = kNever;
};

struct Instr {
  ShardOp op;
  uint32_t interval;
  uint64_t shard_seq;
};

struct PendingRead {
  uint32_t interval;
  uint32_t slot;
  uint64_t ready;
  std::vector<float> data;
};

struct Payload {
  uint32_t interval;
  uint32_t slot;
  std::vector<float> data;
};

struct Engine {
  std::deque<Instr> undelivered;
  std::deque<Instr> queue;
  uint64_t next_dispatch = 0;
  uint64_t eu_free = 0;
  uint64_t shard_counter = 0;
  uint64_t cur_shard = kNever;
  std::vector<uint64_t> cur_tags;
  uint64_t cur_done = 0;
  uint64_t prev_done = 0;
  std::deque<std::pair<uint64_t, std::vector<uint64_t>>> evict_q;
  std::unordered_map<uint64_t, LoadState> loads;
  std::deque<PendingRead> pending_r;
  uint32_t credits = 0;
  std::unique_ptr<NmeDatapath> dp;
};

struct Target {
  uint8_t kind;  // 0 reduce load, 1 host read, 2 host write
  uint32_t owner;
  uint64_t key;
};

struct Job {
  TailWork work;
  std::vector<uint32_t> rank_left;
  uint32_t reads_left = 0;
};

struct Xfer {
  uint32_t job;
  uint32_t access;
};

class TimedRun {
 public:
  explicit TimedRun(SimCore& core)
      : core_(core),
        opt_(core.options()),
        t_(opt_.timing),
        D_(core.placement().num_dimms()),
        dpc_(opt_.shape.dimms_per_channel),
        ranks_(opt_.shape.ranks_per_dimm),
        nmp_(opt_.toggles.nmp) {
    for (uint32_t d = 0; d < D_; ++d) {
      drams_.emplace_back(t_, ranks_, d / dpc_, d % dpc_, opt_.record_commands);
    }
    engines_.resize(D_);
    bus_free_.assign(opt_.shape.channels, 0);
    hostq_.resize(opt_.shape.channels);
    rr_.assign(opt_.shape.channels, 0);
  }

  void run(SimResult& out) {
    for (std::size_t k = 0; k < core_.num_phases(); ++k) {
      run_phase(k);
      ++now_;
    }
    Counters& c = core_.counters();
    c.makespan_cycles = now_;
    for (const DramEngine& e : drams_) {
      c.row_hits += e.row_hits();
      c.row_misses += e.row_misses();
      c.dram_commands += e.commands();
      if (opt_.record_commands) {
        out.commands.insert(out.commands.end(), e.trace().begin(),
                            e.trace().end());
      }
    }
    std::stable_sort(out.commands.begin(), out.commands.end(),
                     [](const CommandRecord& a, const CommandRecord& b) {
                       if (a.cycle != b.cycle) return a.cycle < b.cycle;
                       if (a.channel != b.channel) return a.channel < b.channel;
                       return a.dimm < b.dimm;
                     });
  }

 private:
  uint64_t tick() const { return now_ * kMemCycleTicks; }
  void wake(uint64_t t) { wake_ = std::min(wake_, t); }
  void push(uint64_t tick, Ev kind, uint32_t a, uint64_t b) {
    events_.push({tick, seq_++, kind, a, b});
  }

  void run_phase(std::size_t k) {
    const uint64_t attention = core_.begin_phase(k);
    Counters& c = core_.counters();
    admit_after_ = 0;
    if (attention > 0) {
      uint64_t start = std::max(vpu_free_, tick());
      vpu_free_ = start + attention * kCaeCycleTicks;
      c.vpu_busy_cycles += attention;
      admit_after_ = vpu_free_;
    }
    const uint32_t n_int = core_.num_intervals();
    sched_.reset();
    if (core_.phase_has_aggregate()) {
      dim_ = core_.phase_dim();
      vb_ = core_.phase_vector_bytes();
      sched_ = std::make_unique<WindowScheduler>(opt_.effective_window(), D_,
                                                 n_int, opt_.shard.C, dim_);
      NmeConfig cfg = opt_.nme;
      if (!nmp_) {
        cfg.buffer_bytes = static_cast<uint32_t>(
            std::min<uint64_t>(opt_.cae.scratchpad_bytes, UINT32_MAX));
      }
      for (Engine& e : engines_) {
        e.credits = opt_.cae.fifo_depth;
        e.cur_shard = kNever;
        e.cur_tags.clear();
        e.evict_q.clear();
        e.loads.clear();
        e.dp.reset();
        if (opt_.functional) {
          e.dp = std::make_unique<NmeDatapath>(cfg, dim_, vb_, opt_.shard.C,
                                               core_.precision());
        }
      }
      fixed_ = isa::fixed_latencies(dim_, vb_, opt_.nme, t_);
    } else {
      for (uint32_t i = 0; i < n_int; ++i) start_job(core_.run_tail(i));
    }

    while (true) {
      wake_ = kNever;
      progress_ = false;
      const uint64_t T = tick();
      while (!events_.empty() && events_.top().tick <= T) {
        Event e = events_.top();
        events_.pop();
        handle(e);
      }
      if (sched_) {
        commit();
        admit();
      }
      for (uint32_t ch : deferred_b_) {
        core_.log_words(ch, {isa::encode(isa::BType{})});
      }
      deferred_b_.clear();
      for (uint32_t ch = 0; ch < opt_.shape.channels; ++ch) arbitrate(ch);
      if (sched_) {
        for (uint32_t d = 0; d < D_; ++d) dispatch(d);
      }
      bool pending = false;
      for (uint32_t d = 0; d < D_; ++d) {
        if (!drams_[d].has_pending()) continue;
        pending = true;
        done_.clear();
        drams_[d].tick(now_, done_);
        for (const DramCompletion& dc : done_) {
          push(dc.cycle * kMemCycleTicks, Ev::kDramDone, d, dc.id);
        }
      }
      if (phase_done()) break;
      if (progress_ || pending) {
        ++now_;
        continue;
      }
      uint64_t next = wake_;
      if (!events_.empty()) next = std::min(next, events_.top().tick);
      if (next == kNever) {
        throw StateError("simulation stalled at cycle " + std::to_string(now_) +
                         " with work outstanding");
      }
      now_ = std::max(now_ + 1, to_cycle(next));
    }
    if (sched_) {
      core_.phase_log().commits = sched_->commit_log();
      for (Engine& e : engines_) {
        if (e.dp) {
          c.buffer_high_water =
              std::max(c.buffer_high_water, e.dp->high_water_bytes());
        }
      }
    }
  }

  bool phase_done() const {
    if (sched_ && !sched_->done()) return false;
    if (jobs_open_ > 0 || !events_.empty()) return false;
    for (const auto& q : hostq_) {
      if (!q.empty()) return false;
    }
    for (const DramEngine& e : drams_) {
      if (e.has_pending()) return false;
    }
    return true;
  }

  // ---- Events ----

  void handle(const Event& e) {
    Counters& c = core_.counters();
    switch (e.kind) {
      case Ev::kDramDone: {
        const Target tg = targets_[e.b];
        if (tg.kind == 0) {
          LoadState& ls = engines_[tg.owner].loads[tg.key];
          if (--ls.pending == 0) {
            ls.done_tick = e.tick;
            c.nme_buffer_ticks += e.tick - ls.issue_tick;
          }
        } else if (tg.kind == 1) {
          Job& j = jobs_[tg.owner];
          if (--j.rank_left[tg.key] == 0 && --j.reads_left == 0) compute(tg.owner);
        }
        break;
      }
      case Ev::kFifoArrive: {
        uint64_t start = std::max(vpu_free_, e.tick);
        uint64_t cyc = vpu_cycles(dim_, opt_.cae);
        vpu_free_ = start + cyc * kCaeCycleTicks;
        c.vpu_busy_cycles += cyc;
        c.vpu_ops += dim_;
        push(vpu_free_, Ev::kMergeDone, e.a, e.b);
        break;
      }
      case Ev::kMergeDone:
        merge(e.b);
        ++engines_[e.a].credits;
        break;
      case Ev::kDirectMerge:
        merge(e.b);
        break;
      case Ev::kTailDone: {
        Job& j = jobs_[e.a];
        for (uint32_t k = 0; k < j.work.accesses.size(); ++k) {
          const HostAccess& acc = j.work.accesses[k];
          if (acc.write) hostq_[acc.dimms[0] / dpc_].push_back({e.a, k});
        }
        --jobs_open_;
        break;
      }
    }
  }

  void merge(uint64_t id) {
    auto it = payloads_.find(id);
    Payload& p = it->second;
    if (opt_.functional) {
      sched_->merge(p.interval, p.slot, p.data);
    } else {
      sched_->merge_count(p.interval);
    }
    payloads_.erase(it);
  }

  // ---- Tail jobs ----

  void start_job(TailWork w) {
    for (uint32_t ch : w.broadcast_channels) deferred_b_.push_back(ch);
    const uint32_t id = static_cast<uint32_t>(jobs_.size());
    Job j;
    j.rank_left.assign(w.accesses.size(), 0);
    for (uint32_t k = 0; k < w.accesses.size(); ++k) {
      const HostAccess& acc = w.accesses[k];
      if (acc.write) continue;
      ++j.reads_left;
      hostq_[acc.dimms[0] / dpc_].push_back({id, k});
    }
    j.work = std::move(w);
    jobs_.push_back(std::move(j));
    ++jobs_open_;
    if (jobs_.back().reads_left == 0) compute(id);
  }

  void compute(uint32_t id) {
    Job& j = jobs_[id];
    Counters& c = core_.counters();
    uint64_t done = tick();
    if (j.work.gemm_cycles > 0) {
      uint64_t start = std::max(gemm_free_, done);
      gemm_free_ = start + j.work.gemm_cycles * kCaeCycleTicks;
      c.gemm_busy_cycles += j.work.gemm_cycles;
      done = gemm_free_;
    }
    if (j.work.vpu_cycles > 0) {
      uint64_t start = std::max(vpu_free_, done);
      vpu_free_ = start + j.work.vpu_cycles * kCaeCycleTicks;
      c.vpu_busy_cycles += j.work.vpu_cycles;
      done = vpu_free_;
    }
    push(done, Ev::kTailDone, id, 0);
  }

  // ---- Interval commit and admission ----

  void commit() {
    while (sched_->ready_to_commit()) {
      const uint32_t i = sched_->committed();
      std::vector<float> rows = sched_->commit();
      core_.commit_rows(i, rows);
      core_.release_programs(i);
      start_job(core_.run_tail(i));
      progress_ = true;
    }
  }

  void admit() {
    if (tick() < admit_after_) {
      wake(admit_after_);
      return;
    }
    for (uint32_t d = 0; d < D_; ++d) {
      if (!sched_->may_admit(d)) continue;
      const uint32_t i = sched_->next_interval(d);
      const DimmProgram& prog = core_.programs(i)[d];
      sched_->admit(d, prog.reads);
      core_.account_program(prog);
      progress_ = true;
      if (prog.empty()) {
        sched_->finish_issue(d);
        continue;
      }
      if (nmp_) core_.log_words(d / dpc_, core_.program_words(prog));
      Engine& e = engines_[d];
      uint32_t max_shard = 0;
      const uint64_t base = e.shard_counter;
      auto& dst = nmp_ ? e.undelivered : e.queue;
      for (const ShardOp& op : prog.ops) {
        max_shard = std::max(max_shard, op.shard);
        dst.push_back({op, i, base + op.shard});
      }
      e.shard_counter = base + max_shard + 1;
      if (!nmp_) sched_->finish_issue(d);
    }
  }

  // ---- Channel path ----

  bool engines_accept(const HostAccess& acc) const {
    for (uint32_t g : acc.dimms) {
      if (drams_[g].queued(acc.write) + ranks_ > t_.queue_depth) return false;
    }
    return true;
  }

  uint64_t transfer_cycles(uint32_t bytes) const {
    return ceil_div(bytes, t_.burst_bytes) * t_.tBL;
  }

  // Splits one vertex vector into per-rank requests on DIMM g.
  uint32_t enqueue_vector(uint32_t v, DataType type, uint32_t layer,
                          uint32_t g, bool write, Target tg) {
    const AddressMap& am = core_.address_map();
    const uint32_t vb = am.vector_bytes(type, layer);
    const uint32_t sub = am.subvector_bytes(type, layer);
    uint32_t n = 0;
    for (uint32_t r = 0; r < ranks_; ++r) {
      const uint32_t off = r * sub;
      if (off >= vb) break;
      DramCoord c = am.map_on(v, type, layer, off, g);
      const uint32_t bytes = std::min(sub, vb - off);
      DramRequest req{targets_.size(), write, c.rank, c.bank, c.row, c.column,
                      static_cast<uint32_t>(ceil_div(bytes, t_.burst_bytes))};
      targets_.push_back(tg);
      if (!drams_[g].enqueue(req)) throw StateError("DRAM queue overflow");
      ++n;
    }
    return n;
  }

  void arbitrate(uint32_t ch) {
    Counters& c = core_.counters();
    const uint64_t T = tick();
    const bool busy = bus_free_[ch] > now_;
    // Partial-result readouts first.
    int best = -1;
    for (uint32_t k = 0; k < dpc_; ++k) {
      const uint32_t d = ch * dpc_ + k;
      Engine& e = engines_[d];
      if (e.pending_r.empty()) continue;
      const PendingRead& pr = e.pending_r.front();
      if (pr.ready > T) {
        wake(pr.ready);
        continue;
      }
      if (e.credits == 0) {
        ++c.fifo_stall_cycles;
        continue;
      }
      if (busy) continue;
      if (best < 0 || pr.ready < engines_[best].pending_r.front().ready) {
        best = static_cast<int>(d);
      }
    }
    if (busy) {
      if (!hostq_[ch].empty() || best >= 0 || has_undelivered(ch)) {
        wake(bus_free_[ch] * kMemCycleTicks);
      }
      return;
    }
    if (best >= 0) {
      Engine& e = engines_[best];
      PendingRead pr = std::move(e.pending_r.front());
      e.pending_r.pop_front();
      --e.credits;
      bus_free_[ch] = now_ + fixed_.nme_rd;
      const uint64_t id = next_payload_++;
      payloads_[id] = {pr.interval, pr.slot, std::move(pr.data)};
      push(bus_free_[ch] * kMemCycleTicks, Ev::kFifoArrive,
           static_cast<uint32_t>(best), id);
      progress_ = true;
      return;
    }
    if (!hostq_[ch].empty()) {
      const Xfer x = hostq_[ch].front();
      const HostAccess& acc = jobs_[x.job].work.accesses[x.access];
      if (!engines_accept(acc)) return;
      hostq_[ch].pop_front();
      uint32_t n = 0;
      for (uint32_t g : acc.dimms) {
        n = enqueue_vector(acc.vertex, acc.type, acc.layer, g, acc.write,
                           Target{static_cast<uint8_t>(acc.write ? 2 : 1),
                                  x.job, x.access});
      }
      if (!acc.write) jobs_[x.job].rank_left[x.access] = n;
      bus_free_[ch] = now_ + transfer_cycles(
                                 core_.address_map().vector_bytes(acc.type, acc.layer));
      progress_ = true;
      return;
    }
    if (!nmp_ || !sched_) return;
    for (uint32_t k = 0; k < dpc_; ++k) {
      const uint32_t local = (rr_[ch] + k) % dpc_;
      const uint32_t d = ch * dpc_ + local;
      Engine& e = engines_[d];
      if (e.undelivered.empty() || e.queue.size() >= t_.queue_depth) continue;
      e.queue.push_back(e.undelivered.front());
      e.undelivered.pop_front();
      if (e.undelivered.empty()) sched_->finish_issue(d);
      bus_free_[ch] = now_ + 1;
      rr_[ch] = (local + 1) % dpc_;
      progress_ = true;
      return;
    }
  }

  bool has_undelivered(uint32_t ch) const {
    for (uint32_t k = 0; k < dpc_; ++k) {
      if (!engines_[ch * dpc_ + k].undelivered.empty()) return true;
    }
    return false;
  }

  // ---- Engine dispatch ----

  void dispatch(uint32_t d) {
    Engine& e = engines_[d];
    const uint64_t T = tick();
    while (!e.evict_q.empty() && e.evict_q.front().first <= T) {
      for (uint64_t tag : e.evict_q.front().second) {
        if (e.dp) e.dp->evict(tag);
        e.loads.erase(tag);
      }
      e.evict_q.pop_front();
    }
    if (e.queue.empty()) return;
    if (T < e.next_dispatch) {
      wake(e.next_dispatch);
      return;
    }
    const uint64_t pace = nmp_ ? kNmeCycleTicks : kCaeCycleTicks;
    Counters& c = core_.counters();
    Instr& ins = e.queue.front();
    const ShardOp& op = ins.op;
    const uint32_t ch = d / dpc_;
    switch (op.kind) {
      case ShardOp::kLoad: {
        if (ins.shard_seq != e.cur_shard) {
          const uint64_t gate =
              opt_.toggles.overlap ? e.prev_done : e.cur_done;
          if (gate > T) {
            wake(gate);
            return;
          }
        }
        if (drams_[d].queued(false) + ranks_ > t_.queue_depth) {
          ++c.queue_stall_cycles;
          return;
        }
        if (!nmp_ && bus_free_[ch] > now_) {
          wake(bus_free_[ch] * kMemCycleTicks);
          return;
        }
        if (ins.shard_seq != e.cur_shard) {
          if (e.cur_shard != kNever) {
            e.evict_q.emplace_back(e.cur_done, std::move(e.cur_tags));
            e.cur_tags.clear();
          }
          e.prev_done = e.cur_done;
          e.cur_shard = ins.shard_seq;
        }
        const uint64_t tag = (ins.shard_seq << 32) | op.vertex;
        if (e.dp) e.dp->exec_l(tag, core_.source_row(op.vertex));
        e.cur_tags.push_back(tag);
        LoadState& ls = e.loads[tag];
        ls.issue_tick = T;
        ls.pending = enqueue_vector(op.vertex, core_.phase_type(),
                                    core_.phase_layer(), d, false,
                                    Target{0, d, tag});
        if (!nmp_) bus_free_[ch] = now_ + transfer_cycles(vb_);
        break;
      }
      case ShardOp::kCompute: {
        const uint64_t tag = (ins.shard_seq << 32) | op.vertex;
        auto it = e.loads.find(tag);
        if (it == e.loads.end()) throw StateError("compute without a load");
        if (it->second.done_tick == kNever) return;  // awaiting DRAM
        uint64_t start = std::max({e.eu_free, T, it->second.done_tick});
        uint64_t cost;
        if (nmp_) {
          cost = fixed_.nme_cd_eu_cycles * kNmeCycleTicks;
          start = std::max(start, e.eu_free);
          c.nme_eu_ticks += cost;
          c.nme_buffer_ticks += cost;
        } else {
          const uint64_t cyc = vpu_cycles(dim_, opt_.cae);
          start = std::max(start, vpu_free_);
          cost = cyc * kCaeCycleTicks;
          vpu_free_ = start + cost;
          c.vpu_busy_cycles += cyc;
        }
        e.eu_free = start + cost;
        e.cur_done = e.eu_free;
        if (e.dp) {
          isa::CType ct{static_cast<uint8_t>(d % dpc_), op.op,
                        float_to_bf16(op.weight), op.slot};
          e.dp->exec_c(ct, tag, op.weight);
        }
        break;
      }
      case ShardOp::kRead: {
        std::vector<float> data;
        if (e.dp) {
          data = e.dp->exec_r(
              isa::RType{static_cast<uint8_t>(d % dpc_), op.slot, vb_});
        }
        const uint64_t ready = std::max(e.eu_free, T);
        if (nmp_) {
          e.pending_r.push_back({ins.interval, op.slot, ready, std::move(data)});
        } else {
          const uint64_t id = next_payload_++;
          payloads_[id] = {ins.interval, op.slot, std::move(data)};
          push(ready, Ev::kDirectMerge, d, id);
        }
        break;
      }
    }
    e.queue.pop_front();
    e.next_dispatch = T + pace;
    progress_ = true;
  }

  SimCore& core_;
  const SimOptions& opt_;
  const TimingParams& t_;
  uint32_t D_;
  uint32_t dpc_;
  uint32_t ranks_;
  bool nmp_;

  uint64_t now_ = 0;
  uint64_t wake_ = kNever;
  bool progress_ = false;
  uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;

  std::vector<DramEngine> drams_;
  std::vector<DramCompletion> done_;
  std::vector<Target> targets_;
  std::vector<Engine> engines_;
  std::vector<uint64_t> bus_free_;
  std::vector<std::deque<Xfer>> hostq_;
  std::vector<uint32_t> rr_;
  std::vector<uint32_t> deferred_b_;

  std::unique_ptr<WindowScheduler> sched_;
  uint64_t admit_after_ = 0;
  uint32_t dim_ = 0;
  uint32_t vb_ = 0;
  isa::FixedLatencies fixed_{};
  uint64_t gemm_free_ = 0;
  uint64_t vpu_free_ = 0;
  std::vector<Job> jobs_;
  uint32_t jobs_open_ = 0;
  std::unordered_map<uint64_t, Payload> payloads_;
  uint64_t next_payload_ = 0;
};

}  // namespace

void run_timed(SimCore& core, SimResult& out) {
  TimedRun run(core);
  run.run(out);
}

}  // namespace gnnear
