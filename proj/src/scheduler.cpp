#include "scheduler.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace ulcp::detail {
namespace {

constexpr int kNone = -1;

struct ThreadState {
  Tid tid = 0;
  std::unique_ptr<EventSource> source;
  std::int64_t clock = 0;
  ThreadTiming timing;
  Registers regs;
  std::size_t pc = 0;
  bool done = false;
  bool blocked = false;
  int waits_on = kNone;
  std::vector<std::int64_t> arrivals{0};
  VectorClock vc;
  std::set<LockId> skipped;
};

struct SectionState {
  bool entered = false;
  bool ended = false;
  std::int64_t end_time = 0;
  VectorClock vc;
  std::set<LockId> excluded;
};

struct TicketState {
  std::vector<bool> consumed;
  std::size_t next = 0;
};

enum class GateKind { Ready, Delay, Block };

struct Gate {
  GateKind kind = GateKind::Ready;
  std::int64_t time = 0;
  int slot = kNone;
};

void join(VectorClock& into, const VectorClock& from) {
  for (std::size_t i = 0; i < into.size() && i < from.size(); ++i) into[i] = std::max(into[i], from[i]);
}

class Scheduler {
 public:
  Scheduler(std::vector<std::pair<Tid, std::unique_ptr<EventSource>>> sources, const SchedulerConfig& config,
            const StepObserver& observer)
      : config_(config), observer_(observer), rng_(config.seed) {
    for (auto& [tid, src] : sources) {
      slot_of_[tid] = static_cast<int>(threads_.size());
      ThreadState th;
      th.tid = tid;
      th.source = std::move(src);
      threads_.push_back(std::move(th));
    }
    const auto n = threads_.size();
    for (std::size_t s = 0; s < n; ++s) {
      threads_[s].vc.assign(n, 0);
      threads_[s].vc[s] = 1;
    }
    memory_ = config.initial_memory;
    for (const auto& [lock, owners] : config.ticket_owner) tickets_[lock].consumed.assign(owners.size(), false);
    for (std::size_t i = 0; i < config.memory_order.size(); ++i) {
      const auto& ref = config.memory_order[i];
      mem_pos_[{ref.tid, static_cast<std::size_t>(ref.seq)}] = i;
    }
    mem_started_.assign(config.memory_order.size(), false);
    mem_end_.assign(config.memory_order.size(), 0);
    sections_.resize(config.sections.size());
    for (std::size_t i = 0; i < config.sections.size(); ++i) {
      const auto& s = config.sections[i];
      section_index_[s.id] = i;
      begins_[{s.tid, s.begin}].push_back(i);
      ends_[{s.tid, s.end}].push_back(i);
    }
    for (std::size_t s = 0; s < n; ++s) close_sections(static_cast<int>(s), 0);
  }

  SchedulerOutput run() {
    for (;;) {
      std::int64_t tmin = std::numeric_limits<std::int64_t>::max();
      ties_.clear();
      bool all_done = true;
      for (std::size_t s = 0; s < threads_.size(); ++s) {
        const auto& th = threads_[s];
        if (th.done) continue;
        all_done = false;
        if (th.blocked) continue;
        if (th.clock < tmin) {
          tmin = th.clock;
          ties_.assign(1, static_cast<int>(s));
        } else if (th.clock == tmin) {
          ties_.push_back(static_cast<int>(s));
        }
      }
      if (all_done) break;
      if (ties_.empty()) stall();
      // A thread that has been waiting longer is not simultaneous with a newcomer.
      std::int64_t first_arrival = std::numeric_limits<std::int64_t>::max();
      for (const int s : ties_) first_arrival = std::min(first_arrival, threads_[static_cast<std::size_t>(s)].arrivals.back());
      std::erase_if(ties_, [&](int s) { return threads_[static_cast<std::size_t>(s)].arrivals.back() != first_arrival; });
      const int slot = (config_.random_ties && ties_.size() > 1)
                           ? ties_[static_cast<std::size_t>(rng_() % ties_.size())]
                           : ties_.front();
      auto& th = threads_[slot];
      const TraceEvent* ev = th.source->peek(th.regs);
      if (ev == nullptr) {
        th.done = true;
        th.timing.completion = th.clock;
        continue;
      }
      const Gate g = gate(slot, *ev);
      if (g.kind == GateKind::Delay) {
        th.timing.wait += g.time - th.clock;
        th.clock = g.time;
        continue;
      }
      if (g.kind == GateKind::Block) {
        th.blocked = true;
        th.waits_on = g.slot;
        continue;
      }
      execute(slot, *ev);
    }
    return finish();
  }

 private:
  int slot_of(Tid tid) const {
    const auto it = slot_of_.find(tid);
    return it == slot_of_.end() ? kNone : it->second;
  }

  Gate gate(int slot, const TraceEvent& ev) {
    auto& th = threads_[slot];
    const std::size_t idx = th.pc;
    if (const auto it = begins_.find({th.tid, idx}); it != begins_.end()) {
      for (const auto si : it->second) {
        auto& ss = sections_[si];
        if (ss.entered) continue;
        const auto& sec = config_.sections[si];
        for (const auto pred : sec.predecessors) {
          const auto pi = section_index_.at(pred);
          const auto& ps = sections_[pi];
          if (!ps.ended) return {GateKind::Block, 0, slot_of(config_.sections[pi].tid)};
          if (ps.end_time > th.clock) return {GateKind::Delay, ps.end_time, kNone};
        }
        ss.entered = true;
        for (const auto pred : sec.predecessors) join(th.vc, sections_[section_index_.at(pred)].vc);
        if (config_.dynamic_locking) {
          for (const auto src : sec.sources) {
            const auto srci = section_index_.at(src);
            const auto& srcs = sections_[srci];
            const auto& out = config_.sections[srci].out_lock;
            if (srcs.ended && srcs.end_time <= th.clock && out) {
              ss.excluded.insert(*out);
              join(th.vc, srcs.vc);
            }
          }
        }
      }
    }
    switch (ev.kind) {
      case EventKind::LockAcq: {
        const auto& lock = *ev.lock;
        if (excluded(th.tid, idx, lock)) return {};
        if (const auto tk = config_.ticket.find({th.tid, idx}); tk != config_.ticket.end()) {
          const auto& state = tickets_.at(lock);
          if (static_cast<std::int64_t>(state.next) != tk->second) {
            const auto& owners = config_.ticket_owner.at(lock);
            const int owner = state.next < owners.size() ? slot_of(owners[state.next]) : kNone;
            return {GateKind::Block, 0, owner};
          }
        }
        if (const auto h = holder_.find(lock); h != holder_.end() && h->second != kNone)
          return {GateKind::Block, 0, h->second};
        return {};
      }
      case EventKind::Read:
      case EventKind::Write: {
        const auto mp = mem_pos_.find({th.tid, idx});
        if (mp == mem_pos_.end() || mp->second == 0) return {};
        const auto prev = mp->second - 1;
        if (!mem_started_[prev]) return {GateKind::Block, 0, slot_of(config_.memory_order[prev].tid)};
        if (mem_end_[prev] > th.clock) return {GateKind::Delay, mem_end_[prev], kNone};
        return {};
      }
      default:
        return {};
    }
  }

  bool excluded(Tid tid, std::size_t idx, const LockId& lock) const {
    const auto it = config_.aux_owner.find({tid, idx});
    if (it == config_.aux_owner.end()) return false;
    return sections_[section_index_.at(it->second)].excluded.contains(lock);
  }

  void consume_ticket(Tid tid, std::size_t idx, const LockId& lock) {
    const auto tk = config_.ticket.find({tid, idx});
    if (tk == config_.ticket.end()) return;
    auto& state = tickets_.at(lock);
    state.consumed[static_cast<std::size_t>(tk->second)] = true;
    while (state.next < state.consumed.size() && state.consumed[state.next]) ++state.next;
  }

  void execute(int slot, const TraceEvent& ev) {
    auto& th = threads_[slot];
    const std::int64_t start = th.clock;
    const std::size_t idx = th.pc;
    bool changed = false;
    if (observer_) observer_(th.tid, idx, ev, memory_, th.regs);
    switch (ev.kind) {
      case EventKind::LockAcq: {
        const auto& lock = *ev.lock;
        consume_ticket(th.tid, idx, lock);
        if (excluded(th.tid, idx, lock)) {
          th.skipped.insert(lock);
        } else {
          holder_[lock] = slot;
          result_.holds[lock].push_back({th.tid, start, start});
          result_.realized_lock_order[lock].push_back({th.tid, static_cast<std::int64_t>(idx)});
          if (is_aux_lock(lock)) ++result_.aux_acquisitions;
          if (const auto lv = lock_vc_.find(lock); lv != lock_vc_.end()) join(th.vc, lv->second);
        }
        changed = true;
        break;
      }
      case EventKind::LockRel: {
        const auto& lock = *ev.lock;
        if (th.skipped.erase(lock) == 0) {
          holder_[lock] = kNone;
          result_.holds[lock].back().released = start;
          lock_vc_[lock] = th.vc;
          ++th.vc[slot];
          changed = true;
        }
        break;
      }
      case EventKind::Read:
      case EventKind::Write: {
        const auto& addr = *ev.addr;
        if (ev.kind == EventKind::Read) {
          const auto it = memory_.find(addr);
          th.regs[*ev.reg] = it == memory_.end() ? 0 : it->second;
        } else if (ev.valexpr) {
          memory_[addr] = ev.valexpr->evaluate(th.regs);
        }
        result_.memory_order.push_back({th.tid, static_cast<std::int64_t>(idx)});
        if (config_.track_clocks)
          result_.accesses.push_back({th.tid, idx, addr, ev.kind == EventKind::Write, start, th.vc});
        if (const auto mp = mem_pos_.find({th.tid, idx}); mp != mem_pos_.end()) {
          mem_started_[mp->second] = true;
          mem_end_[mp->second] = start + ev.cost;
          changed = true;
        }
        break;
      }
      default:
        break;
    }
    auto& out = executed_[th.tid];
    out.push_back(ev);
    out.back().tid = th.tid;
    out.back().seq = static_cast<std::int64_t>(idx);

    th.clock += ev.cost;
    th.timing.busy += ev.cost;
    ++th.pc;
    th.source->advance();
    th.arrivals.push_back(th.clock);
    if (close_sections(slot, th.pc)) changed = true;

    if (changed) {
      for (auto& other : threads_) {
        if (!other.blocked) continue;
        other.blocked = false;
        other.waits_on = kNone;
        if (other.clock < start) {
          other.timing.wait += start - other.clock;
          other.clock = start;
        }
      }
    }
  }

  bool close_sections(int slot, std::size_t pos) {
    auto& th = threads_[slot];
    const auto it = ends_.find({th.tid, pos});
    if (it == ends_.end()) return false;
    for (const auto si : it->second) {
      auto& ss = sections_[si];
      ss.ended = true;
      ss.end_time = th.clock;
      ss.vc = th.vc;
    }
    ++th.vc[slot];
    return true;
  }

  [[noreturn]] void stall() {
    std::ostringstream os;
    os << "no thread can make progress; wait cycle:";
    int start = kNone;
    for (std::size_t s = 0; s < threads_.size(); ++s)
      if (threads_[s].blocked) {
        start = static_cast<int>(s);
        break;
      }
    std::vector<int> seen;
    int cur = start;
    while (cur != kNone && std::find(seen.begin(), seen.end(), cur) == seen.end()) {
      seen.push_back(cur);
      cur = threads_[cur].blocked ? threads_[cur].waits_on : kNone;
    }
    const auto from = cur == kNone ? seen.begin() : std::find(seen.begin(), seen.end(), cur);
    for (auto it = from; it != seen.end(); ++it) os << " T" << threads_[*it].tid << " ->";
    if (cur != kNone) os << " T" << threads_[cur].tid;
    else os << " (finished thread)";
    throw Error(config_.stall_error, os.str());
  }

  SchedulerOutput finish() {
    for (auto& th : threads_) {
      th.timing.completion = th.clock;
      result_.per_thread[th.tid] = th.timing;
      result_.makespan = std::max(result_.makespan, th.clock);
      result_.arrivals[th.tid] = std::move(th.arrivals);
    }
    result_.final_memory = memory_;
    return SchedulerOutput{std::move(result_), std::move(executed_)};
  }

  const SchedulerConfig& config_;
  const StepObserver& observer_;
  std::mt19937_64 rng_;
  std::vector<ThreadState> threads_;
  std::map<Tid, int> slot_of_;
  std::vector<int> ties_;
  Memory memory_;
  std::map<LockId, int> holder_;
  std::map<LockId, VectorClock> lock_vc_;
  std::map<LockId, TicketState> tickets_;
  std::map<std::pair<Tid, std::size_t>, std::size_t> mem_pos_;
  std::vector<bool> mem_started_;
  std::vector<std::int64_t> mem_end_;
  std::vector<SectionState> sections_;
  std::map<SectionId, std::size_t> section_index_;
  std::map<std::pair<Tid, std::size_t>, std::vector<std::size_t>> begins_;
  std::map<std::pair<Tid, std::size_t>, std::vector<std::size_t>> ends_;
  ReplayResult result_;
  std::map<Tid, std::vector<TraceEvent>> executed_;
};

}  // namespace

SchedulerOutput run_scheduler(std::vector<std::pair<Tid, std::unique_ptr<EventSource>>> sources,
                              const SchedulerConfig& config, const StepObserver& observer) {
  Scheduler sched(std::move(sources), config, observer);
  return sched.run();
}

void fill_timestamps(const std::vector<SectionSpan>& spans, ReplayResult& result) {
  std::map<Tid, std::vector<const SectionSpan*>> by_thread;
  for (const auto& s : spans) by_thread[s.tid].push_back(&s);
  for (const auto& [tid, list] : by_thread) {
    const auto arr = result.arrivals.find(tid);
    if (arr == result.arrivals.end()) continue;
    const auto& arrivals = arr->second;
    auto at = [&](std::size_t pos) { return arrivals[std::min(pos, arrivals.size() - 1)]; };
    std::vector<std::int64_t> time1(list.size()), time2(list.size());
    std::multiset<std::size_t> ends;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto it = ends.upper_bound(list[i]->begin);
      time1[i] = it == ends.begin() ? 0 : at(*std::prev(it));
      ends.insert(list[i]->end);
    }
    std::multiset<std::size_t> begins;
    for (std::size_t i = list.size(); i-- > 0;) {
      const auto it = begins.lower_bound(list[i]->end);
      time2[i] = it == begins.end() ? arrivals.back() : at(*it);
      begins.insert(list[i]->begin);
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      result.timestamps[time1_label(list[i]->id)] = time1[i];
      result.timestamps[time2_label(list[i]->id)] = time2[i];
    }
  }
}

}  // namespace ulcp::detail
