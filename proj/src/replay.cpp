#include "ulcpkit/replay.hpp"

#include <algorithm>
#include <deque>

#include "scheduler.hpp"
#include "ulcpkit/error.hpp"

namespace ulcp {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::Orig: return "ORIG";
    case Policy::Sync: return "SYNC";
    case Policy::Mem: return "MEM";
    case Policy::Elsc: return "ELSC";
  }
  return "?";
}

std::optional<Policy> policy_from_string(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "ORIG") return Policy::Orig;
  if (up == "SYNC") return Policy::Sync;
  if (up == "MEM") return Policy::Mem;
  if (up == "ELSC") return Policy::Elsc;
  return std::nullopt;
}

std::string time1_label(SectionId id) { return "C" + std::to_string(id) + ".time1"; }
std::string time2_label(SectionId id) { return "C" + std::to_string(id) + ".time2"; }

namespace {

using detail::SchedulerConfig;

void add_tickets(SchedulerConfig& cfg, const std::map<LockId, std::vector<EventRef>>& orders) {
  for (const auto& [lock, refs] : orders) {
    auto& owners = cfg.ticket_owner[lock];
    for (std::size_t i = 0; i < refs.size(); ++i) {
      cfg.ticket[{refs[i].tid, static_cast<std::size_t>(refs[i].seq)}] = static_cast<std::int64_t>(i);
      owners.push_back(refs[i].tid);
    }
  }
}

std::map<LockId, std::vector<EventRef>> round_robin_orders(const Trace& trace) {
  std::map<LockId, std::map<Tid, std::deque<EventRef>>> queues;
  for (const auto& [tid, events] : trace.threads)
    for (const auto& ev : events)
      if (ev.kind == EventKind::LockAcq) queues[*ev.lock][tid].push_back({tid, ev.seq});
  std::map<LockId, std::vector<EventRef>> out;
  for (auto& [lock, per_thread] : queues) {
    auto& seq = out[lock];
    bool any = true;
    while (any) {
      any = false;
      for (auto& [tid, q] : per_thread) {
        if (q.empty()) continue;
        seq.push_back(q.front());
        q.pop_front();
        any = true;
      }
    }
  }
  return out;
}

void add_sections(SchedulerConfig& cfg, const Trace& trace) {
  std::map<SectionId, std::vector<SectionId>> preds;
  for (const auto& c : trace.order) preds[c.after].push_back(c.before);
  std::map<std::pair<Tid, std::size_t>, std::size_t> owner_width;
  for (const auto& s : trace.sections) {
    detail::GatedSection g;
    g.id = s.id;
    g.tid = s.tid;
    g.begin = s.begin;
    g.end = s.end;
    g.lockset = s.lockset;
    g.sources = s.sources;
    g.out_lock = s.out_lock;
    if (const auto it = preds.find(s.id); it != preds.end()) g.predecessors = it->second;
    cfg.sections.push_back(std::move(g));

    const auto& events = trace.threads.at(s.tid);
    const std::size_t width = s.end - s.begin;
    for (std::size_t i = s.begin; i < s.end && i < events.size(); ++i) {
      const auto& ev = events[i];
      if (ev.kind != EventKind::LockAcq && ev.kind != EventKind::LockRel) continue;
      if (std::find(s.lockset.begin(), s.lockset.end(), *ev.lock) == s.lockset.end()) continue;
      const std::pair key{s.tid, i};
      const auto w = owner_width.find(key);
      if (w != owner_width.end() && w->second <= width) continue;
      owner_width[key] = width;
      cfg.aux_owner[key] = s.id;
    }
  }
}

SchedulerConfig base_config(const Trace& trace, const ReplayOptions& options) {
  SchedulerConfig cfg;
  cfg.seed = options.seed;
  cfg.stall_error = ErrorCode::OrderUnsatisfiable;
  cfg.dynamic_locking = options.dynamic_locking;
  cfg.track_clocks = options.track_clocks;
  cfg.initial_memory = trace.initial_memory;
  add_sections(cfg, trace);
  return cfg;
}

ReplayResult run(const Trace& trace, const SchedulerConfig& cfg, const StepObserver& observer) {
  std::vector<std::pair<Tid, std::unique_ptr<detail::EventSource>>> sources;
  for (const auto& [tid, events] : trace.threads)
    sources.emplace_back(tid, std::make_unique<detail::VectorSource>(events));
  auto out = detail::run_scheduler(std::move(sources), cfg, observer);
  detail::fill_timestamps(section_spans(trace), out.result);
  return std::move(out.result);
}

}  // namespace

ReplayResult replay(const Trace& trace, const ReplayOptions& options, const StepObserver& observer) {
  auto cfg = base_config(trace, options);
  switch (options.policy) {
    case Policy::Orig:
      cfg.random_ties = true;
      break;
    case Policy::Elsc:
      add_tickets(cfg, trace.lock_orders);
      break;
    case Policy::Sync:
      add_tickets(cfg, round_robin_orders(trace));
      break;
    case Policy::Mem: {
      add_tickets(cfg, trace.lock_orders);
      ReplayOptions elsc = options;
      elsc.policy = Policy::Elsc;
      elsc.track_clocks = false;
      cfg.memory_order = replay(trace, elsc).memory_order;
      break;
    }
  }
  return run(trace, cfg, observer);
}

ReplaySeries replay_n(const Trace& trace, Policy policy, int runs, std::uint64_t seed, bool dynamic_locking) {
  ReplaySeries series;
  for (int i = 0; i < runs; ++i) {
    ReplayOptions opts;
    opts.policy = policy;
    opts.seed = policy == Policy::Orig ? seed + static_cast<std::uint64_t>(i) : seed;
    opts.dynamic_locking = dynamic_locking;
    series.results.push_back(replay(trace, opts));
  }
  if (series.results.empty()) return series;
  double sum = 0.0;
  for (const auto& r : series.results) sum += static_cast<double>(r.makespan);
  series.mean_makespan = sum / static_cast<double>(series.results.size());
  double sq = 0.0;
  for (const auto& r : series.results) {
    const double d = static_cast<double>(r.makespan) - series.mean_makespan;
    sq += d * d;
  }
  series.variance = sq / static_cast<double>(series.results.size());
  for (const auto& r : series.results)
    if (!(r == series.results.front())) series.identical = false;
  return series;
}

}  // namespace ulcp
