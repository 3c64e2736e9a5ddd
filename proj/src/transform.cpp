#include "ulcpkit/transform.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <tuple>

#include "ulcpkit/error.hpp"

namespace ulcp {

std::vector<SectionId> Topology::sources(SectionId node) const {
  std::vector<SectionId> out;
  for (const auto& [s, d] : edges)
    if (d == node) out.push_back(s);
  return out;
}

std::vector<SectionId> Topology::targets(SectionId node) const {
  std::vector<SectionId> out;
  for (auto it = edges.lower_bound({node, std::numeric_limits<SectionId>::min()});
       it != edges.end() && it->first == node; ++it)
    out.push_back(it->second);
  return out;
}

Topology build_topology(PairClassifier& classifier, const std::vector<UlcpPair>& pairs) {
  std::map<std::pair<SectionId, SectionId>, Category> known;
  for (const auto& p : pairs) known[{p.c1, p.c2}] = p.category;
  auto verdict = [&](SectionId a, SectionId b) {
    if (const auto it = known.find({a, b}); it != known.end()) return it->second;
    return classifier.classify(a, b).category;
  };

  const auto& secs = classifier.sections();
  std::map<LockId, std::map<Tid, std::vector<SectionId>>> by_lock;
  for (const auto& s : secs) by_lock[s.lock][s.tid].push_back(s.id);

  Topology topo;
  for (const auto& s : secs) {
    topo.nodes.push_back(s.id);
    for (const auto& [tid, list] : by_lock.at(s.lock)) {
      if (tid == s.tid) continue;
      for (const auto other : list) {
        if (classifier.section(other).acq_ord <= s.acq_ord) continue;
        if (!is_ulcp(verdict(s.id, other))) {
          topo.edges.insert({s.id, other});
          break;
        }
      }
    }
  }
  std::set<SectionId> incident;
  for (const auto& [a, b] : topo.edges) {
    incident.insert(a);
    incident.insert(b);
  }
  for (const auto id : topo.nodes)
    if (!incident.contains(id)) topo.standalone.push_back(id);
  pin_partial_order(topo, secs);
  return topo;
}

Topology build_topology(const Trace& trace, const std::vector<UlcpPair>& pairs) {
  PairClassifier classifier(trace);
  return build_topology(classifier, pairs);
}

void pin_partial_order(Topology& topology, const std::vector<CriticalSection>& sections) {
  std::set<SectionId> incident;
  for (const auto& [a, b] : topology.edges) {
    incident.insert(a);
    incident.insert(b);
  }
  topology.partial_orders.clear();
  std::vector<const CriticalSection*> ordered;
  for (const auto id : incident) ordered.push_back(&sections.at(static_cast<std::size_t>(id)));
  std::sort(ordered.begin(), ordered.end(), [](const CriticalSection* a, const CriticalSection* b) {
    return std::tie(a->lock, a->acq_ord) < std::tie(b->lock, b->acq_ord);
  });
  for (const auto* s : ordered) topology.partial_orders[s->lock].push_back(s->id);
}

namespace {

std::int64_t aux_number(const LockId& lock) {
  return std::stoll(lock.substr(kAuxLockPrefix.size()));
}

}  // namespace

bool aux_lock_less(const LockId& a, const LockId& b) {
  if (is_aux_lock(a) && is_aux_lock(b)) return aux_number(a) < aux_number(b);
  return a < b;
}

LocksetAssignment assign_locksets(const Topology& topology) {
  LocksetAssignment out;
  std::set<SectionId> with_out;
  for (const auto& [a, b] : topology.edges) with_out.insert(a);
  std::int64_t counter = 1;
  for (const auto& [lock, order] : topology.partial_orders)
    for (const auto id : order)
      if (with_out.contains(id)) out.out_lock[id] = std::string(kAuxLockPrefix) + std::to_string(counter++);
  for (const auto& [lock, order] : topology.partial_orders) {
    for (const auto id : order) {
      std::vector<LockId> ls;
      if (const auto it = out.out_lock.find(id); it != out.out_lock.end()) ls.push_back(it->second);
      for (const auto src : topology.sources(id)) ls.push_back(out.out_lock.at(src));
      std::sort(ls.begin(), ls.end(), aux_lock_less);
      ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
      out.lockset[id] = std::move(ls);
      out.end_flags[id] = "C" + std::to_string(id) + ".END";
    }
  }
  return out;
}

namespace {

void check_acyclic(const Trace& out) {
  std::map<SectionId, std::vector<SectionId>> next;
  std::map<SectionId, int> indegree;
  for (const auto& s : out.sections) indegree[s.id];
  for (const auto& c : out.order) {
    next[c.before].push_back(c.after);
    ++indegree[c.after];
  }
  std::map<Tid, std::vector<const TransformedSection*>> per_thread;
  for (const auto& s : out.sections) per_thread[s.tid].push_back(&s);
  for (const auto& [tid, list] : per_thread) {
    for (std::size_t i = 1; i < list.size(); ++i) {
      next[list[i - 1]->id].push_back(list[i]->id);
      ++indegree[list[i]->id];
    }
  }
  std::deque<SectionId> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push_back(id);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const auto id = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto n : next[id])
      if (--indegree[n] == 0) ready.push_back(n);
  }
  if (seen != indegree.size()) {
    std::string cyc;
    for (const auto& [id, d] : indegree)
      if (d > 0) cyc += " C" + std::to_string(id);
    throw Error(ErrorCode::CyclicConstraint, "ordering constraints form a cycle through" + cyc);
  }
}

}  // namespace

Trace emit_ulcp_free_trace(const Trace& trace, const Topology& topology, const LocksetAssignment& assignment) {
  if (trace.is_transformed()) throw Error(ErrorCode::InvariantViolation, "trace is already transformed");
  const auto sections = extract_critical_sections(trace);
  std::map<EventRef, SectionId> at_acq;
  std::map<EventRef, SectionId> at_rel;
  for (const auto& s : sections) {
    at_acq[{s.tid, s.begin_seq}] = s.id;
    at_rel[{s.tid, s.end_seq}] = s.id;
  }
  auto lockset_of = [&](SectionId id) -> const std::vector<LockId>& {
    static const std::vector<LockId> none;
    const auto it = assignment.lockset.find(id);
    return it == assignment.lockset.end() ? none : it->second;
  };

  Trace out;
  out.version = trace.version;
  out.caps = trace.caps;
  out.time_unit = trace.time_unit;
  out.initial_memory = trace.initial_memory;
  for (const auto& [id, lock] : assignment.out_lock) out.aux_locks.insert(lock);

  struct Pending {
    Tid tid;
    std::size_t index;
    std::int64_t acq_ord;
  };
  std::map<LockId, std::vector<Pending>> aux_acqs;
  std::map<SectionId, std::pair<std::size_t, std::size_t>> spans;

  for (const auto& [tid, events] : trace.threads) {
    auto& dst = out.threads[tid];
    for (const auto& ev : events) {
      const EventRef ref{tid, ev.seq};
      if (ev.kind == EventKind::LockAcq) {
        const auto id = at_acq.at(ref);
        spans[id].first = dst.size();
        for (const auto& lock : lockset_of(id)) {
          TraceEvent acq;
          acq.tid = tid;
          acq.kind = EventKind::LockAcq;
          acq.lock = lock;
          acq.site = ev.site;
          aux_acqs[lock].push_back({tid, dst.size(), *ev.acq_ord});
          dst.push_back(std::move(acq));
        }
        continue;
      }
      if (ev.kind == EventKind::LockRel) {
        const auto id = at_rel.at(ref);
        const auto& ls = lockset_of(id);
        for (auto it = ls.rbegin(); it != ls.rend(); ++it) {
          TraceEvent rel;
          rel.tid = tid;
          rel.kind = EventKind::LockRel;
          rel.lock = *it;
          dst.push_back(std::move(rel));
        }
        spans[id].second = dst.size();
        continue;
      }
      dst.push_back(ev);
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].seq = static_cast<std::int64_t>(i);
  }

  for (auto& [lock, list] : aux_acqs) {
    std::stable_sort(list.begin(), list.end(), [](const Pending& a, const Pending& b) { return a.acq_ord < b.acq_ord; });
    for (std::size_t k = 0; k < list.size(); ++k)
      out.threads.at(list[k].tid)[list[k].index].acq_ord = static_cast<std::int64_t>(k);
  }

  for (const auto& s : sections) {
    TransformedSection ts;
    ts.id = s.id;
    ts.tid = s.tid;
    ts.begin = spans.at(s.id).first;
    ts.end = spans.at(s.id).second;
    ts.lock = s.lock;
    if (const auto it = assignment.out_lock.find(s.id); it != assignment.out_lock.end()) ts.out_lock = it->second;
    ts.lockset = lockset_of(s.id);
    ts.sources = topology.sources(s.id);
    out.sections.push_back(std::move(ts));
  }
  std::stable_sort(out.sections.begin(), out.sections.end(), [&](const TransformedSection& a, const TransformedSection& b) {
    return std::tie(a.tid, sections[static_cast<std::size_t>(a.id)].begin_seq) <
           std::tie(b.tid, sections[static_cast<std::size_t>(b.id)].begin_seq);
  });
  for (const auto& [lock, order] : topology.partial_orders)
    for (std::size_t k = 1; k < order.size(); ++k) out.order.push_back({order[k - 1], order[k]});

  check_acyclic(out);
  validate_and_index(out);
  return out;
}

std::vector<LockId> dynamic_lockset(const TransformedSection& section, const std::set<SectionId>& ended,
                                    const std::map<SectionId, LockId>& out_locks) {
  std::set<LockId> drop;
  for (const auto src : section.sources)
    if (ended.contains(src))
      if (const auto it = out_locks.find(src); it != out_locks.end()) drop.insert(it->second);
  std::vector<LockId> out;
  for (const auto& l : section.lockset)
    if (!drop.contains(l)) out.push_back(l);
  return out;
}

std::set<Addr> RaceReport::addresses() const {
  std::set<Addr> out(diverged.begin(), diverged.end());
  for (const auto& r : races) out.insert(r.addr);
  return out;
}

namespace {

bool happens_before(const AccessRecord& a, std::size_t slot_a, const AccessRecord& b) {
  return a.clock.at(slot_a) <= b.clock.at(slot_a);
}

}  // namespace

RaceReport check_transform_races(const ReplayResult& original_replay, const ReplayResult& transformed_replay) {
  RaceReport report;
  const auto& a = original_replay.final_memory;
  const auto& b = transformed_replay.final_memory;
  std::set<Addr> keys;
  for (const auto& [k, v] : a) keys.insert(k);
  for (const auto& [k, v] : b) keys.insert(k);
  for (const auto& k : keys) {
    const auto ia = a.find(k);
    const auto ib = b.find(k);
    const std::int64_t va = ia == a.end() ? 0 : ia->second;
    const std::int64_t vb = ib == b.end() ? 0 : ib->second;
    if (va != vb || (ia == a.end()) != (ib == b.end())) report.diverged.push_back(k);
  }
  if (report.diverged.empty()) return report;

  std::map<Tid, std::size_t> slot;
  for (const auto& [tid, t] : transformed_replay.per_thread) slot.emplace(tid, slot.size());
  std::map<Addr, std::vector<const AccessRecord*>> by_addr;
  for (const auto& acc : transformed_replay.accesses) by_addr[acc.addr].push_back(&acc);
  for (const auto& [addr, list] : by_addr) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        const auto& x = *list[i];
        const auto& y = *list[j];
        if (x.tid == y.tid || (!x.write && !y.write)) continue;
        if (happens_before(x, slot.at(x.tid), y) || happens_before(y, slot.at(y.tid), x)) continue;
        report.races.push_back({addr, {x.tid, x.index, x.write}, {y.tid, y.index, y.write}});
      }
    }
  }
  return report;
}

RaceReport check_transform_races(const Trace& original, const ReplayResult& transformed_replay) {
  ReplayOptions opts;
  opts.policy = Policy::Elsc;
  return check_transform_races(replay(original, opts), transformed_replay);
}

TransformResult transform(PairClassifier& classifier, const Trace& trace, const std::vector<UlcpPair>& pairs) {
  TransformResult out;
  out.topology = build_topology(classifier, pairs);
  out.assignment = assign_locksets(out.topology);
  out.trace = emit_ulcp_free_trace(trace, out.topology, out.assignment);
  return out;
}

TransformResult transform(const Trace& trace, const std::vector<UlcpPair>& pairs) {
  PairClassifier classifier(trace);
  return transform(classifier, trace, pairs);
}

}  // namespace ulcp
