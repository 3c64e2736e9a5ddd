#include "ulcpkit/detect.hpp"

#include <algorithm>

#include "ulcpkit/error.hpp"
#include "ulcpkit/replay.hpp"

namespace ulcp {

std::string_view to_string(Category category) {
  switch (category) {
    case Category::NullLock: return "NULL_LOCK";
    case Category::ReadRead: return "READ_READ";
    case Category::DisjointWrite: return "DISJOINT_WRITE";
    case Category::Benign: return "BENIGN";
    case Category::Tlcp: return "TLCP";
    case Category::Unknown: return "UNKNOWN";
  }
  return "?";
}

std::optional<Category> category_from_string(std::string_view s) {
  for (auto c : {Category::NullLock, Category::ReadRead, Category::DisjointWrite, Category::Benign, Category::Tlcp,
                 Category::Unknown})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

bool is_ulcp(Category category) {
  return category == Category::NullLock || category == Category::ReadRead || category == Category::DisjointWrite ||
         category == Category::Benign;
}

namespace {

bool disjoint(const std::set<Addr>& a, const std::set<Addr>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return false;
    if (*i < *j) ++i;
    else ++j;
  }
  return true;
}

}  // namespace

std::optional<Category> classify_pair(const CriticalSection& c1, const CriticalSection& c2) {
  if (c1.empty() || c2.empty()) return Category::NullLock;
  if (c1.s_wr.empty() && c2.s_wr.empty()) return Category::ReadRead;
  if (disjoint(c1.s_rd, c2.s_wr) && disjoint(c1.s_wr, c2.s_rd) && disjoint(c1.s_wr, c2.s_wr))
    return Category::DisjointWrite;
  return std::nullopt;
}

PairClassifier::PairClassifier(const Trace& trace) : trace_(trace), sections_(extract_critical_sections(trace)) {}

Verdict PairClassifier::classify(SectionId c1, SectionId c2) {
  if (section(c1).acq_ord > section(c2).acq_ord) std::swap(c1, c2);
  if (const auto it = cache_.find({c1, c2}); it != cache_.end()) return it->second;
  Verdict v;
  if (trace_.has_cap(kCapNoMemoryEvents)) {
    v.category = Category::Unknown;
  } else if (const auto fast = classify_pair(section(c1), section(c2))) {
    v.category = *fast;
  } else {
    try {
      v.category = benign_check(c1, c2);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotReexecutable) throw;
      v.category = Category::Tlcp;
      v.not_reexecutable = true;
    }
  }
  cache_[{c1, c2}] = v;
  return v;
}

void PairClassifier::take_snapshots() {
  if (snapshotted_) return;
  snapshotted_ = true;
  ReplayOptions opts;
  opts.policy = Policy::Elsc;
  replay(trace_, opts, [&](Tid tid, std::size_t index, const TraceEvent& ev, const Memory& mem, const Registers& regs) {
    if (ev.kind == EventKind::LockAcq && !is_aux_lock(*ev.lock))
      snapshots_[{tid, static_cast<std::int64_t>(index)}] = Snapshot{mem, regs};
  });
}

const std::vector<std::size_t>& PairClassifier::observable_reads(SectionId id) {
  if (const auto it = observable_.find(id); it != observable_.end()) return it->second;
  const auto& cs = section(id);
  const auto& events = trace_.threads.at(cs.tid);
  const auto end = static_cast<std::size_t>(cs.end_seq);
  auto uses = [](const TraceEvent& ev, const std::string& reg) {
    if (ev.kind != EventKind::Write || !ev.valexpr) return false;
    const auto regs = ev.valexpr->registers();
    return std::find(regs.begin(), regs.end(), reg) != regs.end();
  };
  auto redefines = [](const TraceEvent& ev, const std::string& reg) {
    return ev.kind == EventKind::Read && ev.reg && *ev.reg == reg;
  };
  std::vector<std::size_t> out;
  for (auto i = static_cast<std::size_t>(cs.begin_seq) + 1; i < end; ++i) {
    const auto& ev = events[i];
    if (ev.kind != EventKind::Read) continue;
    const auto& reg = *ev.reg;
    bool consumed = false;
    bool live_out = true;
    for (std::size_t j = i + 1; j < end; ++j) {
      if (uses(events[j], reg)) consumed = true;
      if (redefines(events[j], reg)) {
        live_out = false;
        break;
      }
    }
    bool used_later = false;
    if (live_out) {
      for (std::size_t j = end + 1; j < events.size(); ++j) {
        if (uses(events[j], reg)) {
          used_later = true;
          break;
        }
        if (redefines(events[j], reg)) break;
      }
    }
    if (!consumed || used_later) out.push_back(i);
  }
  return observable_[id] = std::move(out);
}

PairClassifier::Outcome PairClassifier::run(Memory memory,
                                            const std::vector<std::pair<SectionId, Registers>>& order) const {
  Outcome out;
  for (const auto& [id, start_regs] : order) {
    const auto& cs = section(id);
    const auto& events = trace_.threads.at(cs.tid);
    const auto& observable = observable_.at(id);
    auto& observed = out.observed[id];
    Registers regs = start_regs;
    for (auto i = static_cast<std::size_t>(cs.begin_seq) + 1; i < static_cast<std::size_t>(cs.end_seq); ++i) {
      const auto& ev = events[i];
      if (ev.kind == EventKind::Read) {
        const auto it = memory.find(*ev.addr);
        const std::int64_t v = it == memory.end() ? 0 : it->second;
        regs[*ev.reg] = v;
        if (std::binary_search(observable.begin(), observable.end(), i)) observed.push_back(v);
      } else if (ev.kind == EventKind::Write) {
        if (!ev.valexpr)
          throw Error(ErrorCode::NotReexecutable, "write to '" + *ev.addr + "' at T" + std::to_string(cs.tid) +
                                                      " seq " + std::to_string(i) + " has no valexpr");
        try {
          memory[*ev.addr] = ev.valexpr->evaluate(regs);
        } catch (const Error& e) {
          throw Error(ErrorCode::NotReexecutable, e.what());
        }
      }
    }
  }
  out.memory = std::move(memory);
  return out;
}

Category PairClassifier::benign_check(SectionId c1, SectionId c2) {
  take_snapshots();
  const auto& s1 = section(c1);
  const auto& s2 = section(c2);
  const auto& snap1 = snapshots_.at({s1.tid, s1.begin_seq});
  const auto& snap2 = snapshots_.at({s2.tid, s2.begin_seq});
  observable_reads(c1);
  observable_reads(c2);
  const auto forward = run(snap1.memory, {{c1, snap1.regs}, {c2, snap2.regs}});
  const auto reversed = run(snap1.memory, {{c2, snap2.regs}, {c1, snap1.regs}});
  const bool same = forward.memory == reversed.memory && forward.observed == reversed.observed;
  return same ? Category::Benign : Category::Tlcp;
}

Category benign_check(const Trace& trace, SectionId c1, SectionId c2) {
  PairClassifier classifier(trace);
  return classifier.benign_check(c1, c2);
}

std::vector<UlcpPair> detect_all(PairClassifier& classifier) {
  std::vector<UlcpPair> out;
  const auto& secs = classifier.sections();
  for (std::size_t i = 0; i + 1 < secs.size(); ++i) {
    const auto& a = secs[i];
    const auto& b = secs[i + 1];
    if (a.lock != b.lock || a.tid == b.tid) continue;
    const Verdict v = classifier.classify(a.id, b.id);
    out.push_back(UlcpPair{a.lock, a.id, b.id, v.category, v.not_reexecutable, a.site, b.site});
  }
  return out;
}

std::vector<UlcpPair> detect_all(const Trace& trace) {
  PairClassifier classifier(trace);
  return detect_all(classifier);
}

}  // namespace ulcp
