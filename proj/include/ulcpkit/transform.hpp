#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ulcpkit/detect.hpp"
#include "ulcpkit/replay.hpp"
#include "ulcpkit/trace.hpp"

namespace ulcp {

struct Topology {
  std::vector<SectionId> nodes;
  std::set<std::pair<SectionId, SectionId>> edges;
  /// Edge nodes of each original lock in acquisition order.
  std::map<LockId, std::vector<SectionId>> partial_orders;
  std::vector<SectionId> standalone;

  std::vector<SectionId> sources(SectionId node) const;
  std::vector<SectionId> targets(SectionId node) const;
};

/// Edges go from each section to the first later same-lock section of every
/// other thread that forms a true contention pair with it. Adjacent pairs
/// take their verdict from `pairs`; other pairs are classified on demand.
Topology build_topology(PairClassifier& classifier, const std::vector<UlcpPair>& pairs);
Topology build_topology(const Trace& trace, const std::vector<UlcpPair>& pairs);

/// Fills partial_orders from the edge set.
void pin_partial_order(Topology& topology, const std::vector<CriticalSection>& sections);

struct LocksetAssignment {
  std::map<SectionId, LockId> out_lock;
  std::map<SectionId, std::vector<LockId>> lockset;  // canonical acquisition order
  std::map<SectionId, std::string> end_flags;
};

/// Orders auxiliary lock names by their numeric suffix.
bool aux_lock_less(const LockId& a, const LockId& b);

LocksetAssignment assign_locksets(const Topology& topology);

/// Lock events of sections with an empty lockset are dropped; the others
/// acquire their lockset in canonical order and release in reverse. Throws
/// Error(CyclicConstraint) if the ordering constraints admit no schedule.
Trace emit_ulcp_free_trace(const Trace& trace, const Topology& topology, const LocksetAssignment& assignment);

/// Assigned lockset minus the out-lock of every source whose END flag is set.
std::vector<LockId> dynamic_lockset(const TransformedSection& section, const std::set<SectionId>& ended,
                                    const std::map<SectionId, LockId>& out_locks);

struct RaceAccess {
  Tid tid = 0;
  std::size_t index = 0;
  bool write = false;
  bool operator==(const RaceAccess&) const = default;
};

struct Race {
  Addr addr;
  RaceAccess first;
  RaceAccess second;
  bool operator==(const Race&) const = default;
};

struct RaceReport {
  std::vector<Addr> diverged;
  std::vector<Race> races;
  bool empty() const { return diverged.empty() && races.empty(); }
  /// Addresses named by either list.
  std::set<Addr> addresses() const;
};

/// Empty iff final memories match. Otherwise lists the diverged addresses and
/// every concurrent conflicting access pair of the transformed replay, which
/// must have been run with track_clocks.
RaceReport check_transform_races(const ReplayResult& original_replay, const ReplayResult& transformed_replay);
RaceReport check_transform_races(const Trace& original, const ReplayResult& transformed_replay);

struct TransformResult {
  Topology topology;
  LocksetAssignment assignment;
  Trace trace;
};

TransformResult transform(const Trace& trace, const std::vector<UlcpPair>& pairs);
TransformResult transform(PairClassifier& classifier, const Trace& trace, const std::vector<UlcpPair>& pairs);

}  // namespace ulcp
