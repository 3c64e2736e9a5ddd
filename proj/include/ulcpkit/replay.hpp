#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ulcpkit/trace.hpp"

namespace ulcp {

/// ORIG: seeded tie-breaks only. ELSC: recorded per-lock acquisition order.
/// SYNC: round-robin over thread ids per lock, independent of timing.
/// MEM: ELSC plus serialization of every memory access in recorded order.
enum class Policy { Orig, Sync, Mem, Elsc };

std::string_view to_string(Policy policy);
std::optional<Policy> policy_from_string(std::string_view s);

struct ReplayOptions {
  Policy policy = Policy::Elsc;
  std::uint64_t seed = 0;
  /// Prune a transformed section's lockset by the END flags of its sources.
  bool dynamic_locking = true;
  /// Maintain vector clocks and log every memory access (race reporting).
  bool track_clocks = false;
};

struct ThreadTiming {
  std::int64_t completion = 0;
  std::int64_t busy = 0;
  std::int64_t wait = 0;
  bool operator==(const ThreadTiming&) const = default;
};

struct LockHold {
  Tid tid = 0;
  std::int64_t acquired = 0;
  std::int64_t released = 0;
  bool operator==(const LockHold&) const = default;
};

using VectorClock = std::vector<std::int64_t>;

struct AccessRecord {
  Tid tid = 0;
  std::size_t index = 0;
  Addr addr;
  bool write = false;
  std::int64_t start = 0;
  VectorClock clock;  // indexed by thread slot (ascending tid)
  bool operator==(const AccessRecord&) const = default;
};

struct ReplayResult {
  std::int64_t makespan = 0;
  std::map<Tid, ThreadTiming> per_thread;
  /// arrivals[tid][i]: virtual time the thread reached event i, before any
  /// wait for it; the final entry is the completion time.
  std::map<Tid, std::vector<std::int64_t>> arrivals;
  /// "C<id>.time1" (precursor segment start) and "C<id>.time2" (successor
  /// segment end) for every section.
  std::map<std::string, std::int64_t> timestamps;
  Memory final_memory;
  std::map<LockId, std::vector<EventRef>> realized_lock_order;
  std::map<LockId, std::vector<LockHold>> holds;
  std::int64_t aux_acquisitions = 0;
  /// Memory accesses in the order the simulator performed them.
  std::vector<EventRef> memory_order;
  std::vector<AccessRecord> accesses;

  bool operator==(const ReplayResult&) const = default;
};

std::string time1_label(SectionId id);
std::string time2_label(SectionId id);

/// Invoked before each event executes with the state it will observe.
using StepObserver =
    std::function<void(Tid, std::size_t index, const TraceEvent&, const Memory&, const Registers&)>;

/// Discrete-event replay over virtual time. Throws Error(OrderUnsatisfiable)
/// with the blocking cycle when the policy's order cannot be realized.
ReplayResult replay(const Trace& trace, const ReplayOptions& options, const StepObserver& observer = {});

struct ReplaySeries {
  std::vector<ReplayResult> results;
  double mean_makespan = 0.0;
  double variance = 0.0;  // population variance of makespans
  bool identical = true;  // every result equals the first
};

/// ORIG runs use seeds seed, seed+1, ...; other policies reuse `seed`.
ReplaySeries replay_n(const Trace& trace, Policy policy, int runs, std::uint64_t seed = 0,
                      bool dynamic_locking = true);

}  // namespace ulcp
