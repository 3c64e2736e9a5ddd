#pragma once

// Virtual-time discrete-event core shared by the recorder and the replayer.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <utility>
#include <vector>

#include "ulcpkit/error.hpp"
#include "ulcpkit/replay.hpp"
#include "ulcpkit/trace.hpp"

namespace ulcp::detail {

/// Supplies one thread's events. peek() may be called repeatedly before
/// advance(); the registers are the thread's state at that instant.
class EventSource {
 public:
  virtual ~EventSource() = default;
  virtual const TraceEvent* peek(const Registers& regs) = 0;
  virtual void advance() = 0;
};

class VectorSource final : public EventSource {
 public:
  explicit VectorSource(const std::vector<TraceEvent>& events) : events_(events) {}
  const TraceEvent* peek(const Registers&) override { return pos_ < events_.size() ? &events_[pos_] : nullptr; }
  void advance() override { ++pos_; }

 private:
  const std::vector<TraceEvent>& events_;
  std::size_t pos_ = 0;
};

struct GatedSection {
  SectionId id = 0;
  Tid tid = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<LockId> lockset;
  std::vector<SectionId> sources;
  std::optional<LockId> out_lock;
  std::vector<SectionId> predecessors;  // from order constraints
};

struct SchedulerConfig {
  bool random_ties = false;
  std::uint64_t seed = 0;
  ErrorCode stall_error = ErrorCode::OrderUnsatisfiable;

  /// Per-lock acquisition tickets: ordinal of each LOCK_ACQ and the owner of
  /// each ordinal. Locks without tickets are acquired first-come.
  std::map<std::pair<Tid, std::size_t>, std::int64_t> ticket;
  std::map<LockId, std::vector<Tid>> ticket_owner;

  /// Serialized memory-access order (MEM policy).
  std::vector<EventRef> memory_order;

  std::vector<GatedSection> sections;
  /// Lock events on auxiliary locks mapped to the section they belong to.
  std::map<std::pair<Tid, std::size_t>, SectionId> aux_owner;
  bool dynamic_locking = true;

  bool track_clocks = false;
  Memory initial_memory;
};

struct SchedulerOutput {
  ReplayResult result;
  std::map<Tid, std::vector<TraceEvent>> executed;
};

SchedulerOutput run_scheduler(std::vector<std::pair<Tid, std::unique_ptr<EventSource>>> sources,
                              const SchedulerConfig& config, const StepObserver& observer = {});

/// Fills result.timestamps for every span.
void fill_timestamps(const std::vector<SectionSpan>& spans, ReplayResult& result);

}  // namespace ulcp::detail
