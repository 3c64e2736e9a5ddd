#pragma once

#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ulcp {

using Tid = int;
using LockId = std::string;
using Addr = std::string;
using SectionId = int;
using Memory = std::map<Addr, std::int64_t>;
using Registers = std::map<std::string, std::int64_t>;

inline constexpr std::string_view kAuxLockPrefix = "@L";

inline bool is_aux_lock(std::string_view lock) { return lock.starts_with(kAuxLockPrefix); }

enum class EventKind { ThreadStart, ThreadEnd, LockAcq, LockRel, Read, Write, Compute, Marker };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view s);

/// Source-site interval standing in for (file, line range). Two regions meet
/// only when they share a file and their line ranges intersect.
struct CodeRegion {
  std::int64_t file = 0;
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool overlaps(const CodeRegion& other) const {
    return file == other.file && lo <= other.hi && other.lo <= hi;
  }
  CodeRegion hull(const CodeRegion& other) const;

  auto operator<=>(const CodeRegion&) const = default;
};

std::string to_string(const CodeRegion& cr);

enum class ArithOp { Add, Sub, Copy };

std::string_view to_string(ArithOp op);

using Operand = std::variant<std::string, std::int64_t>;

/// Re-executable value of a WRITE: a constant or a binary op over registers
/// and constants.
struct ValueExpr {
  enum class Kind { Const, Op };
  Kind kind = Kind::Const;
  std::int64_t constant = 0;
  ArithOp op = ArithOp::Copy;
  Operand a = std::int64_t{0};
  Operand b = std::int64_t{0};

  static ValueExpr make_const(std::int64_t k) { return ValueExpr{Kind::Const, k, ArithOp::Copy, {}, {}}; }
  static ValueExpr make_op(ArithOp op, Operand a, Operand b) {
    return ValueExpr{Kind::Op, 0, op, std::move(a), std::move(b)};
  }

  /// Registers referenced by the expression.
  std::vector<std::string> registers() const;
  /// Throws Error(UnboundRegister) when an operand register is missing.
  std::int64_t evaluate(const Registers& regs) const;

  bool operator==(const ValueExpr&) const = default;
};

struct TraceEvent {
  Tid tid = 0;
  std::int64_t seq = 0;
  EventKind kind = EventKind::Compute;
  std::optional<LockId> lock;
  std::optional<std::int64_t> acq_ord;
  std::optional<CodeRegion> site;
  std::optional<Addr> addr;
  std::optional<std::string> reg;
  std::optional<ValueExpr> valexpr;
  std::optional<std::string> name;  // MARKER only
  std::int64_t cost = 0;

  bool operator==(const TraceEvent&) const = default;
};

std::int64_t default_cost(EventKind kind);

/// Where one acquisition sits in a thread: (tid, seq of the LOCK_ACQ).
struct EventRef {
  Tid tid = 0;
  std::int64_t seq = 0;
  auto operator<=>(const EventRef&) const = default;
};

/// A critical section of a transformed trace. Ids are inherited from the
/// original trace; [begin, end) indexes the owning thread's event list.
struct TransformedSection {
  SectionId id = 0;
  Tid tid = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  LockId lock;
  std::optional<LockId> out_lock;
  std::vector<LockId> lockset;
  std::vector<SectionId> sources;

  bool operator==(const TransformedSection&) const = default;
};

/// `after` may not begin before `before` has finished.
struct OrderConstraint {
  SectionId before = 0;
  SectionId after = 0;
  bool operator==(const OrderConstraint&) const = default;
};

inline constexpr std::string_view kCapNoMemoryEvents = "no_memory_events";

struct Trace {
  int version = 1;
  std::vector<std::string> caps;
  std::optional<std::string> time_unit;
  Memory initial_memory;
  std::map<Tid, std::vector<TraceEvent>> threads;
  std::map<LockId, std::vector<EventRef>> lock_orders;
  std::set<LockId> aux_locks;
  std::vector<TransformedSection> sections;
  std::vector<OrderConstraint> order;

  bool has_cap(std::string_view cap) const;
  bool is_transformed() const { return !sections.empty() || !aux_locks.empty(); }
  std::size_t lock_acquisitions() const;

  bool operator==(const Trace&) const = default;
};

struct CriticalSection {
  SectionId id = 0;
  Tid tid = 0;
  LockId lock;
  std::int64_t begin_seq = 0;  // LOCK_ACQ
  std::int64_t end_seq = 0;    // LOCK_REL
  std::set<Addr> s_rd;
  std::set<Addr> s_wr;
  CodeRegion site;
  std::int64_t acq_ord = 0;

  bool empty() const { return s_rd.empty() && s_wr.empty(); }
};

/// Section placement used by timing labels: [begin, end) event indices.
struct SectionSpan {
  SectionId id = 0;
  Tid tid = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

Trace parse_trace(std::istream& in);
Trace parse_trace_string(std::string_view text);
Trace load_trace(const std::string& path);

void write_trace(std::ostream& out, const Trace& trace);
std::string serialize_trace(const Trace& trace);
void save_trace(const std::string& path, const Trace& trace);

/// Checks every structural invariant and rebuilds lock_orders from acq_ord.
/// Throws Error(InvariantViolation).
void validate_and_index(Trace& trace);

/// One section per LOCK_ACQ/LOCK_REL pair, ordered by (lock, acq_ord); the id
/// is the position in that order. Accesses inside nested sections count
/// toward every enclosing section.
std::vector<CriticalSection> extract_critical_sections(const Trace& trace);

/// Spans of every section in per-thread program order. Transformed traces use their recorded section
/// table; recorded traces derive spans from extract_critical_sections.
std::vector<SectionSpan> section_spans(const Trace& trace);

/// Sub-trace between two named markers (inclusive) in every thread holding
/// them; THREAD_START/THREAD_END are kept, seq and acq_ord renumbered.
Trace slice_trace(const Trace& trace, std::string_view from_marker, std::string_view to_marker);

std::size_t thread_count(const Trace& trace);

}  // namespace ulcp
