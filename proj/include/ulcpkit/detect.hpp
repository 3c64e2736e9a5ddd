#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "ulcpkit/trace.hpp"

namespace ulcp {

/// UNKNOWN is reported for traces without memory events.
enum class Category { NullLock, ReadRead, DisjointWrite, Benign, Tlcp, Unknown };

std::string_view to_string(Category category);
std::optional<Category> category_from_string(std::string_view s);

/// True for the four unnecessary-contention categories.
bool is_ulcp(Category category);

/// Shadow-set classification. nullopt means the sections conflict and the
/// verdict is left to the benign check.
std::optional<Category> classify_pair(const CriticalSection& c1, const CriticalSection& c2);

struct UlcpPair {
  LockId lock;
  SectionId c1 = 0;
  SectionId c2 = 0;
  Category category = Category::Unknown;
  /// Set when a section could not be re-executed and TLCP was assumed.
  bool not_reexecutable = false;
  CodeRegion site1;
  CodeRegion site2;

  bool operator==(const UlcpPair&) const = default;
};

struct Verdict {
  Category category = Category::Unknown;
  bool not_reexecutable = false;
};

/// Classifies arbitrary same-lock section pairs of one trace. Snapshots for
/// the reversed replay are taken from one ELSC replay on first use.
class PairClassifier {
 public:
  explicit PairClassifier(const Trace& trace);

  const std::vector<CriticalSection>& sections() const { return sections_; }
  const CriticalSection& section(SectionId id) const { return sections_.at(static_cast<std::size_t>(id)); }

  Verdict classify(SectionId c1, SectionId c2);

  /// Runs both orders of the two section bodies from the memory at c1's
  /// acquisition. Throws Error(NotReexecutable) when a WRITE has no valexpr.
  Category benign_check(SectionId c1, SectionId c2);

 private:
  struct Snapshot {
    Memory memory;
    Registers regs;
  };
  struct Outcome {
    Memory memory;
    std::map<SectionId, std::vector<std::int64_t>> observed;
  };

  void take_snapshots();
  Outcome run(Memory memory, const std::vector<std::pair<SectionId, Registers>>& order) const;
  const std::vector<std::size_t>& observable_reads(SectionId id);

  const Trace& trace_;
  std::vector<CriticalSection> sections_;
  std::map<std::pair<SectionId, SectionId>, Verdict> cache_;
  std::map<EventRef, Snapshot> snapshots_;
  std::map<SectionId, std::vector<std::size_t>> observable_;
  bool snapshotted_ = false;
};

/// Convenience wrapper over PairClassifier for one pair.
Category benign_check(const Trace& trace, SectionId c1, SectionId c2);

/// Every cross-thread pair adjacent in a lock's acquisition order, ordered
/// by (lock, c1.acq_ord).
std::vector<UlcpPair> detect_all(const Trace& trace);
std::vector<UlcpPair> detect_all(PairClassifier& classifier);

}  // namespace ulcp
