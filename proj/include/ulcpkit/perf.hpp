#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ulcpkit/detect.hpp"
#include "ulcpkit/replay.hpp"
#include "ulcpkit/trace.hpp"

namespace ulcp {

struct UlcpTiming {
  std::int64_t time1 = 0;
  std::int64_t time2 = 0;
  std::int64_t time3 = 0;
};

/// Labels of the pair in one replay. Throws Error(MissingLabel).
UlcpTiming pair_timing(const UlcpPair& pair, const ReplayResult& result);

/// (max(T2,T3) before - after) - (T1 before - after).
std::int64_t delta_t(const UlcpTiming& original, const UlcpTiming& optimized);
std::int64_t delta_t(const UlcpPair& pair, const ReplayResult& original, const ReplayResult& optimized);

struct FusionInput {
  CodeRegion cr1;
  CodeRegion cr2;
  std::int64_t delta_t = 0;
  std::size_t id = 0;  // caller's index, carried into members
};

struct UlcpGroup {
  CodeRegion cr1;
  CodeRegion cr2;
  std::vector<std::size_t> members;  // ascending
  std::int64_t delta_t = 0;
  std::optional<double> p;  // unset when every group has zero delta_t

  bool operator==(const UlcpGroup&) const = default;
};

bool can_merge(const UlcpGroup& a, const UlcpGroup& b);

/// Merges until no two groups meet either overlap condition. Groups come
/// back sorted by (cr1, cr2) with cr1 <= cr2.
std::vector<UlcpGroup> fuse(const std::vector<FusionInput>& inputs);

/// Sets p = delta_t / sum and sorts by p descending, then (cr1.lo, cr2.lo).
/// With a zero sum p stays unset and groups sort by member count.
std::vector<UlcpGroup> rank(std::vector<UlcpGroup> groups);

struct Metrics {
  std::int64_t t_pd = 0;
  std::int64_t t_rw = 0;
  std::int64_t sum_delta_t = 0;
  std::int64_t t_real = 0;
  std::size_t n_thread = 0;
  double t_pd_norm = 0.0;  // T_pd / T_real
  double t_rw_per_thread = 0.0;
};

Metrics aggregate_metrics(const ReplayResult& original, const ReplayResult& optimized,
                          const std::vector<UlcpGroup>& groups, std::size_t n_thread);

}  // namespace ulcp
