#include "ulcpkit/perf.hpp"

#include <algorithm>
#include <tuple>

#include "ulcpkit/error.hpp"

namespace ulcp {

namespace {

std::int64_t label(const ReplayResult& result, const std::string& name) {
  const auto it = result.timestamps.find(name);
  if (it == result.timestamps.end()) throw Error(ErrorCode::MissingLabel, "no timestamp '" + name + "'");
  return it->second;
}

}  // namespace

UlcpTiming pair_timing(const UlcpPair& pair, const ReplayResult& result) {
  return UlcpTiming{label(result, time1_label(pair.c1)), label(result, time2_label(pair.c1)),
                    label(result, time2_label(pair.c2))};
}

std::int64_t delta_t(const UlcpTiming& original, const UlcpTiming& optimized) {
  const auto span_orig = std::max(original.time2, original.time3);
  const auto span_opt = std::max(optimized.time2, optimized.time3);
  return (span_orig - span_opt) - (original.time1 - optimized.time1);
}

std::int64_t delta_t(const UlcpPair& pair, const ReplayResult& original, const ReplayResult& optimized) {
  return delta_t(pair_timing(pair, original), pair_timing(pair, optimized));
}

bool can_merge(const UlcpGroup& a, const UlcpGroup& b) {
  return (a.cr1.overlaps(b.cr1) && a.cr2.overlaps(b.cr2)) || (a.cr1.overlaps(b.cr2) && a.cr2.overlaps(b.cr1));
}

namespace {

void canonicalize(UlcpGroup& g) {
  if (g.cr2 < g.cr1) std::swap(g.cr1, g.cr2);
}

UlcpGroup merge(const UlcpGroup& a, const UlcpGroup& b) {
  UlcpGroup out;
  if (a.cr1.overlaps(b.cr1) && a.cr2.overlaps(b.cr2)) {
    out.cr1 = a.cr1.hull(b.cr1);
    out.cr2 = a.cr2.hull(b.cr2);
  } else {
    out.cr1 = a.cr1.hull(b.cr2);
    out.cr2 = a.cr2.hull(b.cr1);
  }
  out.delta_t = a.delta_t + b.delta_t;
  out.members = a.members;
  out.members.insert(out.members.end(), b.members.begin(), b.members.end());
  std::sort(out.members.begin(), out.members.end());
  canonicalize(out);
  return out;
}

bool group_less(const UlcpGroup& a, const UlcpGroup& b) {
  return std::tie(a.cr1, a.cr2, a.members) < std::tie(b.cr1, b.cr2, b.members);
}

}  // namespace

std::vector<UlcpGroup> fuse(const std::vector<FusionInput>& inputs) {
  std::map<std::pair<CodeRegion, CodeRegion>, UlcpGroup> exact;
  for (const auto& in : inputs) {
    UlcpGroup g{in.cr1, in.cr2, {in.id}, in.delta_t, std::nullopt};
    canonicalize(g);
    auto [it, fresh] = exact.try_emplace({g.cr1, g.cr2}, g);
    if (!fresh) {
      it->second.delta_t += g.delta_t;
      it->second.members.push_back(in.id);
    }
  }
  std::vector<UlcpGroup> groups;
  for (auto& [key, g] : exact) {
    std::sort(g.members.begin(), g.members.end());
    groups.push_back(std::move(g));
  }
  bool merged = true;
  while (merged) {
    merged = false;
    std::sort(groups.begin(), groups.end(), group_less);
    for (std::size_t i = 0; i < groups.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        if (!can_merge(groups[i], groups[j])) continue;
        groups[i] = merge(groups[i], groups[j]);
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
  }
  return groups;
}

std::vector<UlcpGroup> rank(std::vector<UlcpGroup> groups) {
  std::int64_t sum = 0;
  for (const auto& g : groups) sum += g.delta_t;
  for (auto& g : groups)
    g.p = sum == 0 ? std::nullopt : std::optional<double>(static_cast<double>(g.delta_t) / static_cast<double>(sum));
  auto by_site = [](const UlcpGroup& a, const UlcpGroup& b) {
    return std::tie(a.cr1.lo, a.cr2.lo, a.cr1, a.cr2, a.members) < std::tie(b.cr1.lo, b.cr2.lo, b.cr1, b.cr2, b.members);
  };
  std::sort(groups.begin(), groups.end(), [&](const UlcpGroup& a, const UlcpGroup& b) {
    if (sum != 0) {
      if (a.delta_t != b.delta_t) return sum > 0 ? a.delta_t > b.delta_t : a.delta_t < b.delta_t;
    } else if (a.members.size() != b.members.size()) {
      return a.members.size() > b.members.size();
    }
    return by_site(a, b);
  });
  return groups;
}

Metrics aggregate_metrics(const ReplayResult& original, const ReplayResult& optimized,
                          const std::vector<UlcpGroup>& groups, std::size_t n_thread) {
  Metrics m;
  m.t_real = original.makespan;
  m.n_thread = n_thread;
  m.t_pd = original.makespan - optimized.makespan;
  for (const auto& g : groups) m.sum_delta_t += g.delta_t;
  m.t_rw = m.sum_delta_t - m.t_pd;
  m.t_pd_norm = m.t_real == 0 ? 0.0 : static_cast<double>(m.t_pd) / static_cast<double>(m.t_real);
  m.t_rw_per_thread = n_thread == 0 ? 0.0 : static_cast<double>(m.t_rw) / static_cast<double>(n_thread);
  return m;
}

}  // namespace ulcp
