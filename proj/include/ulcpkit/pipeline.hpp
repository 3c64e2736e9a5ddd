#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ulcpkit/detect.hpp"
#include "ulcpkit/perf.hpp"
#include "ulcpkit/replay.hpp"
#include "ulcpkit/transform.hpp"
#include "ulcpkit/workload.hpp"

namespace ulcp {

struct AnalysisOptions {
  Policy policy = Policy::Elsc;
  std::uint64_t seed = 0;
  bool dynamic_locking = true;
};

struct Analysis {
  std::vector<UlcpPair> pairs;
  std::vector<std::int64_t> pair_delta_t;  // parallel to pairs; 0 for non-ULCP pairs
  TransformResult transformed;
  ReplayResult original;
  ReplayResult optimized;
  std::vector<UlcpGroup> groups;  // ranked
  std::map<std::size_t, Category> group_category;  // by rank position
  Metrics metrics;
  RaceReport races;
  std::map<Category, std::size_t> histogram;
  std::size_t ulcp_count = 0;
};

/// Detect, transform, replay both traces, fuse and rank.
Analysis analyze(const Trace& trace, const AnalysisOptions& options = {});

/// Most frequent category among a group's members; ties go to the earlier
/// category in declaration order.
Category majority(const std::vector<Category>& categories);

/// Most frequent ULCP category over all pairs, or nullopt when there is none.
std::optional<Category> dominant_category(const Analysis& analysis);

std::string report_json(const Analysis& analysis);
std::string report_text(const Analysis& analysis);
std::string pairs_jsonl(const std::vector<UlcpPair>& pairs);
std::vector<UlcpPair> parse_pairs_jsonl(const std::string& text);
std::string topology_json(const TransformResult& transformed);
std::string replay_json(const ReplaySeries& series);

struct SweepPoint {
  std::string param;
  std::int64_t value = 0;
  std::size_t ulcp_count = 0;
  Metrics metrics;
};

/// Records the workload once per value of `param` and analyzes each trace.
std::vector<SweepPoint> sweep(const std::string& workload_text, const std::string& param,
                              const std::vector<std::int64_t>& values, std::uint64_t seed,
                              const std::map<std::string, std::int64_t>& fixed = {});
std::string sweep_csv(const std::vector<SweepPoint>& points);

struct CorpusEntry {
  std::string name;
  std::string workload_path;
  std::map<std::string, std::string> expect;  // key = value lines
};

std::vector<CorpusEntry> list_corpus(const std::string& dir);

struct CorpusOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

CorpusOutcome run_corpus_entry(const CorpusEntry& entry, std::uint64_t seed);

}  // namespace ulcp
