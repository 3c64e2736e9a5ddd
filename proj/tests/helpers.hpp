#pragma once

#include <string>

#include "ulcpkit/pipeline.hpp"

#ifndef ULCPKIT_CORPUS_DIR
#define ULCPKIT_CORPUS_DIR "corpus"
#endif

namespace testing {

inline ulcp::Trace trace_of(const std::string& text, std::uint64_t seed = 0) {
  return ulcp::record(ulcp::parse_workload(text), seed).trace;
}

inline ulcp::Trace corpus_trace(const std::string& name, std::uint64_t seed = 0) {
  return ulcp::record(ulcp::load_workload(std::string(ULCPKIT_CORPUS_DIR) + "/" + name + ".wl"), seed).trace;
}

inline ulcp::ReplayResult run(const ulcp::Trace& trace, ulcp::Policy policy, std::uint64_t seed = 0) {
  ulcp::ReplayOptions opts;
  opts.policy = policy;
  opts.seed = seed;
  return ulcp::replay(trace, opts);
}

}  // namespace testing
