#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ulcpkit/replay.hpp"
#include "ulcpkit/trace.hpp"

namespace ulcp {

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

struct Stmt;
using Block = std::vector<Stmt>;

struct Stmt {
  enum class Kind { Compute, Lock, Unlock, Read, Write, If, Loop, Marker };
  Kind kind = Kind::Compute;
  int line = 0;
  int column = 0;

  std::int64_t cost = 0;  // Compute, Read, Write
  LockId lock;
  CodeRegion site;
  Addr addr;
  std::string reg;  // Read target, If subject
  ValueExpr value;
  CmpOp cmp = CmpOp::Eq;
  std::int64_t rhs = 0;
  std::int64_t count = 0;  // Loop
  Block then_block;
  Block else_block;  // also the Loop body
  std::string name;  // Marker
};

struct WorkloadProgram {
  Memory initial_memory;
  std::map<std::string, std::int64_t> params;
  std::vector<Block> threads;
};

/// Parses and statically checks a workload. `overrides` replace declared
/// `param` values. Errors: SYNTAX_ERROR, UNBALANCED_LOCK, UNBOUND_REGISTER,
/// each prefixed with "line:column".
WorkloadProgram parse_workload(std::string_view text, const std::map<std::string, std::int64_t>& overrides = {});
WorkloadProgram load_workload(const std::string& path, const std::map<std::string, std::int64_t>& overrides = {});

/// Statements of `kind` with loops expanded; both arms of an if count.
std::size_t count_static(const Block& block, Stmt::Kind kind);

struct RunStats {
  std::int64_t makespan = 0;
  std::map<Tid, ThreadTiming> per_thread;
};

struct Recording {
  Trace trace;
  RunStats stats;
  ReplayResult result;
};

/// Runs every thread under virtual time with seeded tie-breaks. Throws
/// Error(Deadlock) with the wait cycle when no thread can progress.
Recording record(const WorkloadProgram& program, std::uint64_t seed);

}  // namespace ulcp
