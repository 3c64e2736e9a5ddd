#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "ulcpkit/error.hpp"

using namespace ulcp;

namespace {

std::string error_of(const std::string& text, ErrorCode expected,
                     const std::map<std::string, std::int64_t>& overrides = {}) {
  try {
    parse_workload(text, overrides);
  } catch (const Error& e) {
    CHECK(e.code() == expected);
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

std::int64_t total_cost(const Trace& trace, Tid tid) {
  std::int64_t sum = 0;
  for (const auto& ev : trace.threads.at(tid)) sum += ev.cost;
  return sum;
}

}  // namespace

TEST_CASE("the null-lock generator parses to a guarded increment") {
  const auto prog = parse_workload(
      "thread { lock L @1; read flag -> r1; if r1 == 1 { read sv -> r2; write sv = r2 add 1 } ; unlock L }");
  REQUIRE(prog.threads.size() == 1);
  const auto& body = prog.threads[0];
  REQUIRE(body.size() == 4);
  CHECK(body[0].kind == Stmt::Kind::Lock);
  CHECK(body[0].site == CodeRegion{0, 1, 1});
  CHECK(body[1].kind == Stmt::Kind::Read);
  CHECK(body[2].kind == Stmt::Kind::If);
  REQUIRE(body[2].then_block.size() == 2);
  CHECK(body[2].then_block[1].value == ValueExpr::make_op(ArithOp::Add, std::string("r2"), std::int64_t{1}));
  CHECK(body[3].kind == Stmt::Kind::Unlock);
  CHECK(count_static(body, Stmt::Kind::Write) == 1);
}

TEST_CASE("static errors carry line and column") {
  CHECK(error_of("thread {\n  lock L\n}\n", ErrorCode::UnbalancedLock).find("2:3") != std::string::npos);
  CHECK(error_of("thread {\n  write x = r9 add 1\n}\n", ErrorCode::UnboundRegister).find("2:") !=
        std::string::npos);
  CHECK(error_of("thread {\n  if q == 1 { compute 1 }\n}\n", ErrorCode::UnboundRegister).find("2:") !=
        std::string::npos);
  CHECK(error_of("thread {\n  compute\n}\n", ErrorCode::SyntaxError).find("3:1") != std::string::npos);
  error_of("thread { unlock L }", ErrorCode::UnbalancedLock);
  error_of("thread { lock A; lock B; unlock A; unlock B }", ErrorCode::UnbalancedLock);
  error_of("param N = 1\nthread { compute N }", ErrorCode::SyntaxError, {{"M", 2}});
}

TEST_CASE("params, clones and integer expressions") {
  const auto prog = parse_workload(R"(
param THREADS = 4
param GAP = 3
thread * THREADS / 2 as i {
  loop i * GAP + 1 { compute 1 }
  write x[i] = i add 10
}
)");
  REQUIRE(prog.threads.size() == 2);
  CHECK(prog.threads[0][0].count == 1);
  CHECK(prog.threads[1][0].count == 4);
  CHECK(prog.threads[1][1].addr == "x[1]");
  CHECK(prog.threads[1][1].value == ValueExpr::make_op(ArithOp::Add, std::int64_t{1}, std::int64_t{10}));

  const auto wider = parse_workload("param THREADS = 4\nthread * THREADS { compute 1 }", {{"THREADS", 7}});
  CHECK(wider.threads.size() == 7);
}

TEST_CASE("branches follow values read at run time") {
  const auto rec = record(parse_workload(R"(
memory flag = 1
memory sv = 0
thread {
  read flag -> f
  if f == 1 { read sv -> r; write sv = r add 5 } else { write sv = 99 }
  loop 3 { read sv -> s; write sv = s add 1 }
}
)"),
                          0);
  CHECK(rec.result.final_memory.at("sv") == 8);
}

TEST_CASE("the two-order workload costs 8 or 9 depending on who wins") {
  const auto prog = load_workload(std::string(ULCPKIT_CORPUS_DIR) + "/fig11_order.wl");
  std::set<std::int64_t> seen;
  for (std::uint64_t s = 0; s < 20; ++s) seen.insert(record(prog, s).stats.makespan);
  CHECK(seen == std::set<std::int64_t>{8, 9});
}

TEST_CASE("recording is deterministic per seed") {
  const auto prog = load_workload(std::string(ULCPKIT_CORPUS_DIR) + "/fig18_pbzip2.wl");
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = record(prog, s);
    const auto b = record(prog, s);
    CHECK(a.trace == b.trace);
    CHECK(serialize_trace(a.trace) == serialize_trace(b.trace));
    CHECK(a.stats.makespan == b.stats.makespan);
  }
}

TEST_CASE("recording bounds and conservation") {
  for (const auto& e : list_corpus(ULCPKIT_CORPUS_DIR)) {
    CAPTURE(e.name);
    const auto rec = record(load_workload(e.workload_path), 0);
    std::int64_t longest = 0;
    for (const auto& [tid, events] : rec.trace.threads) longest = std::max(longest, total_cost(rec.trace, tid));
    CHECK(rec.stats.makespan >= longest);
    for (const auto& [tid, t] : rec.result.per_thread) {
      CHECK(t.busy == total_cost(rec.trace, tid));
      CHECK(t.completion == t.busy + t.wait);
    }
  }
}

TEST_CASE("a lock cycle in the program is reported as a deadlock") {
  const auto prog = parse_workload(R"(
thread { lock A; compute 2; lock B; unlock B; unlock A }
thread { lock B; compute 2; lock A; unlock A; unlock B }
)");
  try {
    record(prog, 0);
    FAIL("expected DEADLOCK");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Deadlock);
  }
}
