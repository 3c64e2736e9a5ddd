#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "ulcpkit/error.hpp"

using namespace ulcp;

namespace {

const char* kSmall =
    R"({"v":1,"mem":{"x":3}}
{"tid":0,"seq":0,"kind":"THREAD_START"}
{"tid":0,"seq":1,"kind":"LOCK_ACQ","lock":"L","acq_ord":0,"site":[0,4,6]}
{"tid":0,"seq":2,"kind":"READ","addr":"x","reg":"r1"}
{"tid":0,"seq":3,"kind":"WRITE","addr":"x","valexpr":{"op":"add","a":"r1","b":3}}
{"tid":0,"seq":4,"kind":"LOCK_REL","lock":"L"}
{"tid":0,"seq":5,"kind":"THREAD_END"}
{"tid":1,"seq":0,"kind":"THREAD_START"}
{"tid":1,"seq":1,"kind":"LOCK_ACQ","lock":"L","acq_ord":1,"site":[0,9,9]}
{"tid":1,"seq":2,"kind":"WRITE","addr":"x","valexpr":{"const":5}}
{"tid":1,"seq":3,"kind":"LOCK_REL","lock":"L"}
{"tid":1,"seq":4,"kind":"THREAD_END"}
)";

ErrorCode code_of(const std::string& text) {
  try {
    parse_trace_string(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("trace text round-trips byte for byte") {
  const auto trace = parse_trace_string(kSmall);
  CHECK(serialize_trace(trace) == kSmall);
  CHECK(parse_trace_string(serialize_trace(trace)) == trace);
}

TEST_CASE("recorded traces round-trip") {
  for (const char* name : {"fig3_null_lock", "fig18_pbzip2", "case02_trx_list"}) {
    const auto trace = testing::corpus_trace(name);
    const auto text = serialize_trace(trace);
    CHECK(serialize_trace(parse_trace_string(text)) == text);
  }
}

TEST_CASE("transformed traces round-trip with their section table") {
  const auto trace = testing::corpus_trace("fig7_8_topology");
  const auto out = transform(trace, detect_all(trace)).trace;
  REQUIRE(out.is_transformed());
  const auto text = serialize_trace(out);
  const auto back = parse_trace_string(text);
  CHECK(back == out);
  CHECK(serialize_trace(back) == text);
}

TEST_CASE("malformed records") {
  CHECK(code_of(replace(kSmall, R"("reg":"r1"})", R"("reg":"r1","colour":2})")) == ErrorCode::MalformedRecord);
  CHECK(code_of(replace(kSmall, R"("kind":"READ")", R"("kind":"LOAD")")) == ErrorCode::MalformedRecord);
  CHECK(code_of(replace(kSmall, R"({"v":1,)", R"({)")) == ErrorCode::MalformedRecord);
  CHECK(code_of(replace(kSmall, R"("tid":0,"seq":2)", R"("tid":0,"seq":2,)")) == ErrorCode::MalformedRecord);
}

TEST_CASE("structural invariants are enforced") {
  SUBCASE("seq gap") {
    CHECK(code_of(replace(kSmall, R"("tid":1,"seq":2)", R"("tid":1,"seq":7)")) == ErrorCode::InvariantViolation);
  }
  SUBCASE("duplicate acq_ord") {
    CHECK(code_of(replace(kSmall, R"("acq_ord":1)", R"("acq_ord":0)")) == ErrorCode::InvariantViolation);
  }
  SUBCASE("unbalanced release") {
    CHECK(code_of(replace(kSmall, R"({"tid":1,"seq":3,"kind":"LOCK_REL","lock":"L"})",
                          R"({"tid":1,"seq":3,"kind":"LOCK_REL","lock":"M"})")) == ErrorCode::InvariantViolation);
  }
}

TEST_CASE("critical sections follow acquisition order") {
  const auto trace = parse_trace_string(kSmall);
  const auto secs = extract_critical_sections(trace);
  REQUIRE(secs.size() == 2);
  CHECK(secs[0].tid == 0);
  CHECK(secs[0].s_rd == std::set<Addr>{"x"});
  CHECK(secs[0].s_wr == std::set<Addr>{"x"});
  CHECK(secs[0].site == CodeRegion{0, 4, 6});
  CHECK(secs[1].s_rd.empty());
  CHECK(secs[1].s_wr == std::set<Addr>{"x"});
}

TEST_CASE("nested sections charge inner accesses to the outer one") {
  const auto trace = testing::trace_of(R"(
memory fifo_empty = 1
memory producerDone = 1
thread {
  lock mu
  read fifo_empty -> e
  lock muDone
  read producerDone -> d
  unlock muDone
  unlock mu
}
)");
  const auto secs = extract_critical_sections(trace);
  REQUIRE(secs.size() == 2);
  const auto& outer = secs[0].lock == "mu" ? secs[0] : secs[1];
  const auto& inner = secs[0].lock == "mu" ? secs[1] : secs[0];
  CHECK(outer.s_rd == std::set<Addr>{"fifo_empty", "producerDone"});
  CHECK(inner.s_rd == std::set<Addr>{"producerDone"});
}

TEST_CASE("section count and lock order sizes match LOCK_ACQ events") {
  std::mt19937_64 rng(5);
  for (const char* name : {"fig3_null_lock", "fig9_chain", "case01_condwait", "fig18_pbzip2"}) {
    const auto trace = testing::corpus_trace(name);
    std::size_t acquisitions = 0;
    for (const auto& [tid, events] : trace.threads)
      for (const auto& ev : events) acquisitions += ev.kind == EventKind::LockAcq ? 1 : 0;
    std::size_t ordered = 0;
    for (const auto& [lock, refs] : trace.lock_orders) ordered += refs.size();
    CHECK(extract_critical_sections(trace).size() == acquisitions);
    CHECK(ordered == acquisitions);
    CHECK(trace.lock_acquisitions() == acquisitions);
  }
}

TEST_CASE("slicing between markers renumbers seq and acq_ord") {
  const auto trace = testing::trace_of(R"(
thread {
  lock L
  compute 1
  unlock L
  marker begin
  lock L
  compute 2
  unlock L
  marker end
  lock L
  unlock L
}
thread {
  compute 1
  marker begin
  lock L
  compute 1
  unlock L
  marker end
}
)");
  const auto cut = slice_trace(trace, "begin", "end");
  CHECK(extract_critical_sections(cut).size() == 2);
  for (const auto& [tid, events] : cut.threads) {
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == static_cast<std::int64_t>(i));
    CHECK(events.front().kind == EventKind::ThreadStart);
    CHECK(events.back().kind == EventKind::ThreadEnd);
  }
  std::set<std::int64_t> ords;
  for (const auto& s : extract_critical_sections(cut)) ords.insert(s.acq_ord);
  CHECK(ords == std::set<std::int64_t>{0, 1});

  try {
    slice_trace(trace, "begin", "nowhere");
    FAIL("expected MARKER_NOT_FOUND");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MarkerNotFound);
  }
}

TEST_CASE("code regions") {
  const CodeRegion a{0, 3, 5};
  CHECK(a.overlaps(CodeRegion{0, 5, 9}));
  CHECK_FALSE(a.overlaps(CodeRegion{0, 6, 9}));
  CHECK_FALSE(a.overlaps(CodeRegion{1, 3, 5}));
  CHECK(a.hull(CodeRegion{0, 4, 8}) == CodeRegion{0, 3, 8});
}
