#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "ulcpkit/error.hpp"

using namespace ulcp;

namespace {

CriticalSection section(SectionId id, Tid tid, std::set<Addr> rd, std::set<Addr> wr) {
  CriticalSection c;
  c.id = id;
  c.tid = tid;
  c.lock = "L";
  c.s_rd = std::move(rd);
  c.s_wr = std::move(wr);
  c.acq_ord = id;
  return c;
}

Category pair_category(const std::string& text) {
  const auto trace = testing::trace_of(text);
  const auto pairs = detect_all(trace);
  REQUIRE(pairs.size() == 1);
  return pairs.front().category;
}

std::string two_threads(const std::string& first, const std::string& second, const std::string& memory = "") {
  return memory + "thread { lock L; " + first + "; unlock L }\nthread { compute 1; lock L; " + second +
         "; unlock L }\n";
}

}  // namespace

TEST_CASE("shadow-set branches") {
  CHECK(classify_pair(section(0, 0, {}, {}), section(1, 1, {"x"}, {"x"})) == Category::NullLock);
  CHECK(classify_pair(section(0, 0, {"x"}, {}), section(1, 1, {}, {})) == Category::NullLock);
  CHECK(classify_pair(section(0, 0, {"x"}, {}), section(1, 1, {"x", "y"}, {})) == Category::ReadRead);
  CHECK(classify_pair(section(0, 0, {"x"}, {"y"}), section(1, 1, {"z"}, {"w"})) == Category::DisjointWrite);
  CHECK(classify_pair(section(0, 0, {"x"}, {}), section(1, 1, {}, {"x"})) == std::nullopt);
  CHECK(classify_pair(section(0, 0, {}, {"x"}), section(1, 1, {}, {"x"})) == std::nullopt);
}

TEST_CASE("shadow-set verdicts are symmetric") {
  const std::vector<std::string> universe{"a", "b", "c"};
  for (unsigned r1 = 0; r1 < 8; ++r1)
    for (unsigned w1 = 0; w1 < 8; ++w1)
      for (unsigned r2 = 0; r2 < 8; ++r2)
        for (unsigned w2 = 0; w2 < 8; ++w2) {
          const auto c1 = section(0, 0, oracle::subset(r1, universe), oracle::subset(w1, universe));
          const auto c2 = section(1, 1, oracle::subset(r2, universe), oracle::subset(w2, universe));
          CHECK(classify_pair(c1, c2) == classify_pair(c2, c1));
        }
}

TEST_CASE("reversed replay separates benign from true contention") {
  CHECK(pair_category(two_threads("write x = 5", "write x = 5")) == Category::Benign);
  CHECK(pair_category(two_threads("read x -> a; write x = a add 2", "read x -> b; write x = b add 3")) ==
        Category::Benign);
  CHECK(pair_category(two_threads("write x = 5", "write x = 6")) == Category::Tlcp);
  CHECK(pair_category(two_threads("write x = 5", "read x -> b")) == Category::Tlcp);
  CHECK(pair_category(two_threads("read x -> a; write x = a add 1", "read x -> b; write y = b")) == Category::Tlcp);
}

TEST_CASE("a read feeding a later write outside the section stays observable") {
  const auto text = R"(
memory x = 0
thread { lock L; read x -> a; write x = a add 2; unlock L; write out = a }
thread { compute 1; lock L; read x -> b; write x = b add 3; unlock L }
)";
  CHECK(pair_category(text) == Category::Tlcp);
}

TEST_CASE("writes without a value expression cannot be re-executed") {
  auto trace = testing::trace_of(two_threads("write x = 5", "write x = 6"));
  for (auto& [tid, events] : trace.threads)
    for (auto& ev : events)
      if (ev.kind == EventKind::Write) ev.valexpr.reset();
  const auto pairs = detect_all(trace);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].category == Category::Tlcp);
  CHECK(pairs[0].not_reexecutable);
  CHECK_THROWS_AS(benign_check(trace, 0, 1), Error);
}

TEST_CASE("traces without memory events classify as UNKNOWN") {
  const auto trace = parse_trace_string(
      R"({"v":1,"caps":["no_memory_events"]}
{"tid":0,"seq":0,"kind":"THREAD_START"}
{"tid":0,"seq":1,"kind":"LOCK_ACQ","lock":"m","acq_ord":0,"site":[0,1,1]}
{"tid":0,"seq":2,"kind":"COMPUTE","cost":3}
{"tid":0,"seq":3,"kind":"LOCK_REL","lock":"m"}
{"tid":0,"seq":4,"kind":"THREAD_END"}
{"tid":1,"seq":0,"kind":"THREAD_START"}
{"tid":1,"seq":1,"kind":"LOCK_ACQ","lock":"m","acq_ord":1,"site":[0,1,1]}
{"tid":1,"seq":2,"kind":"COMPUTE","cost":2}
{"tid":1,"seq":3,"kind":"LOCK_REL","lock":"m"}
{"tid":1,"seq":4,"kind":"THREAD_END"}
)");
  CHECK(trace.has_cap(kCapNoMemoryEvents));
  const auto pairs = detect_all(trace);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].category == Category::Unknown);
  CHECK_FALSE(is_ulcp(Category::Unknown));
  // Unknown pairs keep their order in the transformed trace.
  const auto result = transform(trace, pairs);
  CHECK(result.topology.edges.count({0, 1}) == 1);
  CHECK(category_from_string("UNKNOWN") == Category::Unknown);
}

TEST_CASE("null-lock model: every cross-thread pair is NULL_LOCK") {
  const auto trace = testing::trace_of(R"(
memory flag = 0
memory sv = 0
thread * 2 {
  loop 2 {
    read flag -> f
    lock L
    if f == 1 { read sv -> r; write sv = r add 1 }
    compute 2
    unlock L
  }
}
)");
  const auto pairs = detect_all(trace);
  CHECK_FALSE(pairs.empty());
  for (const auto& p : pairs) CHECK(p.category == Category::NullLock);
}

TEST_CASE("pbzip2 consumers form read-read pairs on the outer lock") {
  const auto trace = testing::trace_of(R"(
memory fifo_empty = 1
memory producerDone = 1
thread * 2 {
  lock mu
  read fifo_empty -> e
  lock muDone
  read producerDone -> d
  unlock muDone
  unlock mu
}
)");
  bool outer = false;
  for (const auto& p : detect_all(trace))
    if (p.lock == "mu") {
      outer = true;
      CHECK(p.category == Category::ReadRead);
    }
  CHECK(outer);
}

TEST_CASE("detect_all covers every adjacent cross-thread pair exactly once") {
  for (const auto& e : list_corpus(ULCPKIT_CORPUS_DIR)) {
    CAPTURE(e.name);
    const auto trace = testing::corpus_trace(e.name);
    const auto secs = extract_critical_sections(trace);
    std::set<std::pair<SectionId, SectionId>> expected;
    for (std::size_t i = 0; i + 1 < secs.size(); ++i)
      if (secs[i].lock == secs[i + 1].lock && secs[i].tid != secs[i + 1].tid)
        expected.insert({secs[i].id, secs[i + 1].id});
    std::set<std::pair<SectionId, SectionId>> got;
    for (const auto& p : detect_all(trace)) {
      CHECK(got.insert({p.c1, p.c2}).second);
      CHECK(secs[static_cast<std::size_t>(p.c1)].tid != secs[static_cast<std::size_t>(p.c2)].tid);
    }
    CHECK(got == expected);
  }
}

TEST_CASE("unnecessary-contention verdicts never change memory when reordered") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> addrs{"a", "b", "c"};
  for (int i = 0; i < 300; ++i) {
    const auto b1 = oracle::random_body(rng, addrs, "p");
    const auto b2 = oracle::random_body(rng, addrs, "q");
    const std::map<std::string, std::int64_t> memory{{"a", 1}, {"b", 2}, {"c", 3}};
    const auto trace = testing::trace_of(oracle::two_section_workload(b1, b2, memory));
    const auto pairs = detect_all(trace);
    REQUIRE(pairs.size() == 1);
    if (!is_ulcp(pairs[0].category)) continue;
    auto fwd = memory;
    auto rev = memory;
    std::vector<std::int64_t> sink;
    oracle::execute(b1, fwd, sink);
    oracle::execute(b2, fwd, sink);
    oracle::execute(b2, rev, sink);
    oracle::execute(b1, rev, sink);
    CHECK(oracle::same_memory(fwd, rev));
  }
}

TEST_CASE("reversed replay agrees with a brute-force interpreter") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> addrs{"a", "b", "c"};
  std::uniform_int_distribution<int> init(-2, 2);
  for (int i = 0; i < 400; ++i) {
    const auto b1 = oracle::random_body(rng, addrs, "p");
    const auto b2 = oracle::random_body(rng, addrs, "q");
    const std::map<std::string, std::int64_t> memory{{"a", init(rng)}, {"b", init(rng)}, {"c", init(rng)}};
    const auto text = oracle::two_section_workload(b1, b2, memory);
    CAPTURE(text);
    CHECK(benign_check(testing::trace_of(text), 0, 1) == oracle::brute_force_benign(b1, b2, memory));
  }
}
