#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "ulcpkit/error.hpp"

using namespace ulcp;

namespace {

/// Completion order of `nodes` in one replay of a transformed trace.
std::vector<SectionId> completion_order(const Trace& transformed, const ReplayResult& r,
                                        const std::vector<SectionId>& nodes) {
  const auto spans = section_spans(transformed);
  std::vector<std::pair<std::int64_t, SectionId>> done;
  for (const auto id : nodes)
    for (const auto& s : spans)
      if (s.id == id) done.push_back({r.arrivals.at(s.tid).at(s.end - 1), id});
  std::sort(done.begin(), done.end());
  std::vector<SectionId> out;
  for (const auto& [t, id] : done) out.push_back(id);
  return out;
}

void check_topology_invariants(const Trace& trace, const TransformResult& result) {
  const auto secs = extract_critical_sections(trace);
  const auto& topo = result.topology;
  std::set<SectionId> with_edges;
  for (const auto& [a, b] : topo.edges) {
    CHECK(secs[static_cast<std::size_t>(a)].acq_ord < secs[static_cast<std::size_t>(b)].acq_ord);
    CHECK(secs[static_cast<std::size_t>(a)].lock == secs[static_cast<std::size_t>(b)].lock);
    with_edges.insert(a);
    with_edges.insert(b);
  }
  for (const auto& [lock, nodes] : topo.partial_orders)
    for (const auto id : nodes) CHECK(with_edges.count(id) == 1);
  for (const auto id : topo.standalone) CHECK(with_edges.count(id) == 0);

  const auto& as = result.assignment;
  std::set<LockId> seen;
  for (const auto& [node, lock] : as.out_lock) {
    CHECK(seen.insert(lock).second);
    CHECK(is_aux_lock(lock));
    CHECK_FALSE(topo.targets(node).empty());
  }
  for (const auto& [a, b] : topo.edges) {
    REQUIRE(as.out_lock.count(a) == 1);
    const auto& ls = as.lockset.at(b);
    CHECK(std::find(ls.begin(), ls.end(), as.out_lock.at(a)) != ls.end());
  }
  for (const auto& [node, ls] : as.lockset) CHECK(std::is_sorted(ls.begin(), ls.end(), aux_lock_less));
}

}  // namespace

TEST_CASE("three-thread example: edges, pinned order and locksets") {
  const auto trace = testing::corpus_trace("fig7_8_topology");
  const auto result = transform(trace, detect_all(trace));
  const auto& topo = result.topology;
  // Single lock, so section ids equal acquisition positions:
  // 0 R1(T1), 1 R2(T2), 2 W1(T3), 3 R2(T1), 4 W1(T2), 5 W1(T3).
  CHECK(topo.edges == std::set<std::pair<SectionId, SectionId>>{{0, 2}, {0, 4}, {2, 4}, {4, 5}});
  CHECK(topo.partial_orders.at("L") == std::vector<SectionId>{0, 2, 4, 5});
  CHECK(topo.standalone == std::vector<SectionId>{1, 3});
  const auto& as = result.assignment;
  CHECK(as.out_lock.size() == 3);
  CHECK(as.lockset.at(2) == std::vector<LockId>{as.out_lock.at(0), as.out_lock.at(2)});
  CHECK(as.lockset.at(5) == std::vector<LockId>{as.out_lock.at(4)});
  CHECK(as.end_flags.at(0) == "C0.END");
  check_topology_invariants(trace, result);
}

TEST_CASE("auxiliary lock names order numerically") {
  CHECK(aux_lock_less("@L2", "@L10"));
  CHECK_FALSE(aux_lock_less("@L10", "@L2"));
}

TEST_CASE("sections with an empty lockset lose their lock events") {
  const auto trace = testing::trace_of(R"(
memory x = 0
thread { lock L; read x -> a; compute 3; unlock L }
thread { compute 1; lock L; read x -> b; unlock L }
)");
  const auto out = transform(trace, detect_all(trace)).trace;
  for (const auto& [tid, events] : out.threads)
    for (const auto& ev : events) {
      CHECK(ev.kind != EventKind::LockAcq);
      CHECK(ev.kind != EventKind::LockRel);
    }
  CHECK(out.aux_locks.empty() == true);
  const auto before = testing::run(trace, Policy::Elsc);
  const auto after = testing::run(out, Policy::Elsc);
  CHECK(before.makespan == 5);
  CHECK(after.makespan == 4);
}

TEST_CASE("dynamic lockset drops finished sources") {
  TransformedSection s;
  s.id = 9;
  s.lockset = {"@L1", "@L2", "@L3"};
  s.out_lock = "@L3";
  s.sources = {1, 2};
  const std::map<SectionId, LockId> out{{1, "@L1"}, {2, "@L2"}, {9, "@L3"}};
  CHECK(dynamic_lockset(s, {}, out) == std::vector<LockId>{"@L1", "@L2", "@L3"});
  CHECK(dynamic_lockset(s, {1}, out) == std::vector<LockId>{"@L2", "@L3"});
  CHECK(dynamic_lockset(s, {1, 2}, out) == std::vector<LockId>{"@L3"});
}

TEST_CASE("contradictory ordering constraints are rejected") {
  const auto trace = testing::trace_of(R"(
memory x = 0
thread { lock L; write x = 1; unlock L; compute 5; lock L; write x = 2; unlock L }
thread { compute 1; lock L; write x = 3; unlock L; compute 5; lock L; write x = 4; unlock L }
)");
  const auto secs = extract_critical_sections(trace);
  REQUIRE(secs.size() == 4);
  // Acquisition order alternates threads: 0 (T0), 1 (T1), 2 (T0), 3 (T1).
  Topology topo;
  topo.nodes = {0, 1, 2, 3};
  topo.edges = {{0, 1}, {1, 2}, {2, 3}};
  topo.partial_orders["L"] = {2, 1, 0, 3};
  try {
    emit_ulcp_free_trace(trace, topo, assign_locksets(topo));
    FAIL("expected CYCLIC_CONSTRAINT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CyclicConstraint);
  }
}

TEST_CASE("topology invariants, edge soundness and first match across the corpus") {
  for (const auto& e : list_corpus(ULCPKIT_CORPUS_DIR)) {
    CAPTURE(e.name);
    const auto trace = testing::corpus_trace(e.name);
    PairClassifier classifier(trace);
    const auto pairs = detect_all(classifier);
    const auto result = transform(classifier, trace, pairs);
    check_topology_invariants(trace, result);
    for (const auto& [a, b] : result.topology.edges) CHECK_FALSE(is_ulcp(classifier.classify(a, b).category));
    for (const auto& p : pairs)
      if (is_ulcp(p.category)) CHECK(result.topology.edges.count({p.c1, p.c2}) == 0);
    CHECK(result.topology.edges == oracle::first_match_edges(classifier));
  }
}

TEST_CASE("randomized workloads: first match, pinned order, dynamic equivalence, no deadlock") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 150; ++i) {
    const auto text = oracle::conflict_free_workload(rng);
    CAPTURE(text);
    const auto trace = testing::trace_of(text, static_cast<std::uint64_t>(i));
    PairClassifier classifier(trace);
    const auto pairs = detect_all(classifier);
    const auto result = transform(classifier, trace, pairs);
    check_topology_invariants(trace, result);
    CHECK(result.topology.edges == oracle::first_match_edges(classifier));

    ReplayOptions dyn;
    ReplayOptions naive;
    naive.dynamic_locking = false;
    ReplayResult with;
    ReplayResult without;
    REQUIRE_NOTHROW(with = replay(result.trace, dyn));
    REQUIRE_NOTHROW(without = replay(result.trace, naive));
    CHECK(with.final_memory == without.final_memory);
    CHECK(with.aux_acquisitions <= without.aux_acquisitions);
    for (const auto& [lock, nodes] : result.topology.partial_orders) {
      CHECK(completion_order(result.trace, with, nodes) == nodes);
      CHECK(completion_order(result.trace, without, nodes) == nodes);
      for (std::uint64_t s = 0; s < 3; ++s) {
        ReplayOptions orig;
        orig.policy = Policy::Orig;
        orig.seed = s;
        CHECK(completion_order(result.trace, replay(result.trace, orig), nodes) == nodes);
      }
    }
  }
}

TEST_CASE("divergence under the ULCP-free schedule is always reported") {
  // Benign pairs lose their lock and may interleave, which is where divergence comes from.
  std::mt19937_64 rng(99);
  const std::vector<std::string> addrs{"a", "b"};
  const std::map<std::string, std::int64_t> memory{{"a", 1}, {"b", 2}};
  int diverged = 0;
  for (int i = 0; i < 400; ++i) {
    const auto text = i % 2 == 0 ? oracle::conflict_free_workload(rng)
                                 : oracle::two_section_workload(oracle::random_body(rng, addrs, "p"),
                                                                oracle::random_body(rng, addrs, "q"), memory);
    CAPTURE(text);
    const auto analysis = analyze(testing::trace_of(text, static_cast<std::uint64_t>(i)));
    const bool same = analysis.optimized.final_memory == analysis.original.final_memory;
    CHECK(analysis.races.empty() == same);
    if (!same) {
      ++diverged;
      for (const auto& addr : analysis.races.diverged)
        CHECK(analysis.optimized.final_memory.at(addr) != analysis.original.final_memory.at(addr));
    }
  }
  CHECK(diverged > 0);
}

TEST_CASE("injected unprotected traffic is named in the race report") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto analysis = analyze(testing::trace_of(oracle::injected_conflict_workload(rng, "z")));
    REQUIRE_FALSE(analysis.races.empty());
    CHECK(analysis.races.diverged == std::vector<Addr>{"z"});
    CHECK_FALSE(analysis.races.races.empty());
    for (const auto& r : analysis.races.races) CHECK(r.first.tid != r.second.tid);
  }
}
