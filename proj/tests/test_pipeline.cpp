#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "ulcpkit/error.hpp"

using namespace ulcp;

TEST_CASE("pair records round-trip") {
  const auto trace = testing::corpus_trace("fig7_8_topology");
  const auto pairs = detect_all(trace);
  CHECK(parse_pairs_jsonl(pairs_jsonl(pairs)) == pairs);
}

TEST_CASE("report equals chaining the stages by hand") {
  const auto trace = testing::corpus_trace("fig18_pbzip2");
  const auto analysis = analyze(trace);

  const auto text = serialize_trace(trace);
  const auto reread = parse_trace_string(text);
  const auto pairs = parse_pairs_jsonl(pairs_jsonl(detect_all(reread)));
  const auto transformed = parse_trace_string(serialize_trace(transform(reread, pairs).trace));
  const auto orig = testing::run(reread, Policy::Elsc);
  const auto opt = testing::run(transformed, Policy::Elsc);
  CHECK(orig.makespan == analysis.original.makespan);
  CHECK(opt.makespan == analysis.optimized.makespan);
  std::int64_t sum = 0;
  for (const auto& p : pairs)
    if (is_ulcp(p.category)) sum += delta_t(p, orig, opt);
  CHECK(sum == analysis.metrics.sum_delta_t);
}

TEST_CASE("reports are deterministic") {
  const auto trace = testing::corpus_trace("case02_trx_list");
  CHECK(report_json(analyze(trace)) == report_json(analyze(trace)));
  CHECK(report_text(analyze(trace)) == report_text(analyze(trace)));
}

TEST_CASE("report JSON layout") {
  const auto j = nlohmann::json::parse(report_json(analyze(testing::corpus_trace("fig3_null_lock"))));
  for (const char* key : {"threads", "pairs", "ulcp_count", "histogram", "metrics", "groups", "races"})
    CHECK(j.contains(key));
  REQUIRE_FALSE(j["groups"].empty());
  CHECK(j["groups"][0]["category"] == "NULL_LOCK");
  CHECK(j["groups"][0]["rank"] == 1);
  const auto& m = j["metrics"];
  CHECK(m["t_pd"].get<std::int64_t>() + m["t_rw"].get<std::int64_t>() == m["sum_delta_t"].get<std::int64_t>());
}

TEST_CASE("figure-3 sweep: more threads, more pairs") {
  std::ifstream in(std::string(ULCPKIT_CORPUS_DIR) + "/fig3_null_lock.wl");
  std::stringstream text;
  text << in.rdbuf();
  const auto points = sweep(text.str(), "THREADS", {2, 4, 8}, 0);
  REQUIRE(points.size() == 3);
  CHECK(points[0].ulcp_count < points[1].ulcp_count);
  CHECK(points[1].ulcp_count < points[2].ulcp_count);
  const auto csv = sweep_csv(points);
  CHECK(csv.rfind("param,value,ulcp_count,t_pd,t_rw,t_pd_norm,t_rw_per_thread\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const auto sizes = sweep(text.str(), "SIZE", {2, 4}, 0, {{"THREADS", 4}});
  CHECK(sizes[0].ulcp_count < sizes[1].ulcp_count);
  CHECK_THROWS_AS(sweep(text.str(), "NOPE", {1}, 0), Error);
}

TEST_CASE("corpus entries meet their expectations") {
  const auto entries = list_corpus(ULCPKIT_CORPUS_DIR);
  CHECK(entries.size() >= 15);
  for (const auto& e : entries) {
    CAPTURE(e.name);
    CHECK(e.expect.count("dominant") == 1);
    const auto outcome = run_corpus_entry(e, 0);
    CHECK_MESSAGE(outcome.pass, outcome.detail);
  }
}

TEST_CASE("majority ties go to the earlier category") {
  CHECK(majority({Category::ReadRead, Category::NullLock}) == Category::NullLock);
  CHECK(majority({Category::ReadRead, Category::ReadRead, Category::NullLock}) == Category::ReadRead);
}
