#include "ulcpkit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ulcpkit/error.hpp"

namespace ulcp {

using ojson = nlohmann::ordered_json;

Analysis analyze(const Trace& trace, const AnalysisOptions& options) {
  Analysis a;
  PairClassifier classifier(trace);
  a.pairs = detect_all(classifier);
  a.transformed = transform(classifier, trace, a.pairs);

  ReplayOptions ro;
  ro.policy = options.policy;
  ro.seed = options.seed;
  ro.dynamic_locking = options.dynamic_locking;
  a.original = replay(trace, ro);
  ro.track_clocks = true;
  a.optimized = replay(a.transformed.trace, ro);

  std::vector<FusionInput> inputs;
  a.pair_delta_t.assign(a.pairs.size(), 0);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    const auto& p = a.pairs[i];
    ++a.histogram[p.category];
    if (!is_ulcp(p.category)) continue;
    ++a.ulcp_count;
    a.pair_delta_t[i] = delta_t(p, a.original, a.optimized);
    inputs.push_back({p.site1, p.site2, a.pair_delta_t[i], i});
  }
  a.groups = rank(fuse(inputs));
  for (std::size_t k = 0; k < a.groups.size(); ++k) {
    std::vector<Category> cats;
    for (const auto m : a.groups[k].members) cats.push_back(a.pairs[m].category);
    a.group_category[k] = majority(cats);
  }
  a.metrics = aggregate_metrics(a.original, a.optimized, a.groups, thread_count(trace));
  a.races = check_transform_races(a.original, a.optimized);
  return a;
}

Category majority(const std::vector<Category>& categories) {
  std::map<Category, std::size_t> count;
  for (const auto c : categories) ++count[c];
  Category best = Category::Unknown;
  std::size_t best_n = 0;
  for (const auto& [c, n] : count)
    if (n > best_n) {
      best = c;
      best_n = n;
    }
  return best;
}

std::optional<Category> dominant_category(const Analysis& analysis) {
  std::vector<Category> cats;
  for (const auto& p : analysis.pairs)
    if (is_ulcp(p.category)) cats.push_back(p.category);
  if (cats.empty()) return std::nullopt;
  return majority(cats);
}

namespace {

ojson region_json(const CodeRegion& cr) { return ojson::array({cr.file, cr.lo, cr.hi}); }

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

ojson timing_json(const ReplayResult& r) {
  ojson per = ojson::object();
  for (const auto& [tid, t] : r.per_thread)
    per[std::to_string(tid)] = {{"completion", t.completion}, {"busy", t.busy}, {"wait", t.wait}};
  return per;
}

}  // namespace

std::string report_json(const Analysis& a) {
  ojson j;
  j["threads"] = a.metrics.n_thread;
  j["pairs"] = a.pairs.size();
  j["ulcp_count"] = a.ulcp_count;
  ojson hist = ojson::object();
  for (const auto& [c, n] : a.histogram) hist[std::string(to_string(c))] = n;
  j["histogram"] = hist;
  const auto& m = a.metrics;
  j["metrics"] = {{"t_real", m.t_real},
                  {"t_optimized", a.optimized.makespan},
                  {"t_pd", m.t_pd},
                  {"t_rw", m.t_rw},
                  {"sum_delta_t", m.sum_delta_t},
                  {"t_pd_norm", m.t_pd_norm},
                  {"t_rw_per_thread", m.t_rw_per_thread}};
  ojson groups = ojson::array();
  for (std::size_t k = 0; k < a.groups.size(); ++k) {
    const auto& g = a.groups[k];
    ojson members = ojson::array();
    for (const auto i : g.members) {
      const auto& p = a.pairs[i];
      members.push_back({{"lock", p.lock},
                         {"c1", p.c1},
                         {"c2", p.c2},
                         {"category", to_string(p.category)},
                         {"delta_t", a.pair_delta_t[i]}});
    }
    ojson entry = {{"rank", k + 1},
                   {"category", to_string(a.group_category.at(k))},
                   {"cr1", region_json(g.cr1)},
                   {"cr2", region_json(g.cr2)},
                   {"delta_t", g.delta_t}};
    entry["p"] = g.p ? ojson(*g.p) : ojson(nullptr);
    entry["members"] = members;
    groups.push_back(entry);
  }
  j["groups"] = groups;
  ojson races = ojson::array();
  for (const auto& r : a.races.races)
    races.push_back({{"addr", r.addr},
                     {"first", {{"tid", r.first.tid}, {"index", r.first.index}, {"write", r.first.write}}},
                     {"second", {{"tid", r.second.tid}, {"index", r.second.index}, {"write", r.second.write}}}});
  j["races"] = {{"diverged", a.races.diverged}, {"pairs", races}};
  ojson warnings = ojson::array();
  for (const auto& p : a.pairs)
    if (p.not_reexecutable)
      warnings.push_back("pair C" + std::to_string(p.c1) + "/C" + std::to_string(p.c2) +
                         " not re-executable, assumed TLCP");
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

std::string report_text(const Analysis& a) {
  std::ostringstream os;
  const auto& m = a.metrics;
  os << "threads " << m.n_thread << ", pairs " << a.pairs.size() << ", ulcps " << a.ulcp_count << "\n";
  os << "categories:";
  for (const auto& [c, n] : a.histogram) os << " " << to_string(c) << "=" << n;
  os << "\n";
  os << "makespan original " << m.t_real << ", ulcp-free " << a.optimized.makespan << "\n";
  os << "T_pd " << m.t_pd << "  T_rw " << m.t_rw << "  sum dT " << m.sum_delta_t << "\n";
  os << "T_pd/T_real " << fixed(m.t_pd_norm) << "  T_rw/N_thread " << fixed(m.t_rw_per_thread) << "\n";
  os << "\n";
  if (a.groups.empty()) os << "no ULCP groups\n";
  for (std::size_t k = 0; k < a.groups.size(); ++k) {
    const auto& g = a.groups[k];
    os << "#" << (k + 1) << " " << to_string(a.group_category.at(k)) << "  " << to_string(g.cr1) << " x "
       << to_string(g.cr2) << "  dT " << g.delta_t << "  p " << (g.p ? fixed(*g.p) : std::string("n/a")) << "\n";
    for (const auto i : g.members) {
      const auto& p = a.pairs[i];
      os << "    " << p.lock << " C" << p.c1 << "/C" << p.c2 << " " << to_string(p.category) << " dT "
         << a.pair_delta_t[i] << "\n";
    }
  }
  if (!a.races.empty()) {
    os << "\nraces:\n";
    for (const auto& addr : a.races.diverged) os << "  diverged " << addr << "\n";
    for (const auto& r : a.races.races)
      os << "  " << r.addr << " T" << r.first.tid << "#" << r.first.index << (r.first.write ? "w" : "r") << " || T"
         << r.second.tid << "#" << r.second.index << (r.second.write ? "w" : "r") << "\n";
  }
  for (const auto& p : a.pairs)
    if (p.not_reexecutable)
      os << "warning: pair C" << p.c1 << "/C" << p.c2 << " not re-executable, assumed TLCP\n";
  return os.str();
}

std::string pairs_jsonl(const std::vector<UlcpPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    ojson j = {{"lock", p.lock},
               {"c1", p.c1},
               {"c2", p.c2},
               {"category", to_string(p.category)},
               {"sites", ojson::array({region_json(p.site1), region_json(p.site2)})}};
    if (p.not_reexecutable) j["warning"] = "NOT_REEXECUTABLE";
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<UlcpPair> parse_pairs_jsonl(const std::string& text) {
  std::vector<UlcpPair> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  auto region = [](const nlohmann::json& j) {
    return CodeRegion{j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), j.at(2).get<std::int64_t>()};
  };
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      UlcpPair p;
      p.lock = j.at("lock").get<std::string>();
      p.c1 = j.at("c1").get<SectionId>();
      p.c2 = j.at("c2").get<SectionId>();
      const auto cat = category_from_string(j.at("category").get<std::string>());
      if (!cat) throw std::runtime_error("unknown category");
      p.category = *cat;
      p.site1 = region(j.at("sites").at(0));
      p.site2 = region(j.at("sites").at(1));
      p.not_reexecutable = j.contains("warning");
      out.push_back(p);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "pairs line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string topology_json(const TransformResult& t) {
  const auto& topo = t.topology;
  ojson j;
  j["nodes"] = topo.nodes;
  ojson edges = ojson::array();
  for (const auto& [a, b] : topo.edges) edges.push_back({a, b});
  j["edges"] = edges;
  ojson po = ojson::object();
  for (const auto& [lock, order] : topo.partial_orders) po[lock] = order;
  j["partial_orders"] = po;
  j["standalone"] = topo.standalone;
  ojson out_locks = ojson::object();
  for (const auto& [id, l] : t.assignment.out_lock) out_locks[std::to_string(id)] = l;
  j["out_locks"] = out_locks;
  ojson locksets = ojson::object();
  for (const auto& [id, ls] : t.assignment.lockset) locksets[std::to_string(id)] = ls;
  j["locksets"] = locksets;
  ojson flags = ojson::object();
  for (const auto& [id, f] : t.assignment.end_flags) flags[std::to_string(id)] = f;
  j["end_flags"] = flags;
  return j.dump(2) + "\n";
}

std::string replay_json(const ReplaySeries& series) {
  ojson j;
  j["runs"] = series.results.size();
  j["mean_makespan"] = series.mean_makespan;
  j["variance"] = series.variance;
  j["identical"] = series.identical;
  ojson results = ojson::array();
  for (const auto& r : series.results) {
    ojson e;
    e["makespan"] = r.makespan;
    e["per_thread"] = timing_json(r);
    ojson ts = ojson::object();
    for (const auto& [k, v] : r.timestamps) ts[k] = v;
    e["timestamps"] = ts;
    ojson mem = ojson::object();
    for (const auto& [k, v] : r.final_memory) mem[k] = v;
    e["final_memory"] = mem;
    ojson order = ojson::object();
    for (const auto& [lock, refs] : r.realized_lock_order) {
      ojson list = ojson::array();
      for (const auto& ref : refs) list.push_back({ref.tid, ref.seq});
      order[lock] = list;
    }
    e["realized_lock_order"] = order;
    e["aux_acquisitions"] = r.aux_acquisitions;
    results.push_back(e);
  }
  j["results"] = results;
  return j.dump(2) + "\n";
}

std::vector<SweepPoint> sweep(const std::string& workload_text, const std::string& param,
                              const std::vector<std::int64_t>& values, std::uint64_t seed,
                              const std::map<std::string, std::int64_t>& fixed_params) {
  std::vector<SweepPoint> out;
  for (const auto v : values) {
    auto overrides = fixed_params;
    overrides[param] = v;
    const auto prog = parse_workload(workload_text, overrides);
    const auto rec = record(prog, seed);
    AnalysisOptions opts;
    opts.seed = seed;
    const auto a = analyze(rec.trace, opts);
    out.push_back({param, v, a.ulcp_count, a.metrics});
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "param,value,ulcp_count,t_pd,t_rw,t_pd_norm,t_rw_per_thread\n";
  for (const auto& p : points)
    os << p.param << "," << p.value << "," << p.ulcp_count << "," << p.metrics.t_pd << "," << p.metrics.t_rw << ","
       << fixed(p.metrics.t_pd_norm) << "," << fixed(p.metrics.t_rw_per_thread) << "\n";
  return os.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<CorpusEntry> list_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "corpus directory '" + dir + "' not found");
  std::vector<CorpusEntry> out;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (f.path().extension() != ".wl") continue;
    CorpusEntry e;
    e.name = f.path().stem().string();
    e.workload_path = f.path().string();
    auto expect_path = f.path();
    expect_path.replace_extension(".expect");
    std::ifstream in(expect_path);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line.substr(0, line.find('#')));
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      e.expect[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const CorpusEntry& a, const CorpusEntry& b) { return a.name < b.name; });
  return out;
}

CorpusOutcome run_corpus_entry(const CorpusEntry& entry, std::uint64_t seed) {
  CorpusOutcome out;
  out.name = entry.name;
  if (const auto it = entry.expect.find("seed"); it != entry.expect.end()) seed = std::stoull(it->second);
  const auto prog = load_workload(entry.workload_path);
  const auto rec = record(prog, seed);
  AnalysisOptions opts;
  opts.seed = seed;
  const auto a = analyze(rec.trace, opts);
  const auto dom = dominant_category(a);
  const std::string got_dom = dom ? std::string(to_string(*dom)) : "NONE";
  const std::string got_top = a.groups.empty() ? "NONE" : std::string(to_string(a.group_category.at(0)));
  out.pass = true;
  std::ostringstream detail;
  detail << "dominant " << got_dom << ", top group " << got_top << ", ulcps " << a.ulcp_count;
  if (const auto it = entry.expect.find("dominant"); it != entry.expect.end() && it->second != got_dom) {
    out.pass = false;
    detail << " (expected dominant " << it->second << ")";
  }
  if (const auto it = entry.expect.find("top_group"); it != entry.expect.end() && it->second != got_top) {
    out.pass = false;
    detail << " (expected top group " << it->second << ")";
  }
  if (entry.expect.empty()) {
    out.pass = false;
    detail << " (no expectations file)";
  }
  out.detail = detail.str();
  return out;
}

}  // namespace ulcp
