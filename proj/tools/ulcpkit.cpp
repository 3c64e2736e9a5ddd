// ulcpkit command-line front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ulcpkit/error.hpp"
#include "ulcpkit/pipeline.hpp"

#ifndef ULCPKIT_CORPUS_DIR
#define ULCPKIT_CORPUS_DIR "corpus"
#endif

namespace {

using namespace ulcp;

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kAnalysis = 3 };

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Deadlock:
    case ErrorCode::NotReexecutable:
    case ErrorCode::CyclicConstraint:
    case ErrorCode::OrderUnsatisfiable:
      return kAnalysis;
    default:
      return kInput;
  }
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, std::string_view suffix) { return s.ends_with(suffix); }

std::map<std::string, std::int64_t> parse_params(const std::vector<std::string>& kv) {
  std::map<std::string, std::int64_t> out;
  for (const auto& s : kv) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--param", "expected NAME=VALUE, got '" + s + "'");
    out[s.substr(0, eq)] = std::stoll(s.substr(eq + 1));
  }
  return out;
}

Policy parse_policy(const std::string& s) {
  const auto p = policy_from_string(s);
  if (!p) throw CLI::ValidationError("--policy", "unknown policy '" + s + "'");
  return *p;
}

/// Workload files are recorded first; anything else is read as a trace.
Trace load_input(const std::string& path, std::uint64_t seed, const std::map<std::string, std::int64_t>& params) {
  if (ends_with(path, ".wl")) return record(load_workload(path, params), seed).trace;
  return load_trace(path);
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ULCPKIT_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detects and ranks unnecessary lock contention in recorded executions"};
  app.set_config("--config", "", "Read options from a TOML/INI file; flags win");
  app.require_subcommand(1);

  std::uint64_t seed = default_seed();
  std::string out_path;
  std::string input;
  std::vector<std::string> params;
  std::string policy_name = "elsc";

  auto* simulate = app.add_subcommand("simulate", "Record a workload into a trace");
  simulate->add_option("workload", input, "Workload file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Tie-break seed (default $ULCPKIT_SEED or 0)");
  simulate->add_option("--out", out_path, "Trace output (default stdout)");
  simulate->add_option("--param", params, "Override a workload parameter, NAME=VALUE");

  auto* detect = app.add_subcommand("detect", "Classify adjacent same-lock section pairs");
  detect->add_option("trace", input, "Trace or workload file")->required()->check(CLI::ExistingFile);
  detect->add_option("--out", out_path, "Pair records (default stdout)");
  detect->add_option("--seed", seed, "Recording seed for workload input");

  std::string pairs_path;
  std::string topo_path;
  auto* transform_cmd = app.add_subcommand("transform", "Emit the ULCP-free trace");
  transform_cmd->add_option("trace", input, "Trace file")->required()->check(CLI::ExistingFile);
  transform_cmd->add_option("ulcps", pairs_path, "Pair records from detect")->required()->check(CLI::ExistingFile);
  transform_cmd->add_option("--out", out_path, "Transformed trace (default stdout)");
  transform_cmd->add_option("--report", topo_path, "Topology JSON");

  int runs = 1;
  bool no_dynamic = false;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a trace under a scheduling policy");
  replay_cmd->add_option("trace", input, "Trace or workload file")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--policy", policy_name, "elsc|orig|sync|mem");
  replay_cmd->add_option("--seed", seed, "Seed (ORIG varies it per run)");
  replay_cmd->add_option("--runs", runs, "Number of replays")->check(CLI::PositiveNumber);
  replay_cmd->add_option("--out", out_path, "Result JSON (default stdout)");
  replay_cmd->add_flag("--no-dynamic", no_dynamic, "Acquire full locksets in transformed traces");

  std::string format;
  auto* report = app.add_subcommand("report", "Detect, transform, replay and rank");
  report->add_option("trace", input, "Trace or workload file")->required()->check(CLI::ExistingFile);
  report->add_option("--policy", policy_name, "elsc|orig|sync|mem");
  report->add_option("--seed", seed, "Recording and replay seed");
  report->add_option("--out", out_path, "report.json or report.txt (default stdout, text)");
  report->add_option("--format", format, "text|json (default from --out extension)");
  report->add_option("--param", params, "Override a workload parameter, NAME=VALUE");
  report->add_flag("--no-dynamic", no_dynamic, "Acquire full locksets in the ULCP-free replay");

  std::string threads_list;
  std::string sizes_list;
  std::string sweep_param;
  std::string values_list;
  auto* sweep_cmd = app.add_subcommand("sweep", "Analyze a workload across parameter values (CSV)");
  sweep_cmd->add_option("workload", input, "Workload file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--threads", threads_list, "Values for the THREADS parameter, e.g. 2,4,8");
  sweep_cmd->add_option("--sizes", sizes_list, "Values for the SIZE parameter");
  sweep_cmd->add_option("--sweep-param", sweep_param, "Parameter name for --values");
  sweep_cmd->add_option("--values", values_list, "Comma-separated values for --sweep-param");
  sweep_cmd->add_option("--seed", seed, "Recording seed");
  sweep_cmd->add_option("--param", params, "Fix another parameter, NAME=VALUE");
  sweep_cmd->add_option("--out", out_path, "CSV output (default stdout)");

  std::string from_marker;
  std::string to_marker;
  auto* slice = app.add_subcommand("slice", "Cut a trace between two markers");
  slice->add_option("trace", input, "Trace file")->required()->check(CLI::ExistingFile);
  slice->add_option("--from", from_marker, "Start marker")->required();
  slice->add_option("--to", to_marker, "End marker")->required();
  slice->add_option("--out", out_path, "Trace output (default stdout)");

  std::string corpus_dir = ULCPKIT_CORPUS_DIR;
  auto* corpus = app.add_subcommand("corpus", "Bundled case-study workloads");
  corpus->require_subcommand(1);
  auto* corpus_list = corpus->add_subcommand("list", "List workloads and expectations");
  corpus_list->add_option("--dir", corpus_dir, "Corpus directory");
  auto* corpus_run = corpus->add_subcommand("run", "Check every workload against its expectations");
  corpus_run->add_option("--dir", corpus_dir, "Corpus directory");
  corpus_run->add_option("--seed", seed, "Recording seed when the expectations name none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const auto overrides = parse_params(params);
    if (simulate->parsed()) {
      emit(out_path, serialize_trace(record(load_workload(input, overrides), seed).trace));
    } else if (detect->parsed()) {
      emit(out_path, pairs_jsonl(detect_all(load_input(input, seed, overrides))));
    } else if (transform_cmd->parsed()) {
      const auto trace = load_trace(input);
      const auto pairs = parse_pairs_jsonl(slurp(pairs_path));
      const auto result = transform(trace, pairs);
      emit(out_path, serialize_trace(result.trace));
      if (!topo_path.empty()) emit(topo_path, topology_json(result));
    } else if (replay_cmd->parsed()) {
      const auto trace = load_input(input, seed, overrides);
      emit(out_path, replay_json(replay_n(trace, parse_policy(policy_name), runs, seed, !no_dynamic)));
    } else if (report->parsed()) {
      const auto trace = load_input(input, seed, overrides);
      AnalysisOptions opts;
      opts.policy = parse_policy(policy_name);
      opts.seed = seed;
      opts.dynamic_locking = !no_dynamic;
      const auto analysis = analyze(trace, opts);
      if (format.empty()) format = ends_with(out_path, ".json") ? "json" : "text";
      if (format != "json" && format != "text") throw CLI::ValidationError("--format", "expected text or json");
      emit(out_path, format == "json" ? report_json(analysis) : report_text(analysis));
    } else if (sweep_cmd->parsed()) {
      std::string name = sweep_param;
      std::string list = values_list;
      if (!threads_list.empty()) {
        name = "THREADS";
        list = threads_list;
      } else if (!sizes_list.empty()) {
        name = "SIZE";
        list = sizes_list;
      }
      if (name.empty() || list.empty())
        throw CLI::ValidationError("sweep", "give --threads, --sizes, or --sweep-param with --values");
      std::vector<std::int64_t> values;
      std::stringstream ss(list);
      for (std::string tok; std::getline(ss, tok, ',');) values.push_back(std::stoll(tok));
      emit(out_path, sweep_csv(sweep(slurp(input), name, values, seed, overrides)));
    } else if (slice->parsed()) {
      emit(out_path, serialize_trace(slice_trace(load_trace(input), from_marker, to_marker)));
    } else if (corpus_list->parsed()) {
      for (const auto& e : list_corpus(corpus_dir)) {
        std::cout << e.name;
        for (const auto& [k, v] : e.expect) std::cout << "  " << k << "=" << v;
        std::cout << "\n";
      }
    } else if (corpus_run->parsed()) {
      bool all = true;
      for (const auto& e : list_corpus(corpus_dir)) {
        const auto r = run_corpus_entry(e, seed);
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        all = all && r.pass;
      }
      return all ? kOk : kAnalysis;
    }
  } catch (const CLI::Error& e) {
    std::cerr << nlohmann::json{{"error", "USAGE"}, {"message", e.what()}}.dump() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << "\n";
    return exit_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "INPUT"}, {"message", e.what()}}.dump() << "\n";
    return kInput;
  }
  return kOk;
}
