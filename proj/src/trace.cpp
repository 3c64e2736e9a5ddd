#include "ulcpkit/trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ulcpkit/error.hpp"

namespace ulcp {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MALFORMED_RECORD";
    case ErrorCode::InvariantViolation: return "INVARIANT_VIOLATION";
    case ErrorCode::MarkerNotFound: return "MARKER_NOT_FOUND";
    case ErrorCode::UnbalancedSlice: return "UNBALANCED_SLICE";
    case ErrorCode::SyntaxError: return "SYNTAX_ERROR";
    case ErrorCode::UnbalancedLock: return "UNBALANCED_LOCK";
    case ErrorCode::UnboundRegister: return "UNBOUND_REGISTER";
    case ErrorCode::Deadlock: return "DEADLOCK";
    case ErrorCode::NotReexecutable: return "NOT_REEXECUTABLE";
    case ErrorCode::CyclicConstraint: return "CYCLIC_CONSTRAINT";
    case ErrorCode::OrderUnsatisfiable: return "ORDER_UNSATISFIABLE";
    case ErrorCode::MissingLabel: return "MISSING_LABEL";
    case ErrorCode::Io: return "IO_ERROR";
  }
  return "UNKNOWN_ERROR";
}

namespace {

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::ThreadStart, "THREAD_START"}, {EventKind::ThreadEnd, "THREAD_END"},
    {EventKind::LockAcq, "LOCK_ACQ"},         {EventKind::LockRel, "LOCK_REL"},
    {EventKind::Read, "READ"},                {EventKind::Write, "WRITE"},
    {EventKind::Compute, "COMPUTE"},          {EventKind::Marker, "MARKER"},
};

[[noreturn]] void malformed(std::size_t line, const std::string& reason) {
  throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + reason);
}

[[noreturn]] void violation(const std::string& invariant, const TraceEvent* ev = nullptr) {
  std::string msg = invariant;
  if (ev) msg += " (tid " + std::to_string(ev->tid) + ", seq " + std::to_string(ev->seq) + ")";
  throw Error(ErrorCode::InvariantViolation, msg);
}

std::int64_t get_int(const json& j, const char* field, std::size_t line) {
  if (!j.is_number_integer()) malformed(line, std::string("field '") + field + "' must be an integer");
  return j.get<std::int64_t>();
}

std::string get_str(const json& j, const char* field, std::size_t line) {
  if (!j.is_string()) malformed(line, std::string("field '") + field + "' must be a string");
  return j.get<std::string>();
}

Operand parse_operand(const json& j, std::size_t line) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  malformed(line, "valexpr operand must be a register name or an integer");
}

ValueExpr parse_valexpr(const json& j, std::size_t line) {
  if (!j.is_object()) malformed(line, "valexpr must be an object");
  if (j.contains("const")) {
    if (j.size() != 1) malformed(line, "const valexpr takes no other fields");
    return ValueExpr::make_const(get_int(j["const"], "const", line));
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "op" && it.key() != "a" && it.key() != "b")
      malformed(line, "unknown valexpr field '" + it.key() + "'");
  }
  if (!j.contains("op") || !j.contains("a") || !j.contains("b")) malformed(line, "op valexpr needs op, a and b");
  const auto op = get_str(j["op"], "op", line);
  ArithOp aop;
  if (op == "add") aop = ArithOp::Add;
  else if (op == "sub") aop = ArithOp::Sub;
  else if (op == "copy") aop = ArithOp::Copy;
  else malformed(line, "unknown op '" + op + "'");
  return ValueExpr::make_op(aop, parse_operand(j["a"], line), parse_operand(j["b"], line));
}

ordered_json operand_json(const Operand& op) {
  if (const auto* r = std::get_if<std::string>(&op)) return *r;
  return std::get<std::int64_t>(op);
}

ordered_json valexpr_json(const ValueExpr& v) {
  ordered_json j = ordered_json::object();
  if (v.kind == ValueExpr::Kind::Const) {
    j["const"] = v.constant;
  } else {
    j["op"] = std::string(to_string(v.op));
    j["a"] = operand_json(v.a);
    j["b"] = operand_json(v.b);
  }
  return j;
}

TraceEvent parse_event(const json& j, std::size_t line) {
  if (!j.is_object()) malformed(line, "event record must be an object");
  static const std::set<std::string> known = {"tid",  "seq", "kind", "lock",    "acq_ord", "site",
                                              "addr", "reg", "valexpr", "cost", "name"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) malformed(line, "unknown field '" + it.key() + "'");
  }
  for (const char* req : {"tid", "seq", "kind"}) {
    if (!j.contains(req)) malformed(line, std::string("missing field '") + req + "'");
  }
  TraceEvent ev;
  ev.tid = static_cast<Tid>(get_int(j["tid"], "tid", line));
  if (ev.tid < 0) malformed(line, "tid must be non-negative");
  ev.seq = get_int(j["seq"], "seq", line);
  const auto kind = event_kind_from_string(get_str(j["kind"], "kind", line));
  if (!kind) malformed(line, "unknown kind '" + j["kind"].get<std::string>() + "'");
  ev.kind = *kind;

  const bool is_lock = ev.kind == EventKind::LockAcq || ev.kind == EventKind::LockRel;
  const bool is_mem = ev.kind == EventKind::Read || ev.kind == EventKind::Write;
  auto check_presence = [&](const char* field, bool allowed, bool required) {
    const bool present = j.contains(field);
    if (present && !allowed) malformed(line, std::string("field '") + field + "' not allowed on " + std::string(to_string(ev.kind)));
    if (!present && required) malformed(line, std::string("missing field '") + field + "' on " + std::string(to_string(ev.kind)));
    return present;
  };
  if (check_presence("lock", is_lock, is_lock)) ev.lock = get_str(j["lock"], "lock", line);
  const bool acq = ev.kind == EventKind::LockAcq;
  if (check_presence("acq_ord", acq, acq)) ev.acq_ord = get_int(j["acq_ord"], "acq_ord", line);
  if (check_presence("site", acq, acq)) {
    const auto& s = j["site"];
    if (!s.is_array() || s.size() != 3) malformed(line, "site must be [file, lo, hi]");
    CodeRegion cr{get_int(s[0], "site", line), get_int(s[1], "site", line), get_int(s[2], "site", line)};
    if (cr.lo > cr.hi) malformed(line, "site interval must satisfy lo <= hi");
    ev.site = cr;
  }
  if (check_presence("addr", is_mem, is_mem)) ev.addr = get_str(j["addr"], "addr", line);
  const bool rd = ev.kind == EventKind::Read;
  if (check_presence("reg", rd, rd)) ev.reg = get_str(j["reg"], "reg", line);
  if (check_presence("valexpr", ev.kind == EventKind::Write, false)) ev.valexpr = parse_valexpr(j["valexpr"], line);
  const bool mk = ev.kind == EventKind::Marker;
  if (check_presence("name", mk, mk)) ev.name = get_str(j["name"], "name", line);
  const bool compute = ev.kind == EventKind::Compute;
  if (check_presence("cost", true, compute)) {
    ev.cost = get_int(j["cost"], "cost", line);
    if (ev.cost < 0) malformed(line, "cost must be non-negative");
  } else {
    ev.cost = default_cost(ev.kind);
  }
  return ev;
}

ordered_json event_json(const TraceEvent& ev) {
  ordered_json j = ordered_json::object();
  j["tid"] = ev.tid;
  j["seq"] = ev.seq;
  j["kind"] = std::string(to_string(ev.kind));
  if (ev.lock) j["lock"] = *ev.lock;
  if (ev.acq_ord) j["acq_ord"] = *ev.acq_ord;
  if (ev.site) j["site"] = ordered_json::array({ev.site->file, ev.site->lo, ev.site->hi});
  if (ev.addr) j["addr"] = *ev.addr;
  if (ev.reg) j["reg"] = *ev.reg;
  if (ev.valexpr) j["valexpr"] = valexpr_json(*ev.valexpr);
  if (ev.kind == EventKind::Compute || ev.cost != default_cost(ev.kind)) j["cost"] = ev.cost;
  if (ev.name) j["name"] = *ev.name;
  return j;
}

void parse_header(const json& h, Trace& trace) {
  if (!h.is_object()) malformed(1, "header must be an object");
  static const std::set<std::string> known = {"v", "caps", "unit", "mem", "aux_locks", "sections", "order"};
  for (auto it = h.begin(); it != h.end(); ++it) {
    if (!known.contains(it.key())) malformed(1, "unknown header field '" + it.key() + "'");
  }
  if (!h.contains("v")) malformed(1, "header lacks version 'v'");
  trace.version = static_cast<int>(get_int(h["v"], "v", 1));
  if (trace.version != 1) malformed(1, "unsupported version " + std::to_string(trace.version));
  if (h.contains("caps")) {
    if (!h["caps"].is_array()) malformed(1, "caps must be an array");
    for (const auto& c : h["caps"]) trace.caps.push_back(get_str(c, "caps", 1));
  }
  if (h.contains("unit")) trace.time_unit = get_str(h["unit"], "unit", 1);
  if (h.contains("mem")) {
    if (!h["mem"].is_object()) malformed(1, "mem must be an object");
    for (auto it = h["mem"].begin(); it != h["mem"].end(); ++it)
      trace.initial_memory[it.key()] = get_int(it.value(), "mem", 1);
  }
  if (h.contains("aux_locks")) {
    if (!h["aux_locks"].is_array()) malformed(1, "aux_locks must be an array");
    for (const auto& l : h["aux_locks"]) trace.aux_locks.insert(get_str(l, "aux_locks", 1));
  }
  if (h.contains("sections")) {
    if (!h["sections"].is_array()) malformed(1, "sections must be an array");
    for (const auto& s : h["sections"]) {
      if (!s.is_object()) malformed(1, "section entry must be an object");
      TransformedSection ts;
      for (const char* req : {"id", "tid", "begin", "end", "lock", "ls", "src"})
        if (!s.contains(req)) malformed(1, std::string("section lacks '") + req + "'");
      ts.id = static_cast<SectionId>(get_int(s["id"], "id", 1));
      ts.tid = static_cast<Tid>(get_int(s["tid"], "tid", 1));
      const auto b = get_int(s["begin"], "begin", 1);
      const auto e = get_int(s["end"], "end", 1);
      if (b < 0 || e < b) malformed(1, "section span must satisfy 0 <= begin <= end");
      ts.begin = static_cast<std::size_t>(b);
      ts.end = static_cast<std::size_t>(e);
      ts.lock = get_str(s["lock"], "lock", 1);
      if (s.contains("out")) ts.out_lock = get_str(s["out"], "out", 1);
      for (const auto& l : s["ls"]) ts.lockset.push_back(get_str(l, "ls", 1));
      for (const auto& src : s["src"]) ts.sources.push_back(static_cast<SectionId>(get_int(src, "src", 1)));
      trace.sections.push_back(std::move(ts));
    }
  }
  if (h.contains("order")) {
    if (!h["order"].is_array()) malformed(1, "order must be an array");
    for (const auto& o : h["order"]) {
      if (!o.is_array() || o.size() != 2) malformed(1, "order entries must be [before, after]");
      trace.order.push_back({static_cast<SectionId>(get_int(o[0], "order", 1)),
                             static_cast<SectionId>(get_int(o[1], "order", 1))});
    }
  }
}

ordered_json header_json(const Trace& trace) {
  ordered_json h = ordered_json::object();
  h["v"] = trace.version;
  if (!trace.caps.empty()) h["caps"] = trace.caps;
  if (trace.time_unit) h["unit"] = *trace.time_unit;
  if (!trace.initial_memory.empty()) {
    ordered_json m = ordered_json::object();
    for (const auto& [a, v] : trace.initial_memory) m[a] = v;
    h["mem"] = m;
  }
  if (!trace.aux_locks.empty()) {
    std::vector<LockId> locks(trace.aux_locks.begin(), trace.aux_locks.end());
    h["aux_locks"] = locks;
  }
  if (!trace.sections.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& s : trace.sections) {
      ordered_json e = ordered_json::object();
      e["id"] = s.id;
      e["tid"] = s.tid;
      e["begin"] = s.begin;
      e["end"] = s.end;
      e["lock"] = s.lock;
      if (s.out_lock) e["out"] = *s.out_lock;
      e["ls"] = s.lockset;
      e["src"] = s.sources;
      arr.push_back(std::move(e));
    }
    h["sections"] = std::move(arr);
  }
  if (!trace.order.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& o : trace.order) arr.push_back(ordered_json::array({o.before, o.after}));
    h["order"] = std::move(arr);
  }
  return h;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames)
    if (name == s) return k;
  return std::nullopt;
}

std::string_view to_string(ArithOp op) {
  switch (op) {
    case ArithOp::Add: return "add";
    case ArithOp::Sub: return "sub";
    case ArithOp::Copy: return "copy";
  }
  return "?";
}

CodeRegion CodeRegion::hull(const CodeRegion& other) const {
  return CodeRegion{std::min(file, other.file), std::min(lo, other.lo), std::max(hi, other.hi)};
}

std::string to_string(const CodeRegion& cr) {
  std::ostringstream os;
  os << cr.file << ':' << cr.lo;
  if (cr.hi != cr.lo) os << '-' << cr.hi;
  return os.str();
}

std::vector<std::string> ValueExpr::registers() const {
  std::vector<std::string> regs;
  if (kind == Kind::Op) {
    if (const auto* r = std::get_if<std::string>(&a)) regs.push_back(*r);
    if (const auto* r = std::get_if<std::string>(&b)) regs.push_back(*r);
  }
  return regs;
}

std::int64_t ValueExpr::evaluate(const Registers& regs) const {
  if (kind == Kind::Const) return constant;
  auto value = [&](const Operand& op) -> std::int64_t {
    if (const auto* k = std::get_if<std::int64_t>(&op)) return *k;
    const auto& name = std::get<std::string>(op);
    const auto it = regs.find(name);
    if (it == regs.end()) throw Error(ErrorCode::UnboundRegister, "register '" + name + "' is not bound");
    return it->second;
  };
  switch (op) {
    case ArithOp::Add: return value(a) + value(b);
    case ArithOp::Sub: return value(a) - value(b);
    case ArithOp::Copy: return value(a);
  }
  return 0;
}

std::int64_t default_cost(EventKind kind) {
  return (kind == EventKind::Read || kind == EventKind::Write) ? 1 : 0;
}

bool Trace::has_cap(std::string_view cap) const {
  return std::find(caps.begin(), caps.end(), cap) != caps.end();
}

std::size_t Trace::lock_acquisitions() const {
  std::size_t n = 0;
  for (const auto& [lock, order] : lock_orders) n += order.size();
  return n;
}

std::size_t thread_count(const Trace& trace) { return trace.threads.size(); }

void validate_and_index(Trace& trace) {
  trace.lock_orders.clear();
  std::map<LockId, std::vector<std::pair<std::int64_t, EventRef>>> acquisitions;
  for (const auto& lock : trace.aux_locks) {
    if (!is_aux_lock(lock)) violation("auxiliary lock '" + lock + "' lacks the @L prefix");
  }
  for (const auto& [tid, events] : trace.threads) {
    std::set<LockId> held;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& ev = events[i];
      if (ev.tid != tid) violation("event filed under the wrong thread", &ev);
      if (ev.seq != static_cast<std::int64_t>(i)) violation("seq values within a thread must be contiguous from 0", &ev);
      if (ev.kind == EventKind::LockAcq || ev.kind == EventKind::LockRel) {
        const auto& lock = *ev.lock;
        if (is_aux_lock(lock) && !trace.aux_locks.contains(lock))
          violation("lock '" + lock + "' uses the auxiliary prefix but is not declared auxiliary", &ev);
        if (ev.kind == EventKind::LockAcq) {
          if (!held.insert(lock).second) violation("lock '" + lock + "' acquired while already held", &ev);
          acquisitions[lock].push_back({*ev.acq_ord, EventRef{tid, ev.seq}});
        } else if (held.erase(lock) == 0) {
          violation("lock '" + lock + "' released while not held", &ev);
        }
      }
    }
    if (!held.empty()) violation("thread " + std::to_string(tid) + " ends holding lock '" + *held.begin() + "'");
  }
  for (auto& [lock, acqs] : acquisitions) {
    std::sort(acqs.begin(), acqs.end());
    auto& order = trace.lock_orders[lock];
    for (std::size_t k = 0; k < acqs.size(); ++k) {
      if (acqs[k].first != static_cast<std::int64_t>(k))
        violation("acq_ord values of lock '" + lock + "' must be exactly 0..n-1");
      order.push_back(acqs[k].second);
    }
  }
  std::set<SectionId> ids;
  for (const auto& s : trace.sections) {
    if (!ids.insert(s.id).second) violation("duplicate section id " + std::to_string(s.id));
    const auto it = trace.threads.find(s.tid);
    if (it == trace.threads.end() || s.end > it->second.size())
      violation("section " + std::to_string(s.id) + " spans outside its thread");
    for (const auto& l : s.lockset)
      if (!trace.aux_locks.contains(l)) violation("section lockset names undeclared lock '" + l + "'");
    if (s.out_lock && !trace.aux_locks.contains(*s.out_lock)) violation("section out-lock undeclared");
  }
  for (const auto& s : trace.sections)
    for (auto src : s.sources)
      if (!ids.contains(src)) violation("section source " + std::to_string(src) + " does not exist");
  for (const auto& o : trace.order)
    if (!ids.contains(o.before) || !ids.contains(o.after)) violation("order constraint names an unknown section");
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (!have_header) malformed(line_no, "expected header record");
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      malformed(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      parse_header(j, trace);
      have_header = true;
      continue;
    }
    auto ev = parse_event(j, line_no);
    auto& events = trace.threads[ev.tid];
    if (ev.seq != static_cast<std::int64_t>(events.size()))
      violation("seq values within a thread must be contiguous from 0", &ev);
    events.push_back(std::move(ev));
  }
  if (!have_header) malformed(line_no + 1, "missing header record");
  validate_and_index(trace);
  return trace;
}

Trace parse_trace_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << header_json(trace).dump() << '\n';
  for (const auto& [tid, events] : trace.threads)
    for (const auto& ev : events) out << event_json(ev).dump() << '\n';
}

std::string serialize_trace(const Trace& trace) {
  std::ostringstream os;
  write_trace(os, trace);
  return os.str();
}

void save_trace(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  write_trace(out, trace);
}

std::vector<CriticalSection> extract_critical_sections(const Trace& trace) {
  std::vector<CriticalSection> sections;
  for (const auto& [tid, events] : trace.threads) {
    std::map<LockId, std::size_t> open;
    for (const auto& ev : events) {
      switch (ev.kind) {
        case EventKind::LockAcq: {
          CriticalSection cs;
          cs.tid = tid;
          cs.lock = *ev.lock;
          cs.begin_seq = ev.seq;
          cs.site = ev.site.value_or(CodeRegion{});
          cs.acq_ord = *ev.acq_ord;
          open[cs.lock] = sections.size();
          sections.push_back(std::move(cs));
          break;
        }
        case EventKind::LockRel: {
          const auto it = open.find(*ev.lock);
          sections[it->second].end_seq = ev.seq;
          open.erase(it);
          break;
        }
        case EventKind::Read:
          for (const auto& [lock, idx] : open) sections[idx].s_rd.insert(*ev.addr);
          break;
        case EventKind::Write:
          for (const auto& [lock, idx] : open) sections[idx].s_wr.insert(*ev.addr);
          break;
        default:
          break;
      }
    }
  }
  std::sort(sections.begin(), sections.end(), [](const CriticalSection& a, const CriticalSection& b) {
    return std::tie(a.lock, a.acq_ord) < std::tie(b.lock, b.acq_ord);
  });
  for (std::size_t i = 0; i < sections.size(); ++i) sections[i].id = static_cast<SectionId>(i);
  return sections;
}

std::vector<SectionSpan> section_spans(const Trace& trace) {
  std::vector<SectionSpan> spans;
  if (!trace.sections.empty()) {
    for (const auto& s : trace.sections) spans.push_back({s.id, s.tid, s.begin, s.end});
  } else {
    for (const auto& cs : extract_critical_sections(trace))
      spans.push_back({cs.id, cs.tid, static_cast<std::size_t>(cs.begin_seq), static_cast<std::size_t>(cs.end_seq) + 1});
  }
  // Program order within each thread; transformed tables are already emitted that way.
  std::stable_sort(spans.begin(), spans.end(), [](const SectionSpan& a, const SectionSpan& b) {
    return std::tie(a.tid, a.begin) < std::tie(b.tid, b.begin);
  });
  return spans;
}

Trace slice_trace(const Trace& trace, std::string_view from_marker, std::string_view to_marker) {
  if (trace.is_transformed())
    throw Error(ErrorCode::InvariantViolation, "transformed traces cannot be sliced");
  Trace out;
  out.version = trace.version;
  out.caps = trace.caps;
  out.time_unit = trace.time_unit;
  out.initial_memory = trace.initial_memory;
  bool any = false;
  auto find_marker = [](const std::vector<TraceEvent>& evs, std::string_view name, std::size_t from) {
    for (std::size_t i = from; i < evs.size(); ++i)
      if (evs[i].kind == EventKind::Marker && evs[i].name && *evs[i].name == name) return std::optional<std::size_t>(i);
    return std::optional<std::size_t>{};
  };
  for (const auto& [tid, events] : trace.threads) {
    const auto from = find_marker(events, from_marker, 0);
    const auto to = from ? find_marker(events, to_marker, *from + (from_marker == to_marker ? 1 : 0)) : find_marker(events, to_marker, 0);
    if (!from && !to) continue;
    if (!from || !to)
      throw Error(ErrorCode::MarkerNotFound, "thread " + std::to_string(tid) + " holds only one of the slice markers");
    any = true;
    std::set<LockId> held;
    for (std::size_t i = 0; i < *from; ++i) {
      if (events[i].kind == EventKind::LockAcq) held.insert(*events[i].lock);
      if (events[i].kind == EventKind::LockRel) held.erase(*events[i].lock);
    }
    if (!held.empty())
      throw Error(ErrorCode::UnbalancedSlice, "lock '" + *held.begin() + "' is held across the slice start in thread " + std::to_string(tid));
    for (std::size_t i = *from; i <= *to; ++i) {
      if (events[i].kind == EventKind::LockAcq) held.insert(*events[i].lock);
      if (events[i].kind == EventKind::LockRel) held.erase(*events[i].lock);
    }
    if (!held.empty())
      throw Error(ErrorCode::UnbalancedSlice, "lock '" + *held.begin() + "' is held across the slice end in thread " + std::to_string(tid));
    auto& kept = out.threads[tid];
    if (!events.empty() && events.front().kind == EventKind::ThreadStart && *from > 0) kept.push_back(events.front());
    for (std::size_t i = *from; i <= *to; ++i) kept.push_back(events[i]);
    if (!events.empty() && events.back().kind == EventKind::ThreadEnd && *to + 1 < events.size()) kept.push_back(events.back());
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i].seq = static_cast<std::int64_t>(i);
  }
  if (!any) throw Error(ErrorCode::MarkerNotFound, "marker '" + std::string(from_marker) + "' not found");
  std::map<LockId, std::vector<TraceEvent*>> acqs;
  for (auto& [tid, events] : out.threads)
    for (auto& ev : events)
      if (ev.kind == EventKind::LockAcq) acqs[*ev.lock].push_back(&ev);
  for (auto& [lock, list] : acqs) {
    std::sort(list.begin(), list.end(), [](const TraceEvent* a, const TraceEvent* b) { return *a->acq_ord < *b->acq_ord; });
    for (std::size_t k = 0; k < list.size(); ++k) list[k]->acq_ord = static_cast<std::int64_t>(k);
  }
  validate_and_index(out);
  return out;
}

}  // namespace ulcp
