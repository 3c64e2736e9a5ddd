#include "ulcpkit/workload.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "scheduler.hpp"
#include "ulcpkit/error.hpp"

namespace ulcp {
namespace {

enum class Tok { Ident, Int, Site, Punct, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int column = 1;
};

std::string where(int line, int column) { return std::to_string(line) + ":" + std::to_string(column); }

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      bump(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') bump(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.type = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      bump(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i + 1;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.type = Tok::Int;
      t.text = std::string(src.substr(i, j - i));
      try {
        t.value = std::stoll(t.text);
      } catch (const std::out_of_range&) {
        throw Error(ErrorCode::SyntaxError, where(line, col) + ": integer out of range");
      }
      bump(j - i);
    } else if (c == '@') {
      std::size_t j = i + 1;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == ':' || src[j] == '-')) ++j;
      t.type = Tok::Site;
      t.text = std::string(src.substr(i + 1, j - i - 1));
      bump(j - i);
    } else {
      static const char* const two[] = {"->", "==", "!=", "<=", ">="};
      t.type = Tok::Punct;
      for (const char* p : two)
        if (src.substr(i, 2) == p) t.text = p;
      if (t.text.empty()) {
        if (std::string_view("{};=*<>+/[]").find(c) == std::string_view::npos)
          throw Error(ErrorCode::SyntaxError, where(line, col) + ": unexpected character '" + std::string(1, c) + "'");
        t.text = std::string(1, c);
      }
      bump(t.text.size());
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const std::map<std::string, std::int64_t>& overrides)
      : toks_(std::move(tokens)), overrides_(overrides) {}

  WorkloadProgram parse() {
    while (peek().type != Tok::End) {
      if (accept_punct(";")) continue;
      const Token& t = peek();
      if (is_word(t, "memory")) {
        next();
        const Addr addr = address();
        expect_punct("=");
        prog_.initial_memory[addr] = integer();
      } else if (is_word(t, "param")) {
        next();
        const Token name = expect(Tok::Ident, "parameter name");
        expect_punct("=");
        std::int64_t v = integer();
        if (const auto it = overrides_.find(name.text); it != overrides_.end()) v = it->second;
        prog_.params[name.text] = v;
      } else if (is_word(t, "thread")) {
        next();
        std::int64_t copies = 1;
        if (accept_punct("*")) copies = integer();
        if (copies < 0) fail(t, "negative thread count");
        std::string index;
        if (accept_word("as")) {
          const Token name = expect(Tok::Ident, "index name");
          if (prog_.params.contains(name.text)) fail(name, "index shadows a parameter");
          index = name.text;
        }
        if (index.empty()) {
          Block body = block();
          for (std::int64_t k = 0; k < copies; ++k) prog_.threads.push_back(body);
        } else {
          // The body is re-parsed per clone so integer slots see the index.
          const std::size_t start = pos_;
          for (std::int64_t k = 0; k < std::max<std::int64_t>(copies, 1); ++k) {
            pos_ = start;
            prog_.params[index] = k;
            Block body = block();
            if (k < copies) prog_.threads.push_back(std::move(body));
          }
          prog_.params.erase(index);
        }
      } else {
        fail(t, "expected 'memory', 'param' or 'thread'");
      }
    }
    for (const auto& [name, v] : overrides_)
      if (!prog_.params.contains(name))
        throw Error(ErrorCode::SyntaxError, "override of undeclared parameter '" + name + "'");
    return std::move(prog_);
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  static bool is_word(const Token& t, std::string_view w) { return t.type == Tok::Ident && t.text == w; }

  [[noreturn]] static void fail(const Token& t, const std::string& msg) {
    const std::string got = t.type == Tok::End ? "end of input" : "'" + t.text + "'";
    throw Error(ErrorCode::SyntaxError, where(t.line, t.column) + ": " + msg + ", got " + got);
  }

  bool accept_punct(std::string_view p) {
    if (peek().type == Tok::Punct && peek().text == p) {
      next();
      return true;
    }
    return false;
  }

  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) fail(peek(), "expected '" + std::string(p) + "'");
  }

  Token expect(Tok type, const std::string& what) {
    if (peek().type != type) fail(peek(), "expected " + what);
    return next();
  }

  bool accept_word(std::string_view w) {
    if (is_word(peek(), w)) {
      next();
      return true;
    }
    return false;
  }

  std::int64_t integer() {
    std::int64_t v = term();
    while (accept_punct("+")) v += term();
    return v;
  }

  std::int64_t term() {
    std::int64_t v = atom();
    for (;;) {
      if (accept_punct("*")) {
        v *= atom();
      } else if (peek().type == Tok::Punct && peek().text == "/") {
        const Token op = next();
        const std::int64_t d = atom();
        if (d == 0) fail(op, "division by zero");
        v /= d;
      } else {
        return v;
      }
    }
  }

  std::int64_t atom() {
    const Token& t = peek();
    if (t.type == Tok::Int) return next().value;
    if (t.type == Tok::Ident) {
      if (const auto it = prog_.params.find(t.text); it != prog_.params.end()) {
        next();
        return it->second;
      }
    }
    fail(t, "expected integer or parameter");
  }

  Addr address() {
    const Token& t = peek();
    if (t.type == Tok::Int) return next().text;
    if (t.type != Tok::Ident) fail(t, "expected address");
    Addr name = next().text;
    if (accept_punct("[")) {
      name += "[" + std::to_string(integer()) + "]";
      expect_punct("]");
    }
    return name;
  }

  Operand operand() {
    const Token& t = peek();
    if (t.type == Tok::Int) return next().value;
    if (t.type == Tok::Ident) {
      if (const auto it = prog_.params.find(t.text); it != prog_.params.end()) {
        next();
        return it->second;
      }
      return next().text;
    }
    fail(t, "expected register or integer");
  }

  ValueExpr valexpr() {
    if (accept_word("copy")) return ValueExpr::make_op(ArithOp::Copy, operand(), std::int64_t{0});
    const Operand a = operand();
    for (const auto& [word, op] : {std::pair{"add", ArithOp::Add}, std::pair{"sub", ArithOp::Sub}})
      if (accept_word(word)) return ValueExpr::make_op(op, a, operand());
    if (const auto* k = std::get_if<std::int64_t>(&a)) return ValueExpr::make_const(*k);
    return ValueExpr::make_op(ArithOp::Copy, a, std::int64_t{0});
  }

  CodeRegion site(const Token& t, int line) {
    if (t.type != Tok::Site) return CodeRegion{0, line, line};
    const std::string& s = t.text;
    CodeRegion cr;
    std::string rest = s;
    if (const auto colon = s.find(':'); colon != std::string::npos) {
      cr.file = parse_num(t, s.substr(0, colon));
      rest = s.substr(colon + 1);
    }
    if (const auto dash = rest.find('-'); dash != std::string::npos) {
      cr.lo = parse_num(t, rest.substr(0, dash));
      cr.hi = parse_num(t, rest.substr(dash + 1));
    } else {
      cr.lo = cr.hi = parse_num(t, rest);
    }
    if (cr.hi < cr.lo) fail(t, "empty site range");
    return cr;
  }

  static std::int64_t parse_num(const Token& t, const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
      fail(t, "malformed site");
    return std::stoll(s);
  }

  Block block() {
    expect_punct("{");
    Block out;
    while (!accept_punct("}")) {
      if (peek().type == Tok::End) fail(peek(), "expected '}'");
      if (accept_punct(";")) continue;
      out.push_back(statement());
    }
    return out;
  }

  std::optional<std::int64_t> optional_cost() {
    if (accept_word("cost")) return integer();
    return std::nullopt;
  }

  Stmt statement() {
    const Token head = expect(Tok::Ident, "statement");
    Stmt s;
    s.line = head.line;
    s.column = head.column;
    const std::string& w = head.text;
    if (w == "compute") {
      s.kind = Stmt::Kind::Compute;
      s.cost = integer();
      if (s.cost < 0) fail(head, "negative cost");
    } else if (w == "lock") {
      s.kind = Stmt::Kind::Lock;
      s.lock = expect(Tok::Ident, "lock name").text;
      Token t;
      if (peek().type == Tok::Site) t = next();
      s.site = site(t, head.line);
    } else if (w == "unlock") {
      s.kind = Stmt::Kind::Unlock;
      s.lock = expect(Tok::Ident, "lock name").text;
    } else if (w == "read") {
      s.kind = Stmt::Kind::Read;
      s.addr = address();
      expect_punct("->");
      s.reg = expect(Tok::Ident, "register").text;
      s.cost = optional_cost().value_or(default_cost(EventKind::Read));
    } else if (w == "write") {
      s.kind = Stmt::Kind::Write;
      s.addr = address();
      expect_punct("=");
      s.value = valexpr();
      s.cost = optional_cost().value_or(default_cost(EventKind::Write));
    } else if (w == "if") {
      s.kind = Stmt::Kind::If;
      s.reg = expect(Tok::Ident, "register").text;
      static const std::map<std::string, CmpOp> ops = {{"==", CmpOp::Eq}, {"!=", CmpOp::Ne}, {"<", CmpOp::Lt},
                                                       {"<=", CmpOp::Le}, {">", CmpOp::Gt}, {">=", CmpOp::Ge}};
      const Token op = expect(Tok::Punct, "comparison");
      const auto it = ops.find(op.text);
      if (it == ops.end()) fail(op, "expected comparison");
      s.cmp = it->second;
      s.rhs = integer();
      s.then_block = block();
      if (accept_word("else")) s.else_block = block();
    } else if (w == "loop") {
      s.kind = Stmt::Kind::Loop;
      s.count = integer();
      if (s.count < 0) fail(head, "negative loop count");
      s.else_block = block();
    } else if (w == "marker") {
      s.kind = Stmt::Kind::Marker;
      s.name = expect(Tok::Ident, "marker name").text;
    } else {
      fail(head, "unknown statement");
    }
    if (s.cost < 0) fail(head, "negative cost");
    return s;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const std::map<std::string, std::int64_t>& overrides_;
  WorkloadProgram prog_;
};

[[noreturn]] void check_fail(ErrorCode code, const Stmt& s, const std::string& msg) {
  throw Error(code, where(s.line, s.column) + ": " + msg);
}

using Held = std::vector<LockId>;

Held check_locks(const Block& block, Held held) {
  for (const auto& s : block) {
    switch (s.kind) {
      case Stmt::Kind::Lock:
        if (std::find(held.begin(), held.end(), s.lock) != held.end())
          check_fail(ErrorCode::UnbalancedLock, s, "lock '" + s.lock + "' already held");
        held.push_back(s.lock);
        break;
      case Stmt::Kind::Unlock: {
        if (std::find(held.begin(), held.end(), s.lock) == held.end())
          check_fail(ErrorCode::UnbalancedLock, s, "unlock of '" + s.lock + "' which is not held");
        if (held.back() != s.lock)
          check_fail(ErrorCode::UnbalancedLock, s, "unlock of '" + s.lock + "' while '" + held.back() + "' is held inside it");
        held.pop_back();
        break;
      }
      case Stmt::Kind::If: {
        Held a = check_locks(s.then_block, held);
        Held b = check_locks(s.else_block, held);
        if (a != b) check_fail(ErrorCode::UnbalancedLock, s, "branches leave different locks held");
        held = std::move(a);
        break;
      }
      case Stmt::Kind::Loop:
        if (check_locks(s.else_block, held) != held)
          check_fail(ErrorCode::UnbalancedLock, s, "loop body is not lock-balanced");
        break;
      default:
        break;
    }
  }
  return held;
}

using Bound = std::set<std::string>;

Bound check_registers(const Block& block, Bound bound) {
  auto need = [&](const Stmt& s, const std::string& reg) {
    if (!bound.contains(reg)) check_fail(ErrorCode::UnboundRegister, s, "register '" + reg + "' used before any read");
  };
  for (const auto& s : block) {
    switch (s.kind) {
      case Stmt::Kind::Read:
        bound.insert(s.reg);
        break;
      case Stmt::Kind::Write:
        for (const auto& r : s.value.registers()) need(s, r);
        break;
      case Stmt::Kind::If: {
        need(s, s.reg);
        const Bound a = check_registers(s.then_block, bound);
        const Bound b = check_registers(s.else_block, bound);
        Bound both;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(both, both.end()));
        bound = std::move(both);
        break;
      }
      case Stmt::Kind::Loop: {
        Bound after = check_registers(s.else_block, bound);
        if (s.count > 0) bound = std::move(after);
        break;
      }
      default:
        break;
    }
  }
  return bound;
}

bool compare(std::int64_t lhs, CmpOp op, std::int64_t rhs) {
  switch (op) {
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ne: return lhs != rhs;
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Gt: return lhs > rhs;
    case CmpOp::Ge: return lhs >= rhs;
  }
  return false;
}

/// Walks one thread's statements, resolving branches against the thread's
/// registers at the moment the next event is requested.
class Interpreter final : public detail::EventSource {
 public:
  Interpreter(Tid tid, const Block& body) : tid_(tid) { frames_.push_back({&body, 0, 1}); }

  const TraceEvent* peek(const Registers& regs) override {
    if (cached_) return &*cached_;
    if (!started_) return &cache(make(EventKind::ThreadStart));
    while (!frames_.empty()) {
      auto& f = frames_.back();
      if (f.index >= f.block->size()) {
        if (--f.remaining > 0) {
          f.index = 0;
        } else {
          frames_.pop_back();
        }
        continue;
      }
      const Stmt& s = (*f.block)[f.index++];
      switch (s.kind) {
        case Stmt::Kind::If: {
          const auto it = regs.find(s.reg);
          if (it == regs.end()) check_fail(ErrorCode::UnboundRegister, s, "register '" + s.reg + "' is not bound");
          const Block& arm = compare(it->second, s.cmp, s.rhs) ? s.then_block : s.else_block;
          if (!arm.empty()) frames_.push_back({&arm, 0, 1});
          continue;
        }
        case Stmt::Kind::Loop:
          if (s.count > 0 && !s.else_block.empty()) frames_.push_back({&s.else_block, 0, s.count});
          continue;
        default:
          return &cache(translate(s));
      }
    }
    if (!ended_) return &cache(make(EventKind::ThreadEnd));
    return nullptr;
  }

  void advance() override {
    if (!cached_) return;
    if (cached_->kind == EventKind::ThreadStart) started_ = true;
    if (cached_->kind == EventKind::ThreadEnd) ended_ = true;
    cached_.reset();
  }

 private:
  struct Frame {
    const Block* block;
    std::size_t index;
    std::int64_t remaining;
  };

  TraceEvent make(EventKind kind) const {
    TraceEvent ev;
    ev.tid = tid_;
    ev.kind = kind;
    ev.cost = default_cost(kind);
    return ev;
  }

  TraceEvent translate(const Stmt& s) const {
    switch (s.kind) {
      case Stmt::Kind::Compute: {
        auto ev = make(EventKind::Compute);
        ev.cost = s.cost;
        return ev;
      }
      case Stmt::Kind::Lock: {
        auto ev = make(EventKind::LockAcq);
        ev.lock = s.lock;
        ev.site = s.site;
        return ev;
      }
      case Stmt::Kind::Unlock: {
        auto ev = make(EventKind::LockRel);
        ev.lock = s.lock;
        return ev;
      }
      case Stmt::Kind::Read: {
        auto ev = make(EventKind::Read);
        ev.addr = s.addr;
        ev.reg = s.reg;
        ev.cost = s.cost;
        return ev;
      }
      case Stmt::Kind::Write: {
        auto ev = make(EventKind::Write);
        ev.addr = s.addr;
        ev.valexpr = s.value;
        ev.cost = s.cost;
        return ev;
      }
      case Stmt::Kind::Marker: {
        auto ev = make(EventKind::Marker);
        ev.name = s.name;
        return ev;
      }
      default:
        return make(EventKind::Compute);
    }
  }

  const TraceEvent& cache(TraceEvent ev) {
    cached_ = std::move(ev);
    return *cached_;
  }

  Tid tid_;
  std::vector<Frame> frames_;
  std::optional<TraceEvent> cached_;
  bool started_ = false;
  bool ended_ = false;
};

}  // namespace

WorkloadProgram parse_workload(std::string_view text, const std::map<std::string, std::int64_t>& overrides) {
  Parser parser(lex(text), overrides);
  WorkloadProgram prog = parser.parse();
  for (const auto& body : prog.threads) {
    const Held left = check_locks(body, {});
    if (!left.empty()) {
      Stmt last;
      if (!body.empty()) last = body.back();
      check_fail(ErrorCode::UnbalancedLock, last, "thread ends holding '" + *left.begin() + "'");
    }
    check_registers(body, {});
  }
  return prog;
}

WorkloadProgram load_workload(const std::string& path, const std::map<std::string, std::int64_t>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_workload(ss.str(), overrides);
}

std::size_t count_static(const Block& block, Stmt::Kind kind) {
  std::size_t n = 0;
  for (const auto& s : block) {
    if (s.kind == kind) ++n;
    if (s.kind == Stmt::Kind::If) n += count_static(s.then_block, kind) + count_static(s.else_block, kind);
    if (s.kind == Stmt::Kind::Loop) n += static_cast<std::size_t>(s.count) * count_static(s.else_block, kind);
  }
  return n;
}

Recording record(const WorkloadProgram& program, std::uint64_t seed) {
  detail::SchedulerConfig cfg;
  cfg.random_ties = true;
  cfg.seed = seed;
  cfg.stall_error = ErrorCode::Deadlock;
  cfg.initial_memory = program.initial_memory;
  std::vector<std::pair<Tid, std::unique_ptr<detail::EventSource>>> sources;
  for (std::size_t t = 0; t < program.threads.size(); ++t)
    sources.emplace_back(static_cast<Tid>(t), std::make_unique<Interpreter>(static_cast<Tid>(t), program.threads[t]));
  auto out = detail::run_scheduler(std::move(sources), cfg);

  Recording rec;
  rec.trace.initial_memory = program.initial_memory;
  rec.trace.threads = std::move(out.executed);
  for (std::size_t t = 0; t < program.threads.size(); ++t) rec.trace.threads[static_cast<Tid>(t)];
  for (const auto& [lock, refs] : out.result.realized_lock_order)
    for (std::size_t i = 0; i < refs.size(); ++i)
      rec.trace.threads.at(refs[i].tid)[static_cast<std::size_t>(refs[i].seq)].acq_ord = static_cast<std::int64_t>(i);
  validate_and_index(rec.trace);
  rec.result = std::move(out.result);
  detail::fill_timestamps(section_spans(rec.trace), rec.result);
  rec.stats.makespan = rec.result.makespan;
  rec.stats.per_thread = rec.result.per_thread;
  return rec;
}

}  // namespace ulcp
