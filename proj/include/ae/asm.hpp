#pragma once

// Symbolic assembler for card decks.
//
// Pipeline: parse_asm -> expand_macros -> layout -> resolve_distances -> emit.
// The machine only knows "branch if zero"; JMP, BNZ, indirect LOADI/STOREI and
// CALL/RET are built here out of zero tests against the always-zero cell Z
// and decrement chains that count a selector cell down with the always-one
// cell E.
//
// Every assembled program starts with a short prologue that sets Z = 0, E = 1
// and fills a pool of constant cells. SET statements in the body are lowered
// to moves from that pool: the constant stream only moves forward, so a NUM
// card inside a loop would run out of constants on the second pass.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ae/arith.hpp"
#include "ae/deck.hpp"
#include "ae/error.hpp"
#include "ae/text.hpp"

namespace ae {

struct AsmError : ParseError {
  using ParseError::ParseError;
};

struct RuntimeLayout {
  Address z = 200;      // always zero
  Address e = 201;      // always one
  Address t1 = 202;     // scratch
  Address t2 = 203;     // scratch
  Address c = 204;      // indirect-address counter
  Address j = 205;      // return selector
  Address stage = 101;  // staging cell for indirect transfers
  Address pool = 206;   // first constant-pool cell
  std::size_t window = 100;
};

enum class StmtKind { rep, set, tstz, hlt, arith, mov, jmp, bnz, loadi, storei, call, ret };

inline bool is_core(StmtKind k) {
  return k == StmtKind::rep || k == StmtKind::set || k == StmtKind::tstz || k == StmtKind::hlt;
}

enum class Preserve { none, first, all };

struct Statement {
  StmtKind kind = StmtKind::hlt;
  Opcode opcode = Opcode::add;  // arith, rep
  Address a = 0, b = 0, dst = 0;
  Preserve preserve = Preserve::none;
  Cell literal;              // set
  std::string target;        // tstz, jmp, bnz, call
  int repeat = 1;            // rep
  std::vector<Pair> pairs;   // rep, tstz (after lowering)
  std::vector<std::string> labels;
  std::size_t line = 0;
};

struct AsmProgram {
  int width = kDefaultWidth;
  std::size_t store_size = 1000;
  JumpMode mode = JumpMode::bidirectional;
  bool window_declared = false;
  RuntimeLayout layout;
  std::vector<Statement> statements;
  std::vector<std::string> end_labels;  // labels with no statement after them
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Token {
  enum Kind { ident, number, arrow, comma, equals, lparen, rparen, colon } kind;
  std::string text;
};

inline std::vector<Token> tokenize(std::string_view s, std::size_t line) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_ident = [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.'; };
  while (i < s.size()) {
    char ch = s[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
    } else if (ch == '-' && i + 1 < s.size() && s[i + 1] == '>') {
      out.push_back({Token::arrow, "->"});
      i += 2;
    } else if (std::isdigit(static_cast<unsigned char>(ch)) ||
               ((ch == '-' || ch == '+') && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i + 1;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({Token::number, std::string(s.substr(i, j - i))});
      i = j;
    } else if (is_ident(ch)) {
      std::size_t j = i;
      while (j < s.size() && is_ident(s[j])) ++j;
      out.push_back({Token::ident, std::string(s.substr(i, j - i))});
      i = j;
    } else if (ch == ',' || ch == '=' || ch == '(' || ch == ')' || ch == ':') {
      out.push_back({ch == ',' ? Token::comma
                     : ch == '=' ? Token::equals
                     : ch == '(' ? Token::lparen
                     : ch == ')' ? Token::rparen
                                 : Token::colon,
                     std::string(1, ch)});
      ++i;
    } else {
      throw AsmError(line, std::string("unexpected character '") + ch + "'");
    }
  }
  return out;
}

inline bool valid_label(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
}

class StatementParser {
 public:
  StatementParser(std::vector<Token> toks, std::size_t line, const AsmProgram& prog)
      : toks_(std::move(toks)), line_(line), prog_(prog) {}

  bool done() const { return pos_ >= toks_.size(); }

  const Token* peek() const { return done() ? nullptr : &toks_[pos_]; }

  Token take(Token::Kind kind, const char* what) {
    if (done() || toks_[pos_].kind != kind) throw AsmError(line_, std::string("expected ") + what);
    return toks_[pos_++];
  }

  bool accept(Token::Kind kind) {
    if (!done() && toks_[pos_].kind == kind) {
      ++pos_;
      return true;
    }
    return false;
  }

  Address address() {
    if (done()) throw AsmError(line_, "expected an address");
    const Token t = toks_[pos_++];
    if (t.kind == Token::number) return to_address(t.text);
    if (t.kind != Token::ident) throw AsmError(line_, "expected an address, got '" + t.text + "'");
    const auto& L = prog_.layout;
    const std::string up = [&] {
      std::string u = t.text;
      for (auto& ch : u) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      return u;
    }();
    if (up == "Z") return L.z;
    if (up == "E") return L.e;
    if (up == "T1") return L.t1;
    if (up == "T2") return L.t2;
    if (up == "C") return L.c;
    if (up == "J") return L.j;
    if (up == "STAGE") return L.stage;
    if (up.size() > 1 && up[0] == 'V' && std::all_of(up.begin() + 1, up.end(), ::isdigit)) return to_address(up.substr(1));
    throw AsmError(line_, "unknown address '" + t.text + "'");
  }

  std::string label() {
    auto t = take(Token::ident, "a label");
    if (!valid_label(t.text)) throw AsmError(line_, "invalid label '" + t.text + "'");
    return t.text;
  }

  Preserve preserve_suffix() {
    if (done()) return Preserve::none;
    auto t = take(Token::ident, "'preserve'");
    if (!text::iequals(t.text, "preserve")) throw AsmError(line_, "unexpected '" + t.text + "'");
    if (!done() && toks_[pos_].kind == Token::ident && text::iequals(toks_[pos_].text, "all")) {
      ++pos_;
      return Preserve::all;
    }
    return Preserve::first;
  }

  void finish() {
    if (!done()) throw AsmError(line_, "unexpected '" + toks_[pos_].text + "'");
  }

  std::size_t line() const { return line_; }

 private:
  Address to_address(const std::string& s) {
    auto v = text::parse_int<long long>(s);
    if (!v || *v < 1) throw AsmError(line_, "address '" + s + "' must be a positive integer");
    if (static_cast<std::size_t>(*v) > prog_.store_size)
      throw AsmError(line_, "address " + s + " outside store of " + std::to_string(prog_.store_size) + " cells");
    return static_cast<Address>(*v);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t line_;
  const AsmProgram& prog_;
};

inline std::string upper(std::string_view s) {
  std::string u(s);
  for (auto& ch : u) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return u;
}

inline void apply_directive(AsmProgram& p, const std::vector<Token>& toks, std::size_t line) {
  const std::string name = text::lower(toks[0].text);
  auto number_arg = [&](long long lo, long long hi) {
    if (toks.size() != 2 || toks[1].kind != Token::number) throw AsmError(line, name + " takes one number");
    auto v = text::parse_int<long long>(toks[1].text);
    if (!v || *v < lo || *v > hi) throw AsmError(line, name + " value out of range");
    return *v;
  };
  if (name == ".width") {
    p.width = static_cast<int>(number_arg(1, kMaxWidth));
  } else if (name == ".store") {
    p.store_size = static_cast<std::size_t>(number_arg(1, 1'000'000));
  } else if (name == ".window") {
    p.layout.window = static_cast<std::size_t>(number_arg(1, 1'000'000));
    p.window_declared = true;
  } else if (name == ".mode") {
    auto m = toks.size() == 2 ? parse_mode(toks[1].text) : std::nullopt;
    if (!m) throw AsmError(line, ".mode takes bidir or looped");
    p.mode = *m;
  } else if (name == ".reserve") {
    for (std::size_t i = 1; i < toks.size();) {
      if (i + 2 >= toks.size() + 0 || toks[i].kind != Token::ident || toks[i + 1].kind != Token::equals ||
          toks[i + 2].kind != Token::number)
        throw AsmError(line, ".reserve expects NAME=address entries");
      auto v = text::parse_int<long long>(toks[i + 2].text);
      if (!v || *v < 1) throw AsmError(line, "reserved address must be positive");
      const auto a = static_cast<Address>(*v);
      const std::string key = upper(toks[i].text);
      auto& L = p.layout;
      if (key == "Z") L.z = a;
      else if (key == "E") L.e = a;
      else if (key == "T1") L.t1 = a;
      else if (key == "T2") L.t2 = a;
      else if (key == "C") L.c = a;
      else if (key == "J") L.j = a;
      else if (key == "STAGE") L.stage = a;
      else if (key == "POOL") L.pool = a;
      else throw AsmError(line, "unknown reserved cell '" + toks[i].text + "'");
      i += 3;
    }
  } else {
    throw AsmError(line, "unknown directive '" + toks[0].text + "'");
  }
}

inline void check_layout(const AsmProgram& p) {
  const auto& L = p.layout;
  const std::pair<const char*, Address> cells[] = {{"Z", L.z},   {"E", L.e}, {"T1", L.t1},       {"T2", L.t2},
                                                   {"C", L.c},   {"J", L.j}, {"STAGE", L.stage}};
  if (L.window >= p.store_size) throw AsmError(0, "working window does not fit in the store");
  for (std::size_t i = 0; i < std::size(cells); ++i) {
    const auto& [name, a] = cells[i];
    if (a > p.store_size) throw AsmError(0, std::string("reserved cell ") + name + " outside the store");
    if (a <= L.window) throw AsmError(0, std::string("reserved cell ") + name + " inside the working window");
    for (std::size_t k = 0; k < i; ++k)
      if (cells[k].second == a)
        throw AsmError(0, std::string("reserved cells ") + cells[k].first + " and " + name + " share address " +
                              std::to_string(a));
  }
}

}  // namespace detail

inline AsmProgram parse_asm(std::string_view source) {
  AsmProgram prog;
  auto lines = text::split_lines(source);
  std::vector<std::pair<std::size_t, std::vector<detail::Token>>> body;

  // Directives are global; apply them all before reading statements.
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto toks = detail::tokenize(text::strip_comment(lines[i], ';'), i + 1);
    if (toks.empty()) continue;
    if (toks[0].kind == detail::Token::ident && toks[0].text[0] == '.') {
      detail::apply_directive(prog, toks, i + 1);
    } else {
      body.emplace_back(i + 1, std::move(toks));
    }
  }
  detail::check_layout(prog);

  std::vector<std::string> pending;
  std::map<std::string, std::size_t> label_lines;
  for (auto& [line, toks] : body) {
    std::size_t k = 0;
    while (k + 1 < toks.size() && toks[k].kind == detail::Token::ident && toks[k + 1].kind == detail::Token::colon) {
      const auto& name = toks[k].text;
      if (!detail::valid_label(name)) throw AsmError(line, "invalid label '" + name + "'");
      if (auto [it, fresh] = label_lines.emplace(name, line); !fresh)
        throw AsmError(line, "duplicate label '" + name + "' (first defined on line " + std::to_string(it->second) + ")");
      pending.push_back(name);
      k += 2;
    }
    if (k == toks.size()) continue;
    if (toks[k].kind != detail::Token::ident) throw AsmError(line, "expected a mnemonic");
    const std::string mnemonic = detail::upper(toks[k].text);
    detail::StatementParser sp(std::vector<detail::Token>(toks.begin() + static_cast<long>(k) + 1, toks.end()), line, prog);
    Statement st;
    st.line = line;

    if (auto opc = parse_opcode(mnemonic); opc && is_arithmetic(*opc)) {
      st.kind = StmtKind::arith;
      st.opcode = *opc;
      st.a = sp.address();
      sp.take(detail::Token::comma, "','");
      st.b = sp.address();
      sp.take(detail::Token::arrow, "'->'");
      st.dst = sp.address();
      st.preserve = sp.preserve_suffix();
    } else if (mnemonic == "SET") {
      st.kind = StmtKind::set;
      st.dst = sp.address();
      sp.take(detail::Token::equals, "'='");
      auto lit = sp.take(detail::Token::number, "a literal");
      try {
        st.literal = Cell::parse(lit.text, prog.width);
      } catch (const RangeError& e) {
        throw AsmError(line, e.what());
      }
    } else if (mnemonic == "TSTZ") {
      st.kind = StmtKind::tstz;
      st.a = sp.address();
      sp.take(detail::Token::comma, "','");
      st.target = sp.label();
      st.preserve = sp.preserve_suffix();
    } else if (mnemonic == "HLT") {
      st.kind = StmtKind::hlt;
    } else if (mnemonic == "REP") {
      st.kind = StmtKind::rep;
      auto k_tok = sp.take(detail::Token::number, "a repeat count");
      auto rep = text::parse_int<int>(k_tok.text);
      if (!rep || *rep < 1) throw AsmError(line, "repeat count must be positive");
      st.repeat = *rep;
      auto op_tok = sp.take(detail::Token::ident, "an opcode");
      auto opc = parse_opcode(op_tok.text);
      if (!opc || !is_arithmetic(*opc)) throw AsmError(line, "REP takes ADD, SUB, MUL or DIV");
      st.opcode = *opc;
      while (sp.accept(detail::Token::lparen)) {
        // "0" is allowed here: it means "none"
        Pair p;
        auto read = [&]() -> Address {
          if (const auto* t = sp.peek(); t && t->kind == detail::Token::number && t->text == "0") {
            sp.take(detail::Token::number, "");
            return 0;
          }
          return sp.address();
        };
        p.src = read();
        sp.take(detail::Token::comma, "','");
        p.dst = read();
        sp.take(detail::Token::rparen, "')'");
        if (p.src == 0 && p.dst == 0) throw AsmError(line, "pair (0,0) is invalid");
        st.pairs.push_back(p);
      }
      if (st.pairs.empty() || st.pairs.size() % static_cast<std::size_t>(st.repeat) != 0)
        throw AsmError(line, "REP pair count must be a positive multiple of the repeat count");
    } else if (mnemonic == "MOV") {
      st.kind = StmtKind::mov;
      st.a = sp.address();
      sp.take(detail::Token::arrow, "'->'");
      st.dst = sp.address();
      st.preserve = sp.preserve_suffix();
    } else if (mnemonic == "JMP") {
      st.kind = StmtKind::jmp;
      st.target = sp.label();
    } else if (mnemonic == "BNZ") {
      st.kind = StmtKind::bnz;
      st.a = sp.address();
      sp.take(detail::Token::comma, "','");
      st.target = sp.label();
    } else if (mnemonic == "LOADI") {
      st.kind = StmtKind::loadi;
      sp.take(detail::Token::arrow, "'->'");
      st.dst = sp.address();
    } else if (mnemonic == "STOREI") {
      st.kind = StmtKind::storei;
      st.a = sp.address();
    } else if (mnemonic == "CALL") {
      st.kind = StmtKind::call;
      st.target = sp.label();
    } else if (mnemonic == "RET") {
      st.kind = StmtKind::ret;
    } else {
      throw AsmError(line, "unknown mnemonic '" + toks[k].text + "'");
    }
    sp.finish();
    st.labels = std::move(pending);
    pending.clear();
    prog.statements.push_back(std::move(st));
  }
  prog.end_labels = std::move(pending);

  for (const auto& st : prog.statements)
    if (!st.target.empty() && !label_lines.count(st.target))
      throw AsmError(st.line, "undefined label '" + st.target + "'");
  return prog;
}

// ---------------------------------------------------------------------------
// Macro expansion

namespace detail {

class Lowering {
 public:
  explicit Lowering(const AsmProgram& src) : src_(src), L_(src.layout) {
    out_.width = src.width;
    out_.store_size = src.store_size;
    out_.mode = src.mode;
    out_.window_declared = src.window_declared;
    out_.layout = src.layout;
  }

  AsmProgram run() {
    for (const auto& st : src_.statements)
      if (st.kind == StmtKind::call) ++total_calls_;
    build_pool();
    prologue();
    for (const auto& st : src_.statements) lower(st);
    for (const auto& l : src_.end_labels) pending_.push_back(l);
    hlt(0);
    return std::move(out_);
  }

 private:
  // Pairs for `a op b -> dst`. Reading the same cell twice goes through a
  // self-restoring (a,a) first so both reads see the value.
  std::vector<Pair> arith_pairs(Address a, Address b, Address dst, Preserve preserve) const {
    std::vector<Pair> pairs, restores;
    const Address temps[2] = {L_.t1, L_.t2};
    int used = 0;
    bool kept_one = false;
    const Address srcs[2] = {a, b};
    for (int i = 0; i < 2; ++i) {
      const Address x = srcs[i];
      const bool keepable = x != L_.z && x != dst;
      const bool keep = keepable && (preserve == Preserve::all || (preserve == Preserve::first && !kept_one));
      if (i == 0 && a == b && a != L_.z) {
        pairs.push_back({x, x});
        continue;
      }
      if (keep) {
        kept_one = true;
        pairs.push_back({x, temps[used]});
        restores.push_back({temps[used], x});
        ++used;
      } else {
        pairs.push_back({x, 0});
      }
    }
    pairs.push_back({0, dst});
    pairs.insert(pairs.end(), restores.begin(), restores.end());
    return pairs;
  }

  void build_pool() {
    auto want = [&](const Cell& v) {
      if (v.is_zero() || v == Cell::from_int(1, src_.width)) return;
      const auto key = v.to_string();
      if (pool_.count(key)) return;
      Address a = L_.pool + static_cast<Address>(pool_.size());
      pool_.emplace(key, a);
      pool_order_.push_back({a, v});
    };
    for (const auto& st : src_.statements)
      if (st.kind == StmtKind::set) want(st.literal);
    for (int id = 1; id <= total_calls_; ++id) want(Cell::from_int(id, src_.width));
    if (pool_.empty()) return;

    std::set<Address> used;
    const auto& L = L_;
    for (Address r : {L.z, L.e, L.t1, L.t2, L.c, L.j, L.stage}) used.insert(r);
    for (const auto& st : src_.statements) {
      for (Address x : {st.a, st.b, st.dst})
        if (x) used.insert(x);
      for (const auto& p : st.pairs) {
        if (p.src) used.insert(p.src);
        if (p.dst) used.insert(p.dst);
      }
    }
    for (const auto& [a, v] : pool_order_) {
      if (a > src_.store_size) throw AsmError(0, "constant pool does not fit in the store");
      if (a <= L.window) throw AsmError(0, "constant pool overlaps the working window");
      if (used.count(a))
        throw AsmError(0, "constant pool cell " + std::to_string(a) + " collides with an address used by the program");
    }
  }

  void prologue() {
    set_const(L_.z, Cell(src_.width), 0);
    set_const(L_.e, Cell::from_int(1, src_.width), 0);
    for (const auto& [a, v] : pool_order_) set_const(a, v, 0);
  }

  std::string fresh(const char* stem) { return "." + std::string(stem) + std::to_string(++counter_); }

  Statement& emit(Statement st) {
    st.labels.insert(st.labels.begin(), pending_.begin(), pending_.end());
    pending_.clear();
    out_.statements.push_back(std::move(st));
    return out_.statements.back();
  }

  void label(std::string name) { pending_.push_back(std::move(name)); }

  void raw(Opcode op, std::vector<Pair> pairs, std::size_t line, int repeat = 1) {
    Statement st;
    st.kind = StmtKind::rep;
    st.opcode = op;
    st.repeat = repeat;
    st.pairs = std::move(pairs);
    st.line = line;
    emit(std::move(st));
  }

  void set_const(Address dst, const Cell& v, std::size_t line) {
    Statement st;
    st.kind = StmtKind::set;
    st.dst = dst;
    st.literal = v;
    st.pairs = {{0, dst}};
    st.line = line;
    emit(std::move(st));
  }

  void tstz(Address a, std::string target, bool preserve, std::size_t line) {
    Statement st;
    st.kind = StmtKind::tstz;
    st.a = a;
    st.target = std::move(target);
    st.pairs = (preserve && a != L_.z) ? std::vector<Pair>{{a, L_.t1}, {L_.t1, a}} : std::vector<Pair>{{a, 0}};
    st.line = line;
    emit(std::move(st));
  }

  void hlt(std::size_t line) {
    Statement st;
    st.kind = StmtKind::hlt;
    st.line = line;
    emit(std::move(st));
  }

  void mov(Address a, Address b, bool preserve, std::size_t line) {
    raw(Opcode::add, arith_pairs(a, L_.z, b, preserve ? Preserve::first : Preserve::none), line);
  }

  void jmp(const std::string& target, std::size_t line) { tstz(L_.z, target, false, line); }

  void bnz(Address a, const std::string& target, std::size_t line) {
    const auto skip = fresh("skip");
    tstz(a, skip, true, line);
    jmp(target, line);
    label(skip);
  }

  void decrement(Address x, std::size_t line) { raw(Opcode::sub, arith_pairs(x, L_.e, x, Preserve::first), line); }

  void set_value(Address dst, const Cell& v, std::size_t line) {
    if (v.is_zero()) mov(L_.z, dst, false, line);
    else if (v == Cell::from_int(1, src_.width)) mov(L_.e, dst, true, line);
    else mov(pool_.at(v.to_string()), dst, true, line);
  }

  // The counter chain: block k counts C down once and fires when C hits zero,
  // so with C = k on entry exactly block k runs its body.
  template <typename Body>
  void select_chain(std::size_t count, Address counter, std::size_t line, Body body) {
    const auto end = fresh("end");
    for (std::size_t k = 1; k <= count; ++k) {
      decrement(counter, line);
      const bool last = k == count;
      const auto next = last ? end : fresh("next");
      bnz(counter, next, line);
      body(k);
      if (!last) {
        jmp(end, line);
        label(next);
      }
    }
    label(end);
  }

  void require_window(const Statement& st, const char* name) {
    if (!src_.window_declared) throw AsmError(st.line, std::string(name) + " needs a .window directive");
  }

  void lower(const Statement& st) {
    for (const auto& l : st.labels) pending_.push_back(l);
    const auto line = st.line;
    switch (st.kind) {
      case StmtKind::rep:
        raw(st.opcode, st.pairs, line, st.repeat);
        break;
      case StmtKind::arith:
        raw(st.opcode, arith_pairs(st.a, st.b, st.dst, st.preserve), line);
        break;
      case StmtKind::set:
        set_value(st.dst, st.literal, line);
        break;
      case StmtKind::tstz:
        tstz(st.a, st.target, st.preserve != Preserve::none, line);
        break;
      case StmtKind::hlt:
        hlt(line);
        break;
      case StmtKind::mov:
        mov(st.a, st.dst, st.preserve != Preserve::none, line);
        break;
      case StmtKind::jmp:
        jmp(st.target, line);
        break;
      case StmtKind::bnz:
        bnz(st.a, st.target, line);
        break;
      case StmtKind::loadi:
        require_window(st, "LOADI");
        select_chain(src_.layout.window, L_.c, line,
                     [&](std::size_t k) { mov(static_cast<Address>(k), st.dst, true, line); });
        break;
      case StmtKind::storei:
        require_window(st, "STOREI");
        select_chain(src_.layout.window, L_.c, line,
                     [&](std::size_t k) { mov(st.a, static_cast<Address>(k), true, line); });
        break;
      case StmtKind::call: {
        const int id = ++call_id_;
        set_value(L_.j, Cell::from_int(id, src_.width), line);
        jmp(st.target, line);
        label(".ret" + std::to_string(id));
        break;
      }
      case StmtKind::ret:
        for (int id = 1; id <= total_calls_; ++id) {
          decrement(L_.j, line);
          const auto next = fresh("rnext");
          bnz(L_.j, next, line);
          jmp(".ret" + std::to_string(id), line);
          label(next);
        }
        hlt(line);  // selector matched no call site
        break;
    }
  }

  const AsmProgram& src_;
  const RuntimeLayout& L_;
  AsmProgram out_;
  std::vector<std::string> pending_;
  std::map<std::string, Address> pool_;
  std::vector<std::pair<Address, Cell>> pool_order_;
  int counter_ = 0;
  int total_calls_ = 0;
  int call_id_ = 0;
};

}  // namespace detail

// Rewrites pseudo-ops into core statements (rep, set, tstz, hlt) with explicit
// pair lists, prefixed by the Z/E/pool prologue and terminated by HLT.
inline AsmProgram expand_macros(const AsmProgram& p) { return detail::Lowering(p).run(); }

// ---------------------------------------------------------------------------
// Layout and distances

struct StatementExtent {
  std::size_t op_start = 0, op_count = 0;
  std::size_t var_start = 0, var_count = 0;
  std::size_t const_start = 0, const_count = 0;
};

struct ProgramLayout {
  std::vector<StatementExtent> extents;
  std::size_t op_total = 0, var_total = 0, const_total = 0;
};

inline ProgramLayout layout(const AsmProgram& core) {
  ProgramLayout out;
  for (const auto& st : core.statements) {
    if (!is_core(st.kind)) throw AsmError(st.line, "layout needs core statements only");
    StatementExtent e{out.op_total, 0, out.var_total, 0, out.const_total, 0};
    switch (st.kind) {
      case StmtKind::rep: e.op_count = 1; e.var_count = st.pairs.size(); break;
      case StmtKind::set: e.op_count = 1; e.var_count = 1; e.const_count = 1; break;
      case StmtKind::tstz: e.op_count = 2; e.var_count = st.pairs.size() + 1; break;
      default: e.op_count = 1; break;
    }
    out.op_total += e.op_count;
    out.var_total += e.var_count;
    out.const_total += e.const_count;
    out.extents.push_back(e);
  }
  return out;
}

inline std::map<std::string, std::size_t> label_table(const AsmProgram& core) {
  std::map<std::string, std::size_t> labels;
  for (std::size_t i = 0; i < core.statements.size(); ++i)
    for (const auto& l : core.statements[i].labels) labels.emplace(l, i);
  return labels;
}

struct BranchSite {
  std::size_t statement = 0;
  std::size_t tst_op = 0;  // op-stream index of the TST card
  std::size_t target_statement = 0;
  std::size_t target_op = 0, target_var = 0;
  std::int64_t n = 0, m = 0;  // emitted offsets
};

inline std::vector<BranchSite> resolve_distances(const AsmProgram& core, const ProgramLayout& lay, JumpMode mode) {
  const auto labels = label_table(core);
  std::vector<BranchSite> out;
  const auto op_len = static_cast<std::int64_t>(lay.op_total);
  const auto var_len = static_cast<std::int64_t>(lay.var_total);
  for (std::size_t i = 0; i < core.statements.size(); ++i) {
    const auto& st = core.statements[i];
    if (st.kind != StmtKind::tstz) continue;
    auto it = labels.find(st.target);
    if (it == labels.end()) throw AsmError(st.line, "undefined label '" + st.target + "'");
    const auto& from = lay.extents[i];
    const auto& to = lay.extents[it->second];
    BranchSite b;
    b.statement = i;
    b.tst_op = from.op_start;
    b.target_statement = it->second;
    b.target_op = to.op_start;
    b.target_var = to.var_start;
    b.n = static_cast<std::int64_t>(to.op_start) - static_cast<std::int64_t>(from.op_start + 2);
    b.m = static_cast<std::int64_t>(to.var_start) - static_cast<std::int64_t>(from.var_start + from.var_count);
    if (b.n == 0) throw AsmError(st.line, "branch to '" + st.target + "' targets the next statement");
    if (mode == JumpMode::looped) {
      if (b.n >= 0) b.n -= op_len;
      if (b.m >= 0) b.m -= var_len;
    }
    out.push_back(b);
  }
  return out;
}

struct CallSite {
  int id = 0;
  std::string target;
  std::string return_label;
  std::size_t line = 0;
};

struct Assembly {
  Deck deck;
  AsmProgram core;
  ProgramLayout layout;
  std::map<std::string, std::size_t> labels;  // label -> core statement
  std::vector<BranchSite> branches;
  std::vector<CallSite> calls;
};

inline Deck emit_deck(const AsmProgram& core, const std::vector<BranchSite>& branches, JumpMode mode) {
  Deck d;
  d.width = core.width;
  d.store_size = core.store_size;
  d.mode = mode;
  std::map<std::size_t, const BranchSite*> by_stmt;
  for (const auto& b : branches) by_stmt[b.statement] = &b;
  for (std::size_t i = 0; i < core.statements.size(); ++i) {
    const auto& st = core.statements[i];
    switch (st.kind) {
      case StmtKind::rep:
        d.ops.emplace_back(Operation{st.opcode, st.repeat, static_cast<int>(st.pairs.size()) / st.repeat});
        for (const auto& p : st.pairs) d.vars.emplace_back(p);
        break;
      case StmtKind::set:
        d.ops.emplace_back(Operation{Opcode::num, 1, 1});
        d.vars.emplace_back(Pair{0, st.dst});
        d.consts.push_back(st.literal);
        break;
      case StmtKind::tstz: {
        const auto* b = by_stmt.at(i);
        d.ops.emplace_back(Operation{Opcode::tst, 1, static_cast<int>(st.pairs.size())});
        d.ops.emplace_back(Distance{b->n});
        for (const auto& p : st.pairs) d.vars.emplace_back(p);
        d.vars.emplace_back(Distance{b->m});
        break;
      }
      default:
        d.ops.emplace_back(Operation{Opcode::hlt, 1, 0});
        break;
    }
  }
  return d;
}

inline Assembly assemble_program(const AsmProgram& program, std::optional<JumpMode> mode_override = std::nullopt) {
  Assembly out;
  const JumpMode mode = mode_override.value_or(program.mode);
  out.core = expand_macros(program);
  out.core.mode = mode;
  out.layout = layout(out.core);
  out.labels = label_table(out.core);
  out.branches = resolve_distances(out.core, out.layout, mode);
  out.deck = emit_deck(out.core, out.branches, mode);
  int id = 0;
  for (const auto& st : program.statements)
    if (st.kind == StmtKind::call) {
      ++id;
      out.calls.push_back({id, st.target, ".ret" + std::to_string(id), st.line});
    }
  if (auto violations = validate_deck(out.deck); !violations.empty())
    throw AsmError(0, "internal error: emitted deck fails validation: " + to_string(violations.front()));
  return out;
}

inline Assembly assemble(std::string_view source, std::optional<JumpMode> mode_override = std::nullopt) {
  return assemble_program(parse_asm(source), mode_override);
}

}  // namespace ae
