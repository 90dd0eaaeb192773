#pragma once

// Card streams and their text form.
//
// A deck is three independent card strings: operation cards, variable
// (address pair) cards and constant cards, plus the machine configuration.
// The operation stream may carry distance cards right after a TST; so may the
// variable stream right after the pairs of a TST.

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ae/arith.hpp"
#include "ae/error.hpp"
#include "ae/text.hpp"

namespace ae {

using Address = std::uint32_t;  // 1-based store address; 0 means "none"

enum class Opcode { add, sub, mul, div, tst, num, hlt };

inline constexpr std::array<std::string_view, 7> kOpcodeNames = {"ADD", "SUB", "MUL", "DIV", "TST", "NUM", "HLT"};

inline std::string_view opcode_name(Opcode op) { return kOpcodeNames[static_cast<std::size_t>(op)]; }

inline std::optional<Opcode> parse_opcode(std::string_view s) {
  for (std::size_t i = 0; i < kOpcodeNames.size(); ++i)
    if (text::iequals(s, kOpcodeNames[i])) return static_cast<Opcode>(i);
  return std::nullopt;
}

// Operands the mill latches before it can act.
constexpr int arity(Opcode op) {
  switch (op) {
    case Opcode::add:
    case Opcode::sub:
    case Opcode::mul:
    case Opcode::div:
      return 2;
    case Opcode::tst:
      return 1;
    default:
      return 0;
  }
}

constexpr bool is_arithmetic(Opcode op) { return arity(op) == 2; }

struct Operation {
  Opcode opcode = Opcode::hlt;
  int repeat = 1;
  int pairs = 0;  // pair cards per iteration
  friend bool operator==(const Operation&, const Operation&) = default;
};

struct Distance {
  std::int64_t offset = 0;  // applied after the distance card is consumed
  friend bool operator==(const Distance&, const Distance&) = default;
};

struct Pair {
  Address src = 0;
  Address dst = 0;
  friend bool operator==(const Pair&, const Pair&) = default;
};

using OpCard = std::variant<Operation, Distance>;
using VarCard = std::variant<Pair, Distance>;

enum class JumpMode { bidirectional, looped };

inline std::string_view mode_name(JumpMode m) { return m == JumpMode::looped ? "looped" : "bidir"; }

inline std::optional<JumpMode> parse_mode(std::string_view s) {
  if (text::iequals(s, "bidir") || text::iequals(s, "bidirectional")) return JumpMode::bidirectional;
  if (text::iequals(s, "looped")) return JumpMode::looped;
  return std::nullopt;
}

struct Deck {
  std::vector<OpCard> ops;
  std::vector<VarCard> vars;
  std::vector<Cell> consts;
  int width = kDefaultWidth;
  std::size_t store_size = 1000;
  JumpMode mode = JumpMode::bidirectional;
  friend bool operator==(const Deck&, const Deck&) = default;
};

// Card-local invariants; returns an error message or empty.
inline std::string check_operation(const Operation& op) {
  if (op.repeat < 1) return "repeat must be at least 1";
  if (op.pairs < 0) return "pairs must be non-negative";
  if (op.repeat > 1 && !is_arithmetic(op.opcode)) return "repeat > 1 is only allowed for ADD/SUB/MUL/DIV";
  if (op.opcode == Opcode::tst && op.pairs < 1) return "TST needs at least one pair";
  if (op.opcode == Opcode::hlt && op.pairs != 0) return "HLT takes no pairs";
  return {};
}

inline std::string check_pair(const Pair& p, std::size_t store_size) {
  if (p.src == 0 && p.dst == 0) return "pair (0,0) is invalid";
  if (p.src > store_size || p.dst > store_size) return "address outside store of " + std::to_string(store_size) + " cells";
  return {};
}

// ---------------------------------------------------------------------------
// Text format

namespace detail {

inline std::int64_t parse_offset(std::string_view tok, std::size_t line) {
  auto v = text::parse_int<std::int64_t>(tok);
  if (!v) throw ParseError(line, "bad distance '" + std::string(tok) + "'");
  return *v;
}

inline std::optional<long long> key_value(std::string_view tok, std::string_view key, std::size_t line) {
  auto eq = tok.find('=');
  if (eq == std::string_view::npos || !text::iequals(tok.substr(0, eq), key)) return std::nullopt;
  auto v = text::parse_int<long long>(tok.substr(eq + 1));
  if (!v) throw ParseError(line, "bad value in '" + std::string(tok) + "'");
  return v;
}

}  // namespace detail

inline Deck parse_deck(std::string_view input) {
  Deck deck;
  enum class Section { none, ops, vars, consts } section = Section::none;
  bool have_header = false;
  auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string_view line = text::strip_comment(lines[i], '#');
    if (line.empty()) continue;
    auto toks = text::split_ws(line);

    if (!have_header) {
      if (!text::iequals(toks[0], "AEDECK")) throw ParseError(lineno, "expected AEDECK header");
      if (toks.size() < 2 || toks[1] != "1") throw ParseError(lineno, "unsupported deck version");
      for (std::size_t k = 2; k < toks.size(); ++k) {
        const auto tok = toks[k];
        if (auto w = detail::key_value(tok, "width", lineno)) {
          if (*w < 1 || *w > kMaxWidth) throw ParseError(lineno, "width out of range");
          deck.width = static_cast<int>(*w);
        } else if (auto s = detail::key_value(tok, "store", lineno)) {
          if (*s < 1 || *s > 1'000'000) throw ParseError(lineno, "store size out of range");
          deck.store_size = static_cast<std::size_t>(*s);
        } else if (text::iequals(tok.substr(0, 5), "mode=")) {
          auto m = parse_mode(tok.substr(5));
          if (!m) throw ParseError(lineno, "unknown mode '" + std::string(tok.substr(5)) + "'");
          deck.mode = *m;
        } else {
          throw ParseError(lineno, "unknown header field '" + std::string(tok) + "'");
        }
      }
      have_header = true;
      continue;
    }

    if (toks.size() == 1 && toks[0].back() == ':') {
      auto name = toks[0].substr(0, toks[0].size() - 1);
      if (text::iequals(name, "OPS")) section = Section::ops;
      else if (text::iequals(name, "VARS")) section = Section::vars;
      else if (text::iequals(name, "CONSTS")) section = Section::consts;
      else throw ParseError(lineno, "unknown section '" + std::string(name) + "'");
      continue;
    }

    const auto& kw = toks[0];
    switch (section) {
      case Section::none:
        throw ParseError(lineno, "card outside of a section");
      case Section::ops:
        if (text::iequals(kw, "OP")) {
          if (toks.size() < 2) throw ParseError(lineno, "OP needs an opcode");
          auto opc = parse_opcode(toks[1]);
          if (!opc) throw ParseError(lineno, "unknown opcode '" + std::string(toks[1]) + "'");
          Operation op{*opc, 1, 0};
          for (std::size_t k = 2; k < toks.size(); ++k) {
            if (auto r = detail::key_value(toks[k], "repeat", lineno)) op.repeat = static_cast<int>(*r);
            else if (auto p = detail::key_value(toks[k], "pairs", lineno)) op.pairs = static_cast<int>(*p);
            else throw ParseError(lineno, "unknown OP field '" + std::string(toks[k]) + "'");
          }
          if (auto err = check_operation(op); !err.empty()) throw ParseError(lineno, err);
          deck.ops.emplace_back(op);
        } else if (text::iequals(kw, "DIST")) {
          if (toks.size() != 2) throw ParseError(lineno, "DIST takes one offset");
          auto off = detail::parse_offset(toks[1], lineno);
          if (off == 0) throw ParseError(lineno, "operation distance must be nonzero");
          deck.ops.emplace_back(Distance{off});
        } else {
          throw ParseError(lineno, "expected OP or DIST in OPS section");
        }
        break;
      case Section::vars:
        if (text::iequals(kw, "PAIR")) {
          if (toks.size() != 3) throw ParseError(lineno, "PAIR takes two addresses");
          auto src = text::parse_int<Address>(toks[1]);
          auto dst = text::parse_int<Address>(toks[2]);
          if (!src || !dst) throw ParseError(lineno, "bad address");
          Pair p{*src, *dst};
          if (auto err = check_pair(p, deck.store_size); !err.empty()) throw ParseError(lineno, err);
          deck.vars.emplace_back(p);
        } else if (text::iequals(kw, "DIST")) {
          if (toks.size() != 2) throw ParseError(lineno, "DIST takes one offset");
          deck.vars.emplace_back(Distance{detail::parse_offset(toks[1], lineno)});
        } else {
          throw ParseError(lineno, "expected PAIR or DIST in VARS section");
        }
        break;
      case Section::consts:
        if (!text::iequals(kw, "CONST") || toks.size() != 2) throw ParseError(lineno, "expected CONST <value>");
        try {
          deck.consts.push_back(Cell::parse(toks[1], deck.width));
        } catch (const RangeError& e) {
          throw ParseError(lineno, e.what());
        }
        break;
    }
  }
  if (!have_header) throw ParseError(lines.size() + 1, "missing AEDECK header");
  return deck;
}

inline std::string serialize_deck(const Deck& d) {
  std::ostringstream out;
  out << "AEDECK 1 width=" << d.width << " store=" << d.store_size << " mode=" << mode_name(d.mode) << "\n";
  out << "OPS:\n";
  for (const auto& card : d.ops) {
    if (const auto* op = std::get_if<Operation>(&card))
      out << "  OP " << opcode_name(op->opcode) << " repeat=" << op->repeat << " pairs=" << op->pairs << "\n";
    else
      out << "  DIST " << std::get<Distance>(card).offset << "\n";
  }
  out << "VARS:\n";
  for (const auto& card : d.vars) {
    if (const auto* p = std::get_if<Pair>(&card))
      out << "  PAIR " << p->src << " " << p->dst << "\n";
    else
      out << "  DIST " << std::get<Distance>(card).offset << "\n";
  }
  out << "CONSTS:\n";
  for (const auto& c : d.consts) out << "  CONST " << c.to_string() << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Structural validation

struct Violation {
  std::string stream;  // "ops", "vars", "consts" or "deck"
  std::size_t index = 0;
  std::string message;
};

inline std::string to_string(const Violation& v) {
  return v.stream + "[" + std::to_string(v.index) + "]: " + v.message;
}

// Walks the op stream in order, pairing each operation with the var cards it
// consumes. Besides the stream discipline it checks what the machine would
// otherwise fault on at run time: operand supply per iteration, result
// retrieval before a result exists, branch landings that do not put both
// streams at the start of the same card group, and NUM cards that a backward
// branch could re-read from the forward-only constant stream.
inline std::vector<Violation> validate_deck(const Deck& d) {
  std::vector<Violation> out;
  auto add = [&](std::string stream, std::size_t idx, std::string msg) {
    out.push_back({std::move(stream), idx, std::move(msg)});
  };
  const bool looped = d.mode == JumpMode::looped;

  // var_start[i]: var position when op card i is read, for group-start op cards.
  std::vector<std::optional<std::size_t>> var_start(d.ops.size() + 1);
  struct Branch {
    std::size_t tst, after_op, after_var;
    std::int64_t n, m;
  };
  std::vector<Branch> branches;
  std::vector<std::size_t> num_cards;

  std::size_t vp = 0, cp = 0;
  bool vars_ok = true;
  for (std::size_t i = 0; i < d.ops.size(); ++i) {
    const auto* op = std::get_if<Operation>(&d.ops[i]);
    if (!op) {
      add("ops", i, "distance card not preceded by TST");
      continue;
    }
    var_start[i] = vp;
    if (auto err = check_operation(*op); !err.empty()) add("ops", i, err);
    if (op->opcode == Opcode::num) {
      num_cards.push_back(i);
      if (cp >= d.consts.size()) add("ops", i, "NUM card without a constant card");
      ++cp;
    }
    const int need = arity(op->opcode);
    for (int it = 0; it < std::max(op->repeat, 1); ++it) {
      int latched = 0;
      for (int k = 0; k < op->pairs; ++k, ++vp) {
        if (vp >= d.vars.size()) {
          if (vars_ok) add("vars", vp, "variable stream exhausted by op card " + std::to_string(i));
          vars_ok = false;
          continue;
        }
        const auto* p = std::get_if<Pair>(&d.vars[vp]);
        if (!p) {
          add("vars", vp, "distance card inside the pair group of op card " + std::to_string(i));
          continue;
        }
        if (auto err = check_pair(*p, d.store_size); !err.empty()) add("vars", vp, err);
        if (p->src != 0) {
          ++latched;
        } else if (op->opcode == Opcode::tst) {
          add("vars", vp, "result retrieval inside a TST group");
        } else if (need > 0 && latched < need) {
          add("vars", vp, "result retrieved before the operands are supplied");
        }
      }
      if (latched < need) add("ops", i, "op card supplies fewer operands than " + std::string(opcode_name(op->opcode)) + " needs");
    }
    if (op->opcode == Opcode::tst) {
      if (i + 1 >= d.ops.size() || !std::holds_alternative<Distance>(d.ops[i + 1])) {
        add("ops", i, "missing distance card after TST");
        continue;
      }
      if (vp >= d.vars.size() || !std::holds_alternative<Distance>(d.vars[vp])) {
        add("vars", vp, "missing variable distance card for TST at op card " + std::to_string(i));
        ++i;
        continue;
      }
      const auto n = std::get<Distance>(d.ops[i + 1]).offset;
      const auto m = std::get<Distance>(d.vars[vp]).offset;
      if (n == 0) add("ops", i + 1, "zero operation distance");
      if (looped && (n >= 0 || m >= 0)) add("ops", i + 1, "forward jump in looped mode");
      ++vp;
      branches.push_back({i, i + 2, vp, n, m});
      ++i;  // skip the distance card
    }
  }
  var_start[d.ops.size()] = vp;
  if (vars_ok && vp < d.vars.size()) add("vars", vp, "variable cards not consumed by any op card");

  const auto op_len = static_cast<std::int64_t>(d.ops.size());
  const auto var_len = static_cast<std::int64_t>(d.vars.size());
  for (const auto& b : branches) {
    std::int64_t to = static_cast<std::int64_t>(b.after_op) + b.n;
    std::int64_t tv = static_cast<std::int64_t>(b.after_var) + b.m;
    if (looped) {
      to = ((to % op_len) + op_len) % op_len;
      tv = var_len == 0 ? 0 : ((tv % var_len) + var_len) % var_len;
    } else if (to < 0 || to > op_len || tv < 0 || tv > var_len) {
      add("ops", b.tst, "branch lands outside the card streams");
      continue;
    }
    const auto& vs = var_start[static_cast<std::size_t>(to)];
    // A looped var stream reads its end position as card 0.
    const auto expect_var = [&](std::size_t s) { return looped && var_len > 0 ? s % d.vars.size() : s; };
    if (!vs) {
      add("ops", b.tst, "branch lands on a distance card");
    } else if (expect_var(*vs) != static_cast<std::size_t>(tv)) {
      add("ops", b.tst, "branch lands op stream at card " + std::to_string(to) + " but var stream at card " +
                            std::to_string(tv) + " (expected " + std::to_string(*vs) + ")");
    }
    if (!looped && to <= static_cast<std::int64_t>(b.tst)) {
      for (auto nc : num_cards)
        if (static_cast<std::int64_t>(nc) >= to && nc < b.tst)
          add("ops", nc, "NUM card inside a backward branch; the constant stream only moves forward");
    }
  }
  return out;
}

}  // namespace ae
