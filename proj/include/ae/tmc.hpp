#pragma once

// Finite-tape Turing machines: text format, a direct reference simulator,
// and a compiler to assembly source for the card machine.
//
// Compiled store layout: tape cell k lives in working cell k (1..tape_len),
// the head index in H, the current state code in S, and a bounds flag in F.
// One pass of the main loop loads the scanned symbol through LOADI, picks the
// (state, symbol) case with two decrement chains over copies of S and the
// symbol, writes through STOREI, moves H by one, and jumps back.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ae/deck.hpp"
#include "ae/error.hpp"
#include "ae/text.hpp"
#include "ae/vm.hpp"

namespace ae {

enum class Move { left, right, stay };

struct Transition {
  std::size_t next = 0;
  int write = 0;
  Move move = Move::stay;
};

struct TMSpec {
  std::vector<std::string> states;
  std::size_t start = 0;
  int blank = 0;
  std::vector<int> alphabet;  // ascending digits
  std::map<std::pair<std::size_t, int>, Transition> transitions;  // absent = halt
  std::vector<int> tape;      // tape_len == tape.size()
  std::size_t head = 1;       // 1-based

  std::size_t tape_len() const { return tape.size(); }
};

namespace detail {

inline std::optional<int> parse_symbol(std::string_view s) {
  if (s.size() != 1 || s[0] < '0' || s[0] > '9') return std::nullopt;
  return s[0] - '0';
}

}  // namespace detail

// Fills in the alphabet when empty and checks the machine's invariants.
inline void check_tm(TMSpec& spec) {
  if (spec.states.empty()) throw Error("no states declared");
  if (spec.start >= spec.states.size()) throw Error("start state out of range");
  if (spec.tape.empty()) throw Error("tape must have at least one cell");
  if (spec.head < 1 || spec.head > spec.tape.size()) throw Error("head outside the tape");
  std::set<int> used{spec.blank};
  for (int s : spec.tape) used.insert(s);
  for (const auto& [key, t] : spec.transitions) {
    used.insert(key.second);
    used.insert(t.write);
    if (key.first >= spec.states.size() || t.next >= spec.states.size()) throw Error("transition names an unknown state");
  }
  if (spec.alphabet.empty()) {
    spec.alphabet.assign(used.begin(), used.end());
  } else {
    std::sort(spec.alphabet.begin(), spec.alphabet.end());
    for (int s : used)
      if (!std::binary_search(spec.alphabet.begin(), spec.alphabet.end(), s))
        throw Error("symbol " + std::to_string(s) + " not in the alphabet");
  }
}

inline TMSpec parse_tm(std::string_view input) {
  TMSpec spec;
  std::map<std::string, std::size_t> index;
  std::optional<std::string> start_name;
  std::optional<std::size_t> head;
  struct RawRule {
    std::string from;
    int read;
    std::string to;
    int write;
    Move move;
    std::size_t line;
  };
  std::vector<RawRule> rules;
  auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto line = text::strip_comment(lines[i], '#');
    if (line.empty()) continue;
    auto colon = line.find(':');
    auto toks = text::split_ws(colon == std::string_view::npos ? line : line.substr(colon + 1));
    if (colon != std::string_view::npos) {
      const auto key = text::lower(text::trim(line.substr(0, colon)));
      auto symbols = [&] {
        std::vector<int> out;
        for (auto t : toks) {
          auto s = detail::parse_symbol(t);
          if (!s) throw ParseError(lineno, "symbol '" + std::string(t) + "' is not a digit 0-9");
          out.push_back(*s);
        }
        return out;
      };
      if (key == "states") {
        if (toks.empty()) throw ParseError(lineno, "states: needs at least one name");
        for (auto t : toks) {
          if (!index.emplace(std::string(t), spec.states.size()).second)
            throw ParseError(lineno, "duplicate state '" + std::string(t) + "'");
          spec.states.emplace_back(t);
        }
      } else if (key == "start") {
        if (toks.size() != 1) throw ParseError(lineno, "start: takes one state");
        start_name = std::string(toks[0]);
      } else if (key == "blank") {
        auto s = symbols();
        if (s.size() != 1) throw ParseError(lineno, "blank: takes one symbol");
        spec.blank = s[0];
      } else if (key == "alphabet") {
        spec.alphabet = symbols();
      } else if (key == "tape") {
        spec.tape = symbols();
      } else if (key == "head") {
        auto h = toks.size() == 1 ? text::parse_int<std::size_t>(toks[0]) : std::nullopt;
        if (!h) throw ParseError(lineno, "head: takes one position");
        head = *h;
      } else {
        throw ParseError(lineno, "unknown field '" + key + "'");
      }
      continue;
    }
    // a 0 -> b 1 R
    if (toks.size() != 6 || toks[2] != "->") throw ParseError(lineno, "expected '<state> <symbol> -> <state> <symbol> L|R|S'");
    auto read = detail::parse_symbol(toks[1]);
    auto write = detail::parse_symbol(toks[4]);
    if (!read || !write) throw ParseError(lineno, "transition symbols must be digits 0-9");
    Move mv;
    if (text::iequals(toks[5], "L")) mv = Move::left;
    else if (text::iequals(toks[5], "R")) mv = Move::right;
    else if (text::iequals(toks[5], "S")) mv = Move::stay;
    else throw ParseError(lineno, "move must be L, R or S");
    rules.push_back({std::string(toks[0]), *read, std::string(toks[3]), *write, mv, lineno});
  }
  if (spec.states.empty()) throw ParseError(lines.size() + 1, "missing states: line");
  for (const auto& r : rules) {
    auto from = index.find(r.from), to = index.find(r.to);
    if (from == index.end()) throw ParseError(r.line, "unknown state '" + r.from + "'");
    if (to == index.end()) throw ParseError(r.line, "unknown state '" + r.to + "'");
    if (!spec.transitions.emplace(std::pair{from->second, r.read}, Transition{to->second, r.write, r.move}).second)
      throw ParseError(r.line, "duplicate transition for (" + r.from + ", " + std::to_string(r.read) + ")");
  }
  if (start_name) {
    auto it = index.find(*start_name);
    if (it == index.end()) throw ParseError(lines.size() + 1, "unknown start state '" + *start_name + "'");
    spec.start = it->second;
  }
  spec.head = head.value_or(1);
  try {
    check_tm(spec);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(lines.size() + 1, e.what());
  }
  return spec;
}

enum class TMStatus { halted, bounds, step_limit, machine_error };

inline std::string_view tm_status_name(TMStatus s) {
  switch (s) {
    case TMStatus::halted: return "halted";
    case TMStatus::bounds: return "bounds";
    case TMStatus::step_limit: return "step_limit";
    case TMStatus::machine_error: return "machine_error";
  }
  return "?";
}

struct TMOutcome {
  std::vector<int> tape;
  std::size_t state = 0;
  std::int64_t head = 1;  // 0 or tape_len + 1 after a bounds event
  TMStatus status = TMStatus::halted;
  std::uint64_t steps = 0;
};

// Configuration equality; the compiled program does not count TM steps.
inline bool same_outcome(const TMOutcome& a, const TMOutcome& b) {
  return a.tape == b.tape && a.state == b.state && a.head == b.head && a.status == b.status;
}

// Direct simulation. A move that leaves 1..tape_len ends the run with status
// bounds, after the write and the state change.
inline TMOutcome reference_tm_run(const TMSpec& spec, std::uint64_t max_steps) {
  TMOutcome out;
  out.tape = spec.tape;
  out.state = spec.start;
  out.head = static_cast<std::int64_t>(spec.head);
  const auto len = static_cast<std::int64_t>(spec.tape.size());
  while (true) {
    auto& cell = out.tape[static_cast<std::size_t>(out.head - 1)];
    auto it = spec.transitions.find({out.state, cell});
    if (it == spec.transitions.end()) {
      out.status = TMStatus::halted;
      return out;
    }
    if (out.steps == max_steps) {
      out.status = TMStatus::step_limit;
      return out;
    }
    cell = it->second.write;
    out.state = it->second.next;
    if (it->second.move == Move::left) --out.head;
    if (it->second.move == Move::right) ++out.head;
    ++out.steps;
    if (out.head < 1 || out.head > len) {
      out.status = TMStatus::bounds;
      return out;
    }
  }
}

inline std::string format_tm_outcome(const TMSpec& spec, const TMOutcome& o) {
  std::ostringstream out;
  out << "tape:";
  for (int s : o.tape) out << ' ' << s;
  out << "\nhead: " << o.head << "\nstate: " << (o.state < spec.states.size() ? spec.states[o.state] : "?")
      << "\nstatus: " << tm_status_name(o.status) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Compilation

struct TmCells {
  Address head = 210, state = 211, bounds = 212, x = 213, y = 214;
};

struct TmCompileOptions {
  JumpMode mode = JumpMode::bidirectional;
  std::size_t max_window = 100;
  int width = kDefaultWidth;
};

struct CompiledTM {
  std::string source;
  TmCells cells;
  std::vector<std::size_t> code_of;  // state index -> code (1-based)
  std::size_t window = 0;
  std::size_t dispatch_states = 0;   // states with at least one transition
};

inline CompiledTM compile_tm(const TMSpec& spec, const TmCompileOptions& opt = {}) {
  if (spec.tape_len() > opt.max_window)
    throw Error("tape of " + std::to_string(spec.tape_len()) + " cells exceeds the working window of " +
                std::to_string(opt.max_window));
  if (spec.alphabet.size() > 9) throw Error("alphabet has more than 9 symbols");

  CompiledTM out;
  out.window = spec.tape_len();
  const TmCells& c = out.cells;

  // States that can dispatch get the low codes so the chain stops early.
  std::vector<std::size_t> order;
  std::vector<bool> active(spec.states.size(), false);
  for (const auto& [key, t] : spec.transitions) active[key.first] = true;
  for (std::size_t i = 0; i < spec.states.size(); ++i)
    if (active[i]) order.push_back(i);
  out.dispatch_states = order.size();
  for (std::size_t i = 0; i < spec.states.size(); ++i)
    if (!active[i]) order.push_back(i);
  out.code_of.assign(spec.states.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) out.code_of[order[k]] = k + 1;

  std::ostringstream s;
  s << "; compiled Turing machine: " << spec.states.size() << " states, tape of " << spec.tape_len() << " cells\n";
  s << ".width " << opt.width << "\n.store 400\n.mode " << mode_name(opt.mode) << "\n.window " << out.window << "\n";
  s << ".reserve Z=200 E=201 T1=202 T2=203 C=204 J=205 STAGE=101 POOL=300\n";
  s << "; H=" << c.head << " S=" << c.state << " F=" << c.bounds << " scratch=" << c.x << "," << c.y << "\n";
  for (std::size_t k = 0; k < spec.tape_len(); ++k) s << "        SET " << k + 1 << " = " << spec.tape[k] << "\n";
  s << "        SET " << c.head << " = " << spec.head << "\n";
  s << "        SET " << c.state << " = " << out.code_of[spec.start] << "\n";
  s << "        SET " << c.bounds << " = 0\n";
  s << "loop:   MOV " << c.head << " -> C preserve\n";
  s << "        LOADI -> STAGE\n";
  s << "        MOV " << c.state << " -> " << c.y << " preserve\n";

  int ok_id = 0;
  for (std::size_t k = 0; k < out.dispatch_states; ++k) {
    const std::size_t st = order[k];
    s << "; state " << spec.states[st] << "\n";
    s << "        SUB " << c.y << ", E -> " << c.y << " preserve\n";
    s << "        BNZ " << c.y << ", st" << k + 1 << "\n";
    s << "        MOV STAGE -> " << c.x << " preserve\n";
    int prev = 0;
    for (int sym : spec.alphabet) {
      auto it = spec.transitions.find({st, sym});
      if (it == spec.transitions.end()) continue;
      for (; prev < sym; ++prev) s << "        SUB " << c.x << ", E -> " << c.x << " preserve\n";
      const auto& t = it->second;
      const std::string miss = "st" + std::to_string(k + 1) + "_" + std::to_string(sym);
      s << "        BNZ " << c.x << ", " << miss << "\n";
      s << "        MOV " << c.head << " -> C preserve\n";
      s << "        SET STAGE = " << t.write << "\n";
      s << "        STOREI STAGE\n";
      s << "        SET " << c.state << " = " << out.code_of[t.next] << "\n";
      if (t.move != Move::stay) {
        const std::string ok = "ok" + std::to_string(++ok_id);
        s << "        " << (t.move == Move::right ? "ADD " : "SUB ") << c.head << ", E -> " << c.head << " preserve\n";
        s << "        MOV " << c.head << " -> " << c.x << " preserve\n";
        if (t.move == Move::right) {
          s << "        SET " << c.y << " = " << spec.tape_len() + 1 << "\n";
          s << "        SUB " << c.x << ", " << c.y << " -> " << c.x << "\n";
        }
        s << "        BNZ " << c.x << ", " << ok << "\n";
        s << "        SET " << c.bounds << " = 1\n";
        s << "        HLT\n";
        s << ok << ":\n";
      }
      s << "        JMP loop\n";
      s << miss << ":\n";
    }
    s << "        HLT\n";
    s << "st" << k + 1 << ":\n";
  }
  s << "        HLT\n";
  out.source = s.str();
  return out;
}

// Upper bound on executed op cards, from the shape of the generated code:
// LOADI and STOREI chains cost at most 3W+1 each, the state chain 3 per state,
// the symbol chain at most 9 decrements plus 2 per symbol.
inline std::uint64_t vm_step_budget(const TMSpec& spec, const CompiledTM& compiled, std::uint64_t tm_steps) {
  const std::uint64_t w = compiled.window;
  const std::uint64_t per_step = 6 * w + 3 * compiled.dispatch_states + 45;
  const std::uint64_t prologue = spec.tape_len() + 64;
  return prologue + (tm_steps + 1) * per_step;
}

// Reads the TM configuration back out of a finished machine.
inline TMOutcome decode_tm_state(const TMSpec& spec, const CompiledTM& compiled, const MachineState& st) {
  TMOutcome out;
  for (std::size_t k = 1; k <= spec.tape_len(); ++k) out.tape.push_back(static_cast<int>(st.at(static_cast<Address>(k)).to_int()));
  out.head = st.at(compiled.cells.head).to_int();
  const auto code = st.at(compiled.cells.state).to_int();
  out.state = spec.states.size();
  for (std::size_t i = 0; i < compiled.code_of.size(); ++i)
    if (static_cast<std::int64_t>(compiled.code_of[i]) == code) out.state = i;
  if (st.status == Status::halted_ok) out.status = st.at(compiled.cells.bounds).is_zero() ? TMStatus::halted : TMStatus::bounds;
  else if (st.fault == Fault::step_limit) out.status = TMStatus::step_limit;
  else out.status = TMStatus::machine_error;
  out.steps = 0;  // not tracked by the compiled program
  return out;
}

}  // namespace ae
