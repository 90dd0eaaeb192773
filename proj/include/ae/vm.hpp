#pragma once

// Card-stream interpreter.
//
// Every operation card is followed (in the variable stream) by its address
// pairs, handled one at a time by a single rule: a nonzero source is read
// destructively and either latched as the next operand (while the mill still
// needs one) or just moved; a zero source retrieves the mill's result. TST
// rewinds or advances both streams by the distances on its two distance
// cards when the tested value is zero.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ae/arith.hpp"
#include "ae/deck.hpp"
#include "ae/error.hpp"
#include "ae/text.hpp"

namespace ae {

enum class Status { running, halted_ok, out_of_cards, halted_error };

enum class Fault { none, overflow, division_by_zero, step_limit, structural };

inline std::string_view fault_name(Fault f) {
  switch (f) {
    case Fault::none: return "none";
    case Fault::overflow: return "overflow";
    case Fault::division_by_zero: return "division by zero";
    case Fault::step_limit: return "step limit";
    case Fault::structural: return "structural fault";
  }
  return "?";
}

enum class OverflowPolicy { halt, wrap };

struct RunLimits {
  std::uint64_t max_steps = 1'000'000;
  OverflowPolicy overflow = OverflowPolicy::halt;
  bool trace = true;
};

using StoreInit = std::map<Address, Cell>;

struct MachineState {
  std::vector<Cell> store;  // index 0 unused
  std::optional<Cell> result;
  std::size_t op_pos = 0, var_pos = 0, const_pos = 0;
  std::uint64_t steps = 0;
  Status status = Status::running;
  Fault fault = Fault::none;
  std::string reason;

  const Cell& at(Address a) const { return store.at(a); }
  std::size_t store_size() const { return store.empty() ? 0 : store.size() - 1; }

  void halt_error(Fault f, std::string why) {
    status = Status::halted_error;
    fault = f;
    reason = std::move(why);
  }
};

struct PairEvent {
  Address src = 0, dst = 0;
  Cell value;
};

struct WriteEvent {
  Address addr = 0;
  Cell old_value, new_value;
};

struct BranchEvent {
  bool taken = false;
  std::int64_t n = 0, m = 0;
};

struct TraceEvent {
  std::uint64_t step = 0;
  std::size_t op_pos = 0;
  Opcode opcode = Opcode::hlt;
  std::vector<PairEvent> pairs;
  std::vector<WriteEvent> writes;
  std::optional<BranchEvent> branch;
  // Stream positions once the card group is done (after any jump).
  std::size_t next_op_pos = 0, next_var_pos = 0;
};

namespace detail {
struct StructuralFault : Error {
  using Error::Error;
};
}  // namespace detail

// Processes one iteration's pair cards for `op`. The operand latch is local to
// the call, so each repeat iteration starts fresh. Returns the tested value
// for TST. On error sets the state's status and stops early.
inline std::optional<Cell> exec_pairs(MachineState& st, Opcode op, std::span<const Pair> pairs,
                                      OverflowPolicy policy, TraceEvent* ev = nullptr) {
  const int need = arity(op);
  std::vector<Cell> operands;
  operands.reserve(2);
  std::optional<Cell> tested;
  auto write = [&](Address a, const Cell& v) {
    Cell& slot = st.store.at(a);
    if (ev && !(slot == v)) ev->writes.push_back({a, slot, v});
    slot = v;
  };
  for (const auto& p : pairs) {
    if (p.src != 0) {
      const Cell value = st.store.at(p.src);
      write(p.src, Cell(value.width()));
      if (ev) ev->pairs.push_back({p.src, p.dst, value});
      if (static_cast<int>(operands.size()) < need) {
        operands.push_back(value);
        if (static_cast<int>(operands.size()) == need) {
          if (op == Opcode::tst) {
            tested = value;
          } else {
            ArithResult r;
            try {
              switch (op) {
                case Opcode::add: r = add(operands[0], operands[1]); break;
                case Opcode::sub: r = sub(operands[0], operands[1]); break;
                case Opcode::mul: r = mul(operands[0], operands[1]); break;
                default: r = div(operands[0], operands[1]); break;
              }
            } catch (const DivisionByZero&) {
              st.halt_error(Fault::division_by_zero, "division by zero");
              return std::nullopt;
            }
            if (r.overflow && policy == OverflowPolicy::halt) {
              st.halt_error(Fault::overflow, std::string("overflow in ") + std::string(opcode_name(op)));
              return std::nullopt;
            }
            st.result = r.value;
          }
        }
      }
      if (p.dst != 0) write(p.dst, value);
    } else {
      if (!st.result) throw detail::StructuralFault("result retrieved before any result exists");
      if (need > 0 && static_cast<int>(operands.size()) < need)
        throw detail::StructuralFault("result retrieved before the operands are supplied");
      if (ev) ev->pairs.push_back({0, p.dst, *st.result});
      write(p.dst, *st.result);
    }
  }
  if (static_cast<int>(operands.size()) < need)
    throw detail::StructuralFault(std::string(opcode_name(op)) + " iteration supplied too few operands");
  return tested;
}

class Machine {
 public:
  Machine(const Deck& deck, RunLimits limits = {}) : deck_(deck), limits_(limits) {
    state_.store.assign(deck.store_size + 1, Cell(deck.width));
  }

  void poke(Address a, const Cell& v) {
    if (a == 0 || a > deck_.store_size) throw RangeError("address " + std::to_string(a) + " outside the store");
    if (v.width() != deck_.width) throw RangeError("cell width does not match the deck");
    state_.store[a] = v;
  }

  // Repositions the three streams, e.g. to single-step a card group in isolation.
  void seek(std::size_t op_pos, std::size_t var_pos, std::size_t const_pos = 0) {
    state_.op_pos = op_pos;
    state_.var_pos = var_pos;
    state_.const_pos = const_pos;
  }

  const MachineState& state() const noexcept { return state_; }
  const Deck& deck() const noexcept { return deck_; }

  // Executes one operation card with all its cards. Requires status == running.
  TraceEvent step() {
    TraceEvent ev;
    ev.step = state_.steps;
    ev.op_pos = state_.op_pos;
    if (state_.status != Status::running) return ev;
    if (state_.steps >= limits_.max_steps) {
      state_.halt_error(Fault::step_limit, "step limit");
      return ev;
    }
    try {
      execute(ev);
    } catch (const detail::StructuralFault& e) {
      state_.halt_error(Fault::structural, e.what());
    }
    ev.next_op_pos = state_.op_pos;
    ev.next_var_pos = state_.var_pos;
    return ev;
  }

 private:
  bool looped() const { return deck_.mode == JumpMode::looped; }

  const OpCard& next_op() {
    if (state_.op_pos >= deck_.ops.size()) throw detail::StructuralFault("operation stream exhausted");
    const auto& card = deck_.ops[state_.op_pos];
    advance(state_.op_pos, deck_.ops.size());
    return card;
  }

  const VarCard& next_var() {
    if (state_.var_pos >= deck_.vars.size()) throw detail::StructuralFault("variable stream exhausted");
    const auto& card = deck_.vars[state_.var_pos];
    advance(state_.var_pos, deck_.vars.size());
    return card;
  }

  void advance(std::size_t& pos, std::size_t len) {
    ++pos;
    if (looped() && pos == len) pos = 0;
  }

  void jump(std::size_t& pos, std::int64_t offset, std::size_t len, const char* stream) {
    const auto target = static_cast<std::int64_t>(pos) + offset;
    const auto l = static_cast<std::int64_t>(len);
    if (looped()) {
      pos = l == 0 ? 0 : static_cast<std::size_t>(((target % l) + l) % l);
    } else {
      if (target < 0 || target > l) throw detail::StructuralFault(std::string("jump leaves the ") + stream + " stream");
      pos = static_cast<std::size_t>(target);
    }
  }

  void execute(TraceEvent& ev) {
    const auto* op = std::get_if<Operation>(&next_op());
    if (!op) throw detail::StructuralFault("distance card read as an operation");
    ev.opcode = op->opcode;
    TraceEvent* tev = limits_.trace ? &ev : nullptr;
    ++state_.steps;

    if (op->opcode == Opcode::hlt) {
      state_.status = Status::halted_ok;
      return;
    }
    if (op->opcode == Opcode::num) {
      if (state_.const_pos >= deck_.consts.size()) throw detail::StructuralFault("constant stream exhausted");
      state_.result = deck_.consts[state_.const_pos];
      advance(state_.const_pos, deck_.consts.size());
    }

    std::vector<Pair> group(static_cast<std::size_t>(op->pairs));
    std::optional<Cell> tested;
    for (int it = 0; it < op->repeat; ++it) {
      for (auto& p : group) {
        const auto* pc = std::get_if<Pair>(&next_var());
        if (!pc) throw detail::StructuralFault("distance card inside a pair group");
        p = *pc;
      }
      tested = exec_pairs(state_, op->opcode, group, limits_.overflow, tev);
      if (state_.status != Status::running) return;
    }

    if (op->opcode == Opcode::tst) {
      const auto* n = std::get_if<Distance>(&next_op());
      if (!n) throw detail::StructuralFault("TST without an operation distance card");
      const auto* m = std::get_if<Distance>(&next_var());
      if (!m) throw detail::StructuralFault("TST without a variable distance card");
      const bool taken = tested && tested->is_zero();
      ev.branch = BranchEvent{taken, n->offset, m->offset};
      if (taken) {
        jump(state_.op_pos, n->offset, deck_.ops.size(), "operation");
        jump(state_.var_pos, m->offset, deck_.vars.size(), "variable");
      }
    }
    if (!looped() && state_.op_pos >= deck_.ops.size()) state_.status = Status::out_of_cards;
  }

  Deck deck_;
  RunLimits limits_;
  MachineState state_;
};

struct RunResult {
  MachineState state;
  std::vector<TraceEvent> trace;
};

inline RunResult run(const Deck& deck, const StoreInit& init = {}, RunLimits limits = {}) {
  Machine m(deck, limits);
  for (const auto& [a, v] : init) m.poke(a, v);
  RunResult out;
  if (deck.ops.empty()) {
    out.state = m.state();
    out.state.status = Status::out_of_cards;
    return out;
  }
  while (m.state().status == Status::running) {
    TraceEvent ev = m.step();
    if (limits.trace && m.state().fault != Fault::step_limit) out.trace.push_back(std::move(ev));
  }
  out.state = m.state();
  return out;
}

// Convenience initializer from plain integers at the deck's width.
inline StoreInit store_from_ints(std::initializer_list<std::pair<Address, std::int64_t>> values, int width) {
  StoreInit init;
  for (const auto& [a, v] : values) init.insert_or_assign(a, Cell::from_int(v, width));
  return init;
}

// ---------------------------------------------------------------------------
// Text output

inline std::string format_trace_event(const TraceEvent& ev) {
  std::ostringstream out;
  out << ev.step << '\t' << ev.op_pos << '\t' << opcode_name(ev.opcode) << "\tpairs=[";
  for (std::size_t i = 0; i < ev.pairs.size(); ++i) {
    const auto& p = ev.pairs[i];
    out << (i ? "," : "") << '(' << p.src << ',' << p.dst << ',' << p.value.to_string() << ')';
  }
  out << "]\twrites=[";
  for (std::size_t i = 0; i < ev.writes.size(); ++i) {
    const auto& w = ev.writes[i];
    out << (i ? "," : "") << '(' << w.addr << ',' << w.old_value.to_string() << ',' << w.new_value.to_string() << ')';
  }
  out << "]\tbranch=";
  if (!ev.branch) out << "—";
  else if (ev.branch->taken) out << "taken(" << ev.branch->n << ',' << ev.branch->m << ')';
  else out << "not";
  return out.str();
}

inline std::string format_trace(const std::vector<TraceEvent>& trace) {
  std::string out;
  for (const auto& ev : trace) out += format_trace_event(ev) + "\n";
  return out;
}

// addr=value lines, ascending, zero cells omitted.
inline std::string format_store(const MachineState& st, Address lo = 1, Address hi = 0) {
  if (hi == 0 || hi > st.store_size()) hi = static_cast<Address>(st.store_size());
  std::string out;
  for (Address a = std::max<Address>(lo, 1); a <= hi; ++a)
    if (!st.store[a].is_zero()) out += std::to_string(a) + "=" + st.store[a].to_string() + "\n";
  return out;
}

// Parses `addr=value` lines (the dump format) or a comma list `k=v,k=v`.
inline StoreInit parse_store_assignments(std::string_view input, int width, std::size_t store_size) {
  StoreInit init;
  std::string normalized(input);
  for (auto& ch : normalized)
    if (ch == ',') ch = '\n';
  auto lines = text::split_lines(normalized);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::strip_comment(lines[i], '#');
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(i + 1, "expected addr=value");
    auto addr = text::parse_int<Address>(text::trim(line.substr(0, eq)));
    if (!addr || *addr == 0 || *addr > store_size)
      throw ParseError(i + 1, "address '" + std::string(text::trim(line.substr(0, eq))) + "' outside the store");
    try {
      init.insert_or_assign(*addr, Cell::parse(line.substr(eq + 1), width));
    } catch (const RangeError& e) {
      throw ParseError(i + 1, e.what());
    }
  }
  return init;
}

// Applies the store writes recorded in a trace to an initial store.
inline std::vector<Cell> replay_trace(const std::vector<TraceEvent>& trace, const StoreInit& init, int width,
                                      std::size_t store_size) {
  std::vector<Cell> store(store_size + 1, Cell(width));
  for (const auto& [a, v] : init) store.at(a) = v;
  for (const auto& ev : trace)
    for (const auto& w : ev.writes) store.at(w.addr) = w.new_value;
  return store;
}

// Same, from the text trace format: only the writes=[...] field is consulted.
inline std::vector<Cell> replay_trace_text(std::string_view trace_text, const StoreInit& init, int width,
                                           std::size_t store_size) {
  std::vector<Cell> store(store_size + 1, Cell(width));
  for (const auto& [a, v] : init) store.at(a) = v;
  auto lines = text::split_lines(trace_text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    auto pos = line.find("writes=[");
    if (pos == std::string_view::npos) continue;
    auto end = line.find(']', pos);
    if (end == std::string_view::npos) throw ParseError(i + 1, "unterminated writes field");
    auto body = line.substr(pos + 8, end - pos - 8);
    while (!body.empty()) {
      auto open = body.find('(');
      auto close = body.find(')');
      if (open == std::string_view::npos || close == std::string_view::npos) break;
      auto tuple = body.substr(open + 1, close - open - 1);
      auto c1 = tuple.find(',');
      auto c2 = tuple.find(',', c1 + 1);
      if (c1 == std::string_view::npos || c2 == std::string_view::npos) throw ParseError(i + 1, "bad write tuple");
      auto addr = text::parse_int<Address>(tuple.substr(0, c1));
      if (!addr || *addr > store_size) throw ParseError(i + 1, "bad write address");
      store[*addr] = Cell::parse(tuple.substr(c2 + 1), width);
      body.remove_prefix(close + 1);
    }
  }
  return store;
}

}  // namespace ae
