#pragma once

// Random generators shared by the property tests.

#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ae/deck.hpp"
#include "ae/tmc.hpp"

namespace ae::gen {

inline int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline bool chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Arbitrary card soup: mostly well-formed cards in plausible proportions, not
// necessarily a valid deck.
inline Deck random_deck(std::mt19937_64& rng, bool structured) {
  Deck d;
  d.width = uniform(rng, 3, 12);
  d.store_size = static_cast<std::size_t>(uniform(rng, 4, 12));
  d.mode = chance(rng, 0.3) ? JumpMode::looped : JumpMode::bidirectional;
  const auto addr = [&](bool allow_zero) {
    return static_cast<Address>(uniform(rng, allow_zero ? 0 : 1, static_cast<int>(d.store_size)));
  };
  const auto pair = [&] {
    Pair p{addr(true), addr(true)};
    if (p.src == 0 && p.dst == 0) p.src = 1;
    return p;
  };
  const auto offset = [&] {
    auto v = uniform(rng, -12, 12);
    return v == 0 ? -1 : v;
  };
  const int groups = uniform(rng, 0, 10);
  for (int g = 0; g < groups; ++g) {
    const int kind = uniform(rng, 0, 9);
    Operation op;
    if (kind < 5) {
      op.opcode = static_cast<Opcode>(uniform(rng, 0, 3));
      op.repeat = chance(rng, 0.2) ? 2 : 1;
      op.pairs = uniform(rng, 2, 4);
    } else if (kind < 7) {
      op.opcode = Opcode::tst;
      op.pairs = uniform(rng, 1, 2);
    } else if (kind < 9) {
      op.opcode = Opcode::num;
      op.pairs = uniform(rng, 0, 2);
    } else {
      op.opcode = Opcode::hlt;
    }
    d.ops.emplace_back(op);
    if (op.opcode == Opcode::tst || (!structured && chance(rng, 0.05))) d.ops.emplace_back(Distance{offset()});
    for (int k = 0; k < op.repeat * op.pairs; ++k) {
      Pair p = pair();
      // Structured decks put operand reads first so many of them validate.
      if (structured && k % op.pairs < arity(op.opcode) && p.src == 0) p.src = addr(false);
      if (structured && op.opcode == Opcode::tst && p.src == 0) p.src = addr(false);
      d.vars.emplace_back(p);
    }
    if (op.opcode == Opcode::tst) d.vars.emplace_back(Distance{structured ? offset() : uniform(rng, -12, 12)});
    if (op.opcode == Opcode::num || chance(rng, 0.1)) {
      d.consts.push_back(Cell::from_int(uniform(rng, -99, 99), d.width));
    }
  }
  return d;
}

struct TmShape {
  int max_states = 4, max_symbols = 3, max_tape = 20;
  double missing = 0.15, to_halt = 0.1;
};

inline TMSpec random_tm(std::mt19937_64& rng, TmShape shape = {}) {
  TMSpec spec;
  const int states = uniform(rng, 1, shape.max_states);
  const int symbols = uniform(rng, 2, shape.max_symbols);
  for (int i = 0; i < states; ++i) spec.states.push_back("q" + std::to_string(i));
  spec.states.push_back("halt");
  spec.start = 0;
  for (int s = 0; s < symbols; ++s) spec.alphabet.push_back(s);
  const int len = uniform(rng, 1, shape.max_tape);
  for (int k = 0; k < len; ++k) spec.tape.push_back(chance(rng, 0.6) ? 0 : uniform(rng, 0, symbols - 1));
  spec.head = static_cast<std::size_t>(uniform(rng, 1, len));
  for (int q = 0; q < states; ++q)
    for (int s = 0; s < symbols; ++s) {
      if (chance(rng, shape.missing)) continue;  // missing entry halts
      Transition t;
      t.next = static_cast<std::size_t>(chance(rng, shape.to_halt) ? states : uniform(rng, 0, states - 1));
      t.write = uniform(rng, 0, symbols - 1);
      t.move = static_cast<Move>(uniform(rng, 0, 2));
      spec.transitions[{static_cast<std::size_t>(q), s}] = t;
    }
  check_tm(spec);
  return spec;
}

inline std::string tm_to_text(const TMSpec& spec) {
  std::ostringstream out;
  out << "states:";
  for (const auto& s : spec.states) out << ' ' << s;
  out << "\nstart: " << spec.states[spec.start] << "\nblank: " << spec.blank << "\nalphabet:";
  for (int s : spec.alphabet) out << ' ' << s;
  out << "\ntape:";
  for (int s : spec.tape) out << ' ' << s;
  out << "\nhead: " << spec.head << "\n";
  for (const auto& [key, t] : spec.transitions)
    out << spec.states[key.first] << ' ' << key.second << " -> " << spec.states[t.next] << ' ' << t.write << ' '
        << (t.move == Move::left ? 'L' : t.move == Move::right ? 'R' : 'S') << "\n";
  return out.str();
}

// Terminating assembly programs over cells 1..8: arithmetic, forward skips
// (TSTZ/BNZ/JMP) and counted loops on cells 9..11. Labels are unique per block.
inline std::string random_asm(std::mt19937_64& rng, int budget = 14) {
  std::ostringstream out;
  out << ".width 12\n.store 300\n";
  int label = 0;
  const auto cell = [&] { return uniform(rng, 1, 8); };
  const char* ops[] = {"ADD", "SUB", "MUL", "DIV"};
  const char* keep[] = {"", " preserve", " preserve all"};

  std::function<void(int, int)> block = [&](int n, int depth) {
    for (int i = 0; i < n; ++i) {
      const int kind = uniform(rng, 0, 9);
      if (kind < 4) {
        const int op = chance(rng, 0.1) ? 3 : uniform(rng, 0, 2);
        out << "  " << ops[op] << " " << cell() << ", " << cell() << " -> " << cell() << keep[uniform(rng, 0, 2)] << "\n";
      } else if (kind == 4) {
        out << "  SET " << cell() << " = " << uniform(rng, -20, 20) << "\n";
      } else if (kind == 5) {
        out << "  MOV " << cell() << " -> " << cell() << (chance(rng, 0.5) ? " preserve" : "") << "\n";
      } else if (kind == 6 || kind == 7) {
        const int l = ++label;
        if (kind == 6) out << "  TSTZ " << cell() << ", f" << l << (chance(rng, 0.5) ? " preserve" : "") << "\n";
        else if (chance(rng, 0.7)) out << "  BNZ " << cell() << ", f" << l << "\n";
        else out << "  JMP f" << l << "\n";
        block(uniform(rng, 1, 3), depth);
        out << "f" << l << ":\n";
      } else if (depth < 2) {
        const int l = ++label;
        const int counter = 9 + depth;
        out << "  SET " << counter << " = " << uniform(rng, 1, 3) << "\n";
        out << "b" << l << ":\n";
        block(uniform(rng, 1, 3), depth + 1);
        out << "  SUB " << counter << ", E -> " << counter << " preserve\n";
        out << "  BNZ " << counter << ", b" << l << "\n";
      } else {
        out << "  ADD " << cell() << ", Z -> " << cell() << "\n";
      }
    }
  };
  block(uniform(rng, 1, budget), 0);
  if (chance(rng, 0.5)) out << "  HLT\n";
  return out.str();
}

}  // namespace ae::gen
