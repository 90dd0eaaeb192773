#pragma once

// Trace-level checks shared by the assembler tests and the acceptance binary.

#include <optional>
#include <string>

#include "ae/asm.hpp"
#include "ae/vm.hpp"

namespace ae::check {

// Every taken branch must leave both streams on the first cards of the
// target statement.
inline std::optional<std::string> branch_landings(const Assembly& a, const RunResult& r, std::size_t* taken = nullptr) {
  std::map<std::size_t, const BranchSite*> by_op;
  for (const auto& b : a.branches) by_op[b.tst_op] = &b;
  for (const auto& ev : r.trace) {
    if (!ev.branch || !ev.branch->taken) continue;
    auto it = by_op.find(ev.op_pos);
    if (it == by_op.end()) return "taken branch at op " + std::to_string(ev.op_pos) + " has no branch site";
    if (taken) ++*taken;
    const auto& b = *it->second;
    std::size_t want_op = b.target_op, want_var = b.target_var;
    // A looped stream has no end position: its end is card 0.
    if (a.deck.mode == JumpMode::looped) {
      want_op %= a.deck.ops.size();
      if (!a.deck.vars.empty()) want_var %= a.deck.vars.size();
    }
    if (ev.next_op_pos != want_op || ev.next_var_pos != want_var)
      return "branch at op " + std::to_string(ev.op_pos) + " landed at (" + std::to_string(ev.next_op_pos) + "," +
             std::to_string(ev.next_var_pos) + "), expected (" + std::to_string(want_op) + "," +
             std::to_string(want_var) + ")";
  }
  return std::nullopt;
}

inline std::vector<std::size_t> executed_ops(const RunResult& r) {
  std::vector<std::size_t> ops;
  for (const auto& ev : r.trace) ops.push_back(ev.op_pos);
  return ops;
}

struct ModeComparison {
  RunResult bidir, looped;
  Assembly bidir_asm, looped_asm;
};

inline ModeComparison run_both_modes(const std::string& source, const StoreInit& init, RunLimits limits) {
  ModeComparison c;
  c.bidir_asm = assemble(source, JumpMode::bidirectional);
  c.looped_asm = assemble(source, JumpMode::looped);
  c.bidir = run(c.bidir_asm.deck, init, limits);
  c.looped = run(c.looped_asm.deck, init, limits);
  return c;
}

inline std::optional<std::string> mode_mismatch(const ModeComparison& c) {
  if (executed_ops(c.bidir) != executed_ops(c.looped)) return std::string("executed op sequences differ");
  if (c.bidir.state.store != c.looped.state.store) return std::string("final stores differ");
  if (c.bidir.state.fault != c.looped.state.fault) return std::string("faults differ");
  if (auto e = branch_landings(c.bidir_asm, c.bidir)) return "bidir: " + *e;
  if (auto e = branch_landings(c.looped_asm, c.looped)) return "looped: " + *e;
  return std::nullopt;
}

}  // namespace ae::check
