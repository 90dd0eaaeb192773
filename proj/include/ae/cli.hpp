#pragma once

// `ae` command-line front end: asm, run, tmc, tm-run.
//
// Exit codes:
//   0  success (HLT or end of the operation cards)
//   1  usage, I/O, parse or assembly error
//   2  machine halted with an arithmetic error (overflow, division by zero)
//   3  structural fault, including a deck that fails validation
//   4  step limit reached

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ae/asm.hpp"
#include "ae/deck.hpp"
#include "ae/tmc.hpp"
#include "ae/vm.hpp"

namespace ae::cli {

enum ExitCode : int { ok = 0, input_error = 1, arith_error = 2, structural = 3, step_limit = 4 };

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_output(const std::string& path, const std::string& data, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << data;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << data;
}

inline int exit_code_for(const MachineState& st) {
  switch (st.status) {
    case Status::halted_ok:
    case Status::out_of_cards:
      return ok;
    case Status::halted_error:
      if (st.fault == Fault::step_limit) return step_limit;
      if (st.fault == Fault::structural) return structural;
      return arith_error;
    default:
      return structural;
  }
}

inline std::string_view status_name(const MachineState& st) {
  switch (st.status) {
    case Status::running: return "running";
    case Status::halted_ok: return "halted_ok";
    case Status::out_of_cards: return "out_of_cards";
    case Status::halted_error: return "halted_error";
  }
  return "?";
}

struct RunConfig {
  std::string deck_path;
  std::string store_inline;
  std::string store_file;
  bool trace = false;
  std::uint64_t max_steps = 1'000'000;
  std::string overflow = "halt";
  std::string dump;  // "lo..hi"
};

inline std::pair<Address, Address> parse_dump_range(const std::string& s) {
  auto dots = s.find("..");
  if (dots == std::string::npos) throw Error("--dump expects lo..hi");
  auto lo = text::parse_int<Address>(s.substr(0, dots));
  auto hi = text::parse_int<Address>(s.substr(dots + 2));
  if (!lo || !hi || *lo > *hi) throw Error("bad --dump range '" + s + "'");
  return {*lo, *hi};
}

inline int cmd_asm(const std::string& in_path, const std::string& out_path, const std::string& mode,
                   std::ostream& out, std::ostream& err) {
  std::optional<JumpMode> m;
  if (!mode.empty()) m = parse_mode(mode);
  auto assembly = assemble(read_file(in_path), m);
  write_output(out_path, serialize_deck(assembly.deck), out);
  (void)err;
  return ok;
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Deck deck = parse_deck(read_file(cfg.deck_path));
  if (auto v = validate_deck(deck); !v.empty()) {
    for (const auto& x : v) err << "invalid deck: " << to_string(x) << "\n";
    return structural;
  }
  StoreInit init;
  if (!cfg.store_file.empty()) init = parse_store_assignments(read_file(cfg.store_file), deck.width, deck.store_size);
  if (!cfg.store_inline.empty())
    for (auto& [a, v] : parse_store_assignments(cfg.store_inline, deck.width, deck.store_size)) init.insert_or_assign(a, v);

  RunLimits limits;
  limits.max_steps = cfg.max_steps;
  limits.trace = cfg.trace;
  if (cfg.overflow == "wrap") limits.overflow = OverflowPolicy::wrap;
  else if (cfg.overflow != "halt") throw Error("--overflow takes halt or wrap");

  Address lo = 1, hi = 0;
  if (!cfg.dump.empty()) std::tie(lo, hi) = parse_dump_range(cfg.dump);

  auto result = run(deck, init, limits);
  if (cfg.trace) out << format_trace(result.trace);
  out << format_store(result.state, lo, hi);
  err << "status: " << status_name(result.state);
  if (result.state.status == Status::halted_error) err << " (" << result.state.reason << ")";
  err << " after " << result.state.steps << " steps\n";
  return exit_code_for(result.state);
}

inline int cmd_tmc(const std::string& tm_path, const std::string& out_path, const std::string& emit,
                   const std::string& mode, std::ostream& out) {
  const TMSpec spec = parse_tm(read_file(tm_path));
  TmCompileOptions opt;
  if (!mode.empty()) opt.mode = parse_mode(mode).value_or(JumpMode::bidirectional);
  const auto compiled = compile_tm(spec, opt);
  if (emit == "asm") write_output(out_path, compiled.source, out);
  else if (emit == "deck") write_output(out_path, serialize_deck(assemble(compiled.source).deck), out);
  else throw Error("--emit takes asm or deck");
  return ok;
}

inline int cmd_tm_run(const std::string& tm_path, std::uint64_t max_steps, bool on_vm, const std::string& mode,
                      std::ostream& out) {
  const TMSpec spec = parse_tm(read_file(tm_path));
  if (!on_vm) {
    out << format_tm_outcome(spec, reference_tm_run(spec, max_steps));
    return ok;
  }
  TmCompileOptions opt;
  if (!mode.empty()) opt.mode = parse_mode(mode).value_or(JumpMode::bidirectional);
  const auto compiled = compile_tm(spec, opt);
  const auto assembly = assemble(compiled.source);
  RunLimits limits;
  limits.trace = false;
  limits.max_steps = vm_step_budget(spec, compiled, max_steps);
  const auto result = run(assembly.deck, {}, limits);
  out << format_tm_outcome(spec, decode_tm_state(spec, compiled, result.state));
  return ok;
}

// Entry point; args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Analytical Engine card machine, assembler and Turing machine compiler", "ae"};
  app.require_subcommand(1);

  std::string in_path, out_path, mode, emit = "deck";
  RunConfig cfg;
  bool on_vm = false;
  std::uint64_t tm_steps = 1'000'000;

  auto* asm_cmd = app.add_subcommand("asm", "assemble a source file into a deck");
  asm_cmd->add_option("input", in_path, "assembly source")->required();
  asm_cmd->add_option("-o,--output", out_path, "deck file (default stdout)");
  asm_cmd->add_option("--mode", mode, "bidir or looped")->check(CLI::IsMember({"bidir", "looped"}));

  auto* run_cmd = app.add_subcommand("run", "run a deck");
  run_cmd->add_option("deck", cfg.deck_path, "deck file")->required();
  auto* store_opt = run_cmd->add_option("--store", cfg.store_inline, "initial store, k=v,k=v");
  run_cmd->add_option("--store-file", cfg.store_file, "file of addr=value lines")->excludes(store_opt);
  run_cmd->add_flag("--trace", cfg.trace, "print the execution trace");
  run_cmd->add_option("--max-steps", cfg.max_steps, "step limit");
  run_cmd->add_option("--overflow", cfg.overflow, "halt or wrap")->check(CLI::IsMember({"halt", "wrap"}));
  run_cmd->add_option("--dump", cfg.dump, "address range lo..hi");

  auto* tmc_cmd = app.add_subcommand("tmc", "compile a Turing machine");
  tmc_cmd->add_option("tm", in_path, "machine description")->required();
  tmc_cmd->add_option("-o,--output", out_path, "output file (default stdout)");
  tmc_cmd->add_option("--emit", emit, "deck or asm")->check(CLI::IsMember({"deck", "asm"}));
  tmc_cmd->add_option("--mode", mode, "bidir or looped")->check(CLI::IsMember({"bidir", "looped"}));

  auto* tmrun_cmd = app.add_subcommand("tm-run", "simulate a Turing machine directly (or on the card machine)");
  tmrun_cmd->add_option("tm", in_path, "machine description")->required();
  tmrun_cmd->add_option("--max-steps", tm_steps, "TM step limit");
  tmrun_cmd->add_flag("--vm", on_vm, "compile and run on the card machine instead");
  tmrun_cmd->add_option("--mode", mode, "bidir or looped (with --vm)")->check(CLI::IsMember({"bidir", "looped"}));

  std::vector<std::string> argv_store{"ae"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? ok : input_error;
  }

  try {
    if (*asm_cmd) return cmd_asm(in_path, out_path, mode, out, err);
    if (*run_cmd) return cmd_run(cfg, out, err);
    if (*tmc_cmd) return cmd_tmc(in_path, out_path, emit, mode, out);
    if (*tmrun_cmd) return cmd_tm_run(in_path, tm_steps, on_vm, mode, out);
  } catch (const Error& e) {
    err << "ae: " << e.what() << "\n";
    return input_error;
  }
  return input_error;
}

}  // namespace ae::cli
