#include <random>

#include <gtest/gtest.h>

#include "ae/deck.hpp"
#include "ae/vm.hpp"
#include "generators.hpp"

namespace ae {
namespace {

constexpr int W = 30;

Cell v(std::int64_t x) { return Cell::from_int(x, W); }

MachineState fresh_state(std::size_t size, StoreInit init = {}) {
  MachineState st;
  st.store.assign(size + 1, Cell(W));
  for (auto& [a, c] : init) st.store[a] = c;
  return st;
}

std::int64_t at(const MachineState& st, Address a) { return st.at(a).to_int(); }

Deck one_op(Operation op, std::vector<Pair> pairs) {
  Deck d;
  d.ops = {op};
  for (auto p : pairs) d.vars.emplace_back(p);
  return d;
}

TEST(ExecPairs, ThreePairAddition) {
  auto st = fresh_state(10, store_from_ints({{1, 2}, {2, 3}}, W));
  const std::vector<Pair> pairs{{1, 0}, {2, 0}, {0, 3}};
  exec_pairs(st, Opcode::add, pairs, OverflowPolicy::halt);
  EXPECT_EQ(at(st, 1), 0);
  EXPECT_EQ(at(st, 2), 0);
  EXPECT_EQ(at(st, 3), 5);
}

TEST(ExecPairs, TemporaryCellRestoresFirstOperand) {
  auto st = fresh_state(10, store_from_ints({{1, 2}, {2, 3}}, W));
  const std::vector<Pair> pairs{{1, 9}, {2, 0}, {0, 3}, {9, 1}};
  exec_pairs(st, Opcode::add, pairs, OverflowPolicy::halt);
  EXPECT_EQ(at(st, 1), 2);
  EXPECT_EQ(at(st, 2), 0);
  EXPECT_EQ(at(st, 3), 5);
  EXPECT_EQ(at(st, 9), 0);
}

TEST(ExecPairs, MoveThroughZeroCell) {
  const Address Z = 200, T1 = 202;
  auto st = fresh_state(300, store_from_ints({{5, 77}}, W));
  const std::vector<Pair> pairs{{5, T1}, {Z, 0}, {0, 101}, {T1, 5}};
  exec_pairs(st, Opcode::add, pairs, OverflowPolicy::halt);
  EXPECT_EQ(at(st, 101), 77);
  EXPECT_EQ(at(st, 5), 77);
  EXPECT_EQ(at(st, Z), 0);
  EXPECT_EQ(at(st, T1), 0);
}

TEST(ExecPairs, ResultCanBeRetrievedTwice) {
  auto st = fresh_state(10, store_from_ints({{1, 4}, {2, 6}}, W));
  const std::vector<Pair> pairs{{1, 0}, {2, 0}, {0, 3}, {0, 4}};
  exec_pairs(st, Opcode::mul, pairs, OverflowPolicy::halt);
  EXPECT_EQ(at(st, 3), 24);
  EXPECT_EQ(at(st, 4), 24);
}

TEST(ExecPairs, OperandOrderForSubAndDiv) {
  auto st = fresh_state(10, store_from_ints({{1, 20}, {2, 6}, {4, 20}, {5, 6}}, W));
  exec_pairs(st, Opcode::sub, std::vector<Pair>{{1, 0}, {2, 0}, {0, 3}}, OverflowPolicy::halt);
  exec_pairs(st, Opcode::div, std::vector<Pair>{{4, 0}, {5, 0}, {0, 6}}, OverflowPolicy::halt);
  EXPECT_EQ(at(st, 3), 14);
  EXPECT_EQ(at(st, 6), 3);
}

TEST(ExecPairs, RetrievalWithoutResultIsStructural) {
  Deck d = one_op({Opcode::add, 1, 1}, {{0, 3}});
  auto r = run(d);
  EXPECT_EQ(r.state.status, Status::halted_error);
  EXPECT_EQ(r.state.fault, Fault::structural);
}

TEST(ExecPairs, OverflowPolicy) {
  Deck d = one_op({Opcode::add, 1, 3}, {{1, 0}, {2, 0}, {0, 3}});
  d.width = 6;
  auto init = store_from_ints({{1, 400000}, {2, 400000}}, 6);
  auto halted = run(d, init);
  EXPECT_EQ(halted.state.status, Status::halted_error);
  EXPECT_EQ(halted.state.fault, Fault::overflow);
  RunLimits wrap;
  wrap.overflow = OverflowPolicy::wrap;
  auto wrapped = run(d, init, wrap);
  EXPECT_EQ(wrapped.state.status, Status::out_of_cards);
  EXPECT_EQ(wrapped.state.at(3).digits(), "800000");
}

TEST(ExecPairs, DivisionByZeroHalts) {
  Deck d = one_op({Opcode::div, 1, 3}, {{1, 0}, {2, 0}, {0, 3}});
  auto r = run(d, store_from_ints({{1, 1}}, W));
  EXPECT_EQ(r.state.status, Status::halted_error);
  EXPECT_EQ(r.state.fault, Fault::division_by_zero);
}

Deck branch_deck() {
  // TST sits at op 7 with 7 cards before it and 11 var cards before its pair.
  Deck d;
  d.store_size = 20;
  for (int i = 0; i < 7; ++i) d.ops.emplace_back(Operation{Opcode::hlt, 1, 0});
  d.ops.emplace_back(Operation{Opcode::tst, 1, 1});
  d.ops.emplace_back(Distance{-7});
  d.ops.emplace_back(Operation{Opcode::hlt, 1, 0});
  for (int i = 0; i < 11; ++i) d.vars.emplace_back(Pair{1, 1});
  d.vars.emplace_back(Pair{4, 0});
  d.vars.emplace_back(Distance{-12});
  return d;
}

TEST(Step, TakenBranchRewindsBothStreams) {
  Machine m(branch_deck());
  m.seek(7, 11);
  auto ev = m.step();
  ASSERT_TRUE(ev.branch);
  EXPECT_TRUE(ev.branch->taken);
  EXPECT_EQ(ev.branch->n, -7);
  EXPECT_EQ(ev.branch->m, -12);
  // Post-distance positions are 9 and 13.
  EXPECT_EQ(m.state().op_pos, 2u);
  EXPECT_EQ(m.state().var_pos, 1u);
  EXPECT_EQ(ev.next_op_pos, 2u);
  EXPECT_EQ(ev.next_var_pos, 1u);
}

TEST(Step, UntakenBranchContinues) {
  Machine m(branch_deck());
  m.poke(4, v(5));
  m.seek(7, 11);
  auto ev = m.step();
  ASSERT_TRUE(ev.branch);
  EXPECT_FALSE(ev.branch->taken);
  EXPECT_EQ(m.state().op_pos, 9u);
  EXPECT_EQ(m.state().var_pos, 13u);
  EXPECT_EQ(m.state().at(4).to_int(), 0);  // the test read is destructive
}

TEST(Step, RepeatRunsTheGroupTwice) {
  Deck d = one_op({Opcode::add, 2, 3}, {{1, 0}, {2, 0}, {0, 3}, {4, 0}, {5, 0}, {0, 6}});
  auto r = run(d, store_from_ints({{1, 1}, {2, 2}, {4, 3}, {5, 4}}, W));
  EXPECT_EQ(r.state.status, Status::out_of_cards);
  EXPECT_EQ(at(r.state, 3), 3);
  EXPECT_EQ(at(r.state, 6), 7);
  for (Address a : {1, 2, 4, 5}) EXPECT_EQ(at(r.state, a), 0);
  EXPECT_EQ(r.state.steps, 1u);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].pairs.size(), 6u);
}

TEST(Step, NumLoadsConstantsInOrder) {
  Deck d;
  d.ops = {Operation{Opcode::num, 1, 1}, Operation{Opcode::num, 1, 2}};
  d.vars = {Pair{0, 1}, Pair{0, 2}, Pair{0, 3}};
  d.consts = {v(-42), v(9)};
  auto r = run(d);
  EXPECT_EQ(at(r.state, 1), -42);
  EXPECT_EQ(at(r.state, 2), 9);
  EXPECT_EQ(at(r.state, 3), 9);
}

TEST(Step, HaltStopsBeforeTheEnd) {
  Deck d;
  d.ops = {Operation{Opcode::hlt, 1, 0}, Operation{Opcode::num, 1, 1}};
  d.vars = {Pair{0, 1}};
  d.consts = {v(1)};
  auto r = run(d);
  EXPECT_EQ(r.state.status, Status::halted_ok);
  EXPECT_EQ(at(r.state, 1), 0);
}

TEST(Step, LoopedModeWrapsPositions) {
  // NUM 7 -> 1, then TST Z(=2) always zero, jump back -3 wraps to the NUM.
  Deck d;
  d.mode = JumpMode::looped;
  d.store_size = 5;
  d.ops = {Operation{Opcode::num, 1, 1}, Operation{Opcode::add, 1, 3}, Operation{Opcode::hlt, 1, 0}};
  d.vars = {Pair{0, 1}, Pair{1, 0}, Pair{1, 0}, Pair{0, 3}};
  d.consts = {v(7)};
  Machine m(d);
  m.step();
  m.step();
  EXPECT_EQ(m.state().op_pos, 2u);
  EXPECT_EQ(m.state().var_pos, 0u);  // wrapped after the last var card
  m.step();
  EXPECT_EQ(m.state().status, Status::halted_ok);
}

TEST(Run, AdditionDeckEndsOutOfCards) {
  Deck d = one_op({Opcode::add, 1, 3}, {{1, 0}, {2, 0}, {0, 3}});
  auto r = run(d, store_from_ints({{1, 2}, {2, 3}}, W));
  EXPECT_EQ(r.state.status, Status::out_of_cards);
  EXPECT_EQ(format_store(r.state), "3=5\n");
}

TEST(Run, EmptyDeck) {
  auto r = run(Deck{});
  EXPECT_EQ(r.state.status, Status::out_of_cards);
  EXPECT_EQ(r.state.steps, 0u);
}

TEST(Run, EndlessLoopHitsStepLimit) {
  // TST on an always-zero cell, jumping back onto itself.
  Deck d;
  d.store_size = 3;
  d.ops = {Operation{Opcode::tst, 1, 1}, Distance{-2}};
  d.vars = {Pair{3, 0}, Distance{-2}};
  ASSERT_TRUE(validate_deck(d).empty());
  RunLimits lim;
  lim.max_steps = 1000;
  auto r = run(d, {}, lim);
  EXPECT_EQ(r.state.status, Status::halted_error);
  EXPECT_EQ(r.state.fault, Fault::step_limit);
  EXPECT_EQ(r.state.steps, 1000u);
}

TEST(Run, StoreInitOutsideStoreThrows) {
  Deck d;
  d.store_size = 3;
  EXPECT_THROW(run(d, store_from_ints({{4, 1}}, W)), RangeError);
}

TEST(Trace, TextFormat) {
  Deck d = one_op({Opcode::add, 1, 3}, {{1, 0}, {2, 0}, {0, 3}});
  auto r = run(d, store_from_ints({{1, 2}, {2, 3}}, W));
  EXPECT_EQ(format_trace(r.trace),
            "0\t0\tADD\tpairs=[(1,0,2),(2,0,3),(0,3,5)]\twrites=[(1,2,0),(2,3,0),(3,0,5)]\tbranch=—\n");
  Machine m(branch_deck());
  m.seek(7, 11);
  EXPECT_EQ(format_trace_event(m.step()), "0\t7\tTST\tpairs=[(4,0,0)]\twrites=[]\tbranch=taken(-7,-12)");
}

TEST(Trace, StoreAssignmentsParse) {
  auto init = parse_store_assignments("1=2,2=-3\n7=4", W, 10);
  EXPECT_EQ(init.at(2).to_int(), -3);
  EXPECT_EQ(init.at(7).to_int(), 4);
  EXPECT_THROW(parse_store_assignments("11=1", W, 10), ParseError);
  EXPECT_THROW(parse_store_assignments("1:1", W, 10), ParseError);
}

struct Fixture {
  Deck deck;
  StoreInit init;
};

Fixture random_valid(std::mt19937_64& rng) {
  while (true) {
    Deck d = gen::random_deck(rng, true);
    if (!validate_deck(d).empty() || d.ops.empty()) continue;
    StoreInit init;
    for (Address a = 1; a <= d.store_size; ++a) init[a] = Cell::from_int(gen::uniform(rng, -5, 5), d.width);
    return {d, init};
  }
}

TEST(VmProperty, DeterministicAndReplayable) {
  std::mt19937_64 rng(99);
  RunLimits lim;
  lim.max_steps = 300;
  lim.overflow = OverflowPolicy::wrap;
  for (int i = 0; i < 500; ++i) {
    auto [d, init] = random_valid(rng);
    auto a = run(d, init, lim), b = run(d, init, lim);
    const auto ta = format_trace(a.trace);
    ASSERT_EQ(ta, format_trace(b.trace));
    ASSERT_EQ(format_store(a.state), format_store(b.state));
    ASSERT_EQ(replay_trace(a.trace, init, d.width, d.store_size), a.state.store);
    ASSERT_EQ(replay_trace_text(ta, init, d.width, d.store_size), a.state.store);
  }
}

TEST(VmProperty, CardAccounting) {
  std::mt19937_64 rng(123);
  RunLimits lim;
  lim.max_steps = 300;
  lim.overflow = OverflowPolicy::wrap;
  for (int i = 0; i < 500; ++i) {
    auto [d, init] = random_valid(rng);
    auto r = run(d, init, lim);
    for (const auto& ev : r.trace) {
      if (r.state.status == Status::halted_error && &ev == &r.trace.back()) break;
      const auto& op = std::get<Operation>(d.ops[ev.op_pos]);
      ASSERT_EQ(ev.pairs.size(), static_cast<std::size_t>(op.repeat * op.pairs));
      ASSERT_EQ(ev.branch.has_value(), op.opcode == Opcode::tst);
    }
  }
}

TEST(VmProperty, DestructiveReadAndSelfRestore) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2000; ++i) {
    auto st = fresh_state(6);
    for (Address a = 1; a <= 6; ++a) st.store[a] = v(gen::uniform(rng, -9, 9));
    st.result = v(1);
    const Address src = static_cast<Address>(gen::uniform(rng, 1, 6));
    const Address dst = static_cast<Address>(gen::uniform(rng, 0, 6));
    const Cell before = st.store[src];
    // NUM needs no operands, so every pair is a pure move.
    exec_pairs(st, Opcode::num, std::vector<Pair>{{src, dst}}, OverflowPolicy::halt);
    if (dst == src) {
      ASSERT_EQ(st.store[src], before);
    } else {
      ASSERT_TRUE(st.store[src].is_zero());
    }
    if (dst != 0) {
      ASSERT_EQ(st.store[dst], before);
    }
  }
}

}  // namespace
}  // namespace ae
