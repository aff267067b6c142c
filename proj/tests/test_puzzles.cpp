#include <doctest.h>

#include <set>

#include "drn/puzzle.hpp"

using namespace drn;
using namespace drn::puzzles;

namespace {

GeneratorConfig small_config(double rho, int n, std::uint64_t seed) {
  GeneratorConfig c;
  c.seed = seed;
  c.n_puzzles = n;
  c.vocab_size = 64;
  c.agreement_rate = rho;
  return c;
}

}  // namespace

TEST_CASE("rho zero makes every puzzle a trap") {
  auto puzzles = generate(small_config(0.0, 100, 9));
  CHECK(puzzles.size() == 100);
  for (const Puzzle& p : puzzles) CHECK(p.is_trap);
}

TEST_CASE("generation is byte-identical across runs") {
  auto a = serialize(generate(small_config(0.5, 50, 123)));
  auto b = serialize(generate(small_config(0.5, 50, 123)));
  CHECK(a == b);
  auto c = serialize(generate(small_config(0.5, 50, 124)));
  CHECK(a != c);
}

// Trap count for the committed seed. The binomial 99% interval around
// (1 - 0.7) * 1000 = 300 is [263, 337]; the exact draw is frozen so any
// change to the RNG stream layout is caught.
TEST_CASE("trap count at rho 0.7 falls in the binomial interval") {
  auto puzzles = generate(small_config(0.7, 1000, 42));
  int traps = 0;
  for (const Puzzle& p : puzzles) traps += p.is_trap ? 1 : 0;
  CHECK(traps >= 263);
  CHECK(traps <= 337);
  CHECK(traps == 286);  // frozen draw for (seed=42, n=1000, rho=0.7)
}

TEST_CASE("per-puzzle streams make subsets reproducible") {
  auto full = generate(small_config(0.5, 40, 77));
  auto prefix = generate(small_config(0.5, 10, 77));
  for (int i = 0; i < 10; ++i) CHECK(full[i] == prefix[i]);
}

TEST_CASE("serialize of empty list is empty") { CHECK(serialize({}).empty()); }

TEST_CASE("serialize round-trips 100 random puzzles") {
  auto puzzles = generate(small_config(0.6, 100, 2024));
  auto restored = deserialize(serialize(puzzles));
  REQUIRE(restored.size() == puzzles.size());
  for (std::size_t i = 0; i < puzzles.size(); ++i) CHECK(restored[i] == puzzles[i]);
}

TEST_CASE("malformed line is reported with its number") {
  CHECK_THROWS_WITH_AS(deserialize("{not json}\n"),
                       doctest::Contains("line 1"), ValueError);
  auto good = serialize(generate(small_config(0.5, 1, 5)));
  CHECK_THROWS_WITH_AS(deserialize(good + "{\"id\": 1}\n"),
                       doctest::Contains("line 2"), ValueError);
}

TEST_CASE("split honors fractions and determinism") {
  auto puzzles = generate(small_config(0.5, 1000, 31));

  auto [all_train, v0, t0] = split(puzzles, {1.0, 0.0, 0.0}, 1);
  CHECK(all_train.size() == 1000);
  CHECK(v0.empty());
  CHECK(t0.empty());

  auto [tr, va, te] = split(puzzles, {0.8, 0.1, 0.1}, 7);
  CHECK(tr.size() == 800);
  CHECK(va.size() == 100);
  CHECK(te.size() == 100);

  auto [tr2, va2, te2] = split(puzzles, {0.8, 0.1, 0.1}, 7);
  CHECK(tr == tr2);
  CHECK(va == va2);
  CHECK(te == te2);

  // disjoint and exhaustive
  std::set<int> ids;
  for (const auto* part : {&tr, &va, &te}) {
    for (const Puzzle& p : *part) ids.insert(p.id);
  }
  CHECK(ids.size() == 1000);

  CHECK_THROWS_AS(split(puzzles, {0.5, 0.1, 0.1}, 7), ValueError);
}

TEST_CASE("decisive rule oracle is perfect on any generated set") {
  for (double rho : {0.0, 0.5, 1.0}) {
    auto puzzles = generate(small_config(rho, 200, 88));
    for (const Puzzle& p : puzzles) CHECK(decisive_rule_answer(p) == p.gold_label);
  }
}

TEST_CASE("association heuristic scores zero on a pure trap set") {
  auto puzzles = generate(small_config(0.0, 200, 88));
  for (const Puzzle& p : puzzles) CHECK(association_vote_answer(p) != p.gold_label);
}

TEST_CASE("association heuristic is perfect when associations agree") {
  auto puzzles = generate(small_config(1.0, 200, 88));
  for (const Puzzle& p : puzzles) CHECK(association_vote_answer(p) == p.gold_label);
}

TEST_CASE("evidence mask puts no mass on distractors and sums to one") {
  auto puzzles = generate(small_config(0.5, 100, 6));
  for (const Puzzle& p : puzzles) {
    double mass = 0.0;
    for (std::size_t i = 0; i < p.statements.size(); ++i) {
      if (p.statements[i].role == Role::distractor) CHECK(p.gold_evidence_mask[i] == 0.0);
      if (p.statements[i].role == Role::association) CHECK(p.gold_evidence_mask[i] == 0.0);
      mass += p.gold_evidence_mask[i];
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("k greater than two produces one decisive statement per wrong option") {
  GeneratorConfig c = small_config(0.0, 50, 11);
  c.k = 4;
  auto puzzles = generate(c);
  for (const Puzzle& p : puzzles) {
    int decisive = 0;
    for (const Statement& s : p.statements) decisive += s.role == Role::decisive ? 1 : 0;
    CHECK(decisive == 3);
    CHECK(p.hypotheses.size() == 4);
    CHECK(decisive_rule_answer(p) == p.gold_label);
  }
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(generate(small_config(1.5, 10, 0)), ValueError);
  CHECK_THROWS_AS(generate(small_config(-0.1, 10, 0)), ValueError);
  CHECK_THROWS_AS(generate(small_config(0.5, 0, 0)), ValueError);

  GeneratorConfig tiny = small_config(0.5, 10, 0);
  tiny.vocab_size = 10;  // property pool shrinks below n_association
  CHECK_THROWS_WITH_AS(generate(tiny), doctest::Contains("vocab too small"), ValueError);

  GeneratorConfig many_options = small_config(0.5, 10, 0);
  many_options.vocab_size = 24;
  many_options.k = 9;
  CHECK_THROWS_WITH_AS(generate(many_options), doctest::Contains("vocab too small"), ValueError);
}
