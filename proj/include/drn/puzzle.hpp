#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "drn/common.hpp"

namespace drn::puzzles {

// Multiple-choice puzzles over a small symbolic vocabulary. Every statement is
// an instantiated template; the first token names the template:
//
//   association  {ASSOC, entity, property, option}   "entity shows a property
//                                                     typical of option"
//   decisive     {NOT, entity, option}               "entity is not option"
//   distractor   {FACT, property, property}          unrelated trivia
//
// A puzzle carries one decisive negation for every wrong option, so the
// answer is always derivable from decisive statements alone. Association
// statements all point at one option: the gold one (agreement) or a wrong one
// (trap). Hypotheses are encoded as {HYP, option}.

enum class Role { association, decisive, distractor };

const char* role_name(Role role);
Role role_from_name(const std::string& name);

struct Statement {
  std::vector<int> tokens;
  Role role = Role::distractor;

  bool operator==(const Statement&) const = default;
};

// Rationale records attached to a puzzle by a provider (or loaded from disk).
struct RationaleRecord {
  int hypothesis = 0;
  std::vector<int> tokens;

  bool operator==(const RationaleRecord&) const = default;
};

struct Puzzle {
  int id = 0;
  std::vector<Statement> statements;
  std::vector<std::vector<int>> hypotheses;
  int gold_label = 0;
  std::vector<double> gold_evidence_mask;
  bool is_trap = false;
  std::vector<RationaleRecord> rationales;  // empty unless attached

  bool operator==(const Puzzle&) const = default;
};

struct GeneratorConfig {
  std::uint64_t seed = 0;
  int n_puzzles = 0;
  int vocab_size = 64;
  int n_association = 3;
  int n_distractor = 2;
  double agreement_rate = 0.7;  // fraction of puzzles where associations agree with gold
  int k = 2;
};

// Fixed template tokens at the bottom of every vocabulary.
struct Tokens {
  static constexpr int kAssoc = 0;
  static constexpr int kNot = 1;
  static constexpr int kFact = 2;
  static constexpr int kHyp = 3;
  static constexpr int kClaim = 4;  // used by rationale restatements
  static constexpr int kSpecialCount = 5;
};

constexpr int kMaxStatementLen = 8;

// Partition of a vocabulary into entity / property / option pools.
struct Vocabulary {
  int vocab_size = 0;
  int n_entities = 0;
  int n_properties = 0;
  int n_options = 0;

  static Vocabulary layout(int vocab_size);

  int entity(int i) const { return Tokens::kSpecialCount + i; }
  int property(int i) const { return Tokens::kSpecialCount + n_entities + i; }
  int option(int i) const { return Tokens::kSpecialCount + n_entities + n_properties + i; }
};

// Deterministic function of the config; puzzle i draws from an RNG stream
// derived from (seed, i), so any subset regenerates identically.
std::vector<Puzzle> generate(const GeneratorConfig& config);

// Throws ValueError if any structural invariant is violated.
void validate(const Puzzle& puzzle);
void validate(const GeneratorConfig& config);

// JSONL, one puzzle per line, LF endings, fixed field order; byte-stable.
std::string serialize(const std::vector<Puzzle>& puzzles);
std::vector<Puzzle> deserialize(const std::string& bytes);

// Deterministic disjoint split; fractions must sum to 1.
std::tuple<std::vector<Puzzle>, std::vector<Puzzle>, std::vector<Puzzle>> split(
    const std::vector<Puzzle>& puzzles, std::array<double, 3> fractions, std::uint64_t seed);

// Rule oracle that reads only decisive statements; correct by construction.
int decisive_rule_answer(const Puzzle& puzzle);

// Frequency heuristic that votes with association statements; picks the gold
// answer exactly when the puzzle is not a trap.
int association_vote_answer(const Puzzle& puzzle);

}  // namespace drn::puzzles
