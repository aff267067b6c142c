#include "drn/puzzle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drn/rng.hpp"

namespace drn::puzzles {

using ordered_json = nlohmann::ordered_json;

const char* role_name(Role role) {
  switch (role) {
    case Role::association: return "association";
    case Role::decisive: return "decisive";
    case Role::distractor: return "distractor";
  }
  return "?";
}

Role role_from_name(const std::string& name) {
  if (name == "association") return Role::association;
  if (name == "decisive") return Role::decisive;
  if (name == "distractor") return Role::distractor;
  throw ValueError("unknown statement role: " + name);
}

Vocabulary Vocabulary::layout(int vocab_size) {
  Vocabulary v;
  v.vocab_size = vocab_size;
  const int rest = vocab_size - Tokens::kSpecialCount;
  if (rest < 5) throw ValueError("vocab too small: need at least 10 tokens");
  v.n_entities = std::max(1, rest / 4);
  v.n_options = std::max(2, (rest * 3) / 10);
  v.n_properties = rest - v.n_entities - v.n_options;
  return v;
}

void validate(const GeneratorConfig& config) {
  if (config.n_puzzles <= 0) throw ValueError("n_puzzles must be positive");
  if (config.k < 2) throw ValueError("k must be at least 2");
  if (config.n_association <= 0) throw ValueError("n_association must be positive");
  if (config.n_distractor < 0) throw ValueError("n_distractor must be non-negative");
  if (config.agreement_rate < 0.0 || config.agreement_rate > 1.0) {
    throw ValueError("agreement_rate must lie in [0, 1]");
  }
  const Vocabulary vocab = Vocabulary::layout(config.vocab_size);
  if (vocab.n_options < config.k) {
    throw ValueError("vocab too small: " + std::to_string(vocab.n_options) +
                     " option tokens cannot instantiate k=" + std::to_string(config.k) +
                     " distinct hypotheses");
  }
  if (vocab.n_properties < config.n_association || vocab.n_properties < 2) {
    throw ValueError("vocab too small: not enough property tokens for distinct templates");
  }
}

namespace {

Puzzle generate_one(const GeneratorConfig& config, const Vocabulary& vocab, int index) {
  Rng rng = Rng::derived(config.seed, static_cast<std::uint64_t>(index));
  Puzzle p;
  p.id = index;
  p.is_trap = !rng.bernoulli(config.agreement_rate);

  const int entity = vocab.entity(static_cast<int>(rng.uniform_int(vocab.n_entities)));
  const auto option_ids = rng.sample_distinct(vocab.n_options, static_cast<std::size_t>(config.k));
  p.gold_label = static_cast<int>(rng.uniform_int(config.k));

  int assoc_slot = p.gold_label;
  if (p.is_trap) {
    // Associations jointly support one wrong hypothesis.
    int wrong = static_cast<int>(rng.uniform_int(config.k - 1));
    assoc_slot = wrong >= p.gold_label ? wrong + 1 : wrong;
  }

  std::vector<Statement> statements;
  const auto props =
      rng.sample_distinct(vocab.n_properties, static_cast<std::size_t>(config.n_association));
  for (int a = 0; a < config.n_association; ++a) {
    Statement s;
    s.role = Role::association;
    s.tokens = {Tokens::kAssoc, entity, vocab.property(static_cast<int>(props[a])),
                vocab.option(static_cast<int>(option_ids[assoc_slot]))};
    statements.push_back(std::move(s));
  }
  for (int j = 0; j < config.k; ++j) {
    if (j == p.gold_label) continue;
    Statement s;
    s.role = Role::decisive;
    s.tokens = {Tokens::kNot, entity, vocab.option(static_cast<int>(option_ids[j]))};
    statements.push_back(std::move(s));
  }
  for (int dIdx = 0; dIdx < config.n_distractor; ++dIdx) {
    const auto pair = rng.sample_distinct(vocab.n_properties, 2);
    Statement s;
    s.role = Role::distractor;
    s.tokens = {Tokens::kFact, vocab.property(static_cast<int>(pair[0])),
                vocab.property(static_cast<int>(pair[1]))};
    statements.push_back(std::move(s));
  }

  std::vector<std::size_t> order(statements.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  int n_decisive = config.k - 1;
  p.statements.reserve(statements.size());
  p.gold_evidence_mask.resize(statements.size(), 0.0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Statement& s = statements[order[pos]];
    if (s.role == Role::decisive) p.gold_evidence_mask[pos] = 1.0 / n_decisive;
    p.statements.push_back(s);
  }

  p.hypotheses.reserve(config.k);
  for (int j = 0; j < config.k; ++j) {
    p.hypotheses.push_back({Tokens::kHyp, vocab.option(static_cast<int>(option_ids[j]))});
  }
  return p;
}

}  // namespace

std::vector<Puzzle> generate(const GeneratorConfig& config) {
  validate(config);
  const Vocabulary vocab = Vocabulary::layout(config.vocab_size);
  std::vector<Puzzle> puzzles;
  puzzles.reserve(static_cast<std::size_t>(config.n_puzzles));
  for (int i = 0; i < config.n_puzzles; ++i) {
    puzzles.push_back(generate_one(config, vocab, i));
    validate(puzzles.back());
  }
  return puzzles;
}

void validate(const Puzzle& puzzle) {
  const int k = static_cast<int>(puzzle.hypotheses.size());
  if (k < 2) throw ValueError("puzzle " + std::to_string(puzzle.id) + ": needs k >= 2 hypotheses");
  if (puzzle.gold_label < 0 || puzzle.gold_label >= k) {
    throw ValueError("puzzle " + std::to_string(puzzle.id) + ": gold_label out of range");
  }
  if (puzzle.gold_evidence_mask.size() != puzzle.statements.size()) {
    throw ValueError("puzzle " + std::to_string(puzzle.id) + ": mask length mismatch");
  }
  double mass = 0.0;
  bool has_decisive = false;
  for (std::size_t i = 0; i < puzzle.statements.size(); ++i) {
    const Statement& s = puzzle.statements[i];
    if (s.tokens.size() < 3 || s.tokens.size() > kMaxStatementLen) {
      throw ValueError("puzzle " + std::to_string(puzzle.id) + ": statement length out of bounds");
    }
    if (s.role == Role::decisive) has_decisive = true;
    if (s.role == Role::distractor && puzzle.gold_evidence_mask[i] != 0.0) {
      throw ValueError("puzzle " + std::to_string(puzzle.id) + ": mask mass on a distractor");
    }
    mass += puzzle.gold_evidence_mask[i];
  }
  if (!has_decisive) {
    throw ValueError("puzzle " + std::to_string(puzzle.id) + ": no decisive statement");
  }
  if (std::abs(mass - 1.0) > 1e-9) {
    throw ValueError("puzzle " + std::to_string(puzzle.id) + ": mask mass != 1");
  }
  if (puzzle.is_trap) {
    const int vote = association_vote_answer(puzzle);
    if (vote == puzzle.gold_label) {
      throw ValueError("puzzle " + std::to_string(puzzle.id) +
                       ": trap associations support the gold hypothesis");
    }
  }
}

namespace {

ordered_json puzzle_to_json(const Puzzle& p) {
  ordered_json j;
  j["id"] = p.id;
  ordered_json stmts = ordered_json::array();
  for (const Statement& s : p.statements) {
    ordered_json sj;
    sj["tokens"] = s.tokens;
    sj["role"] = role_name(s.role);
    stmts.push_back(std::move(sj));
  }
  j["statements"] = std::move(stmts);
  j["hypotheses"] = p.hypotheses;
  j["gold_label"] = p.gold_label;
  j["gold_evidence_mask"] = p.gold_evidence_mask;
  j["is_trap"] = p.is_trap;
  if (!p.rationales.empty()) {
    ordered_json rs = ordered_json::array();
    for (const RationaleRecord& r : p.rationales) {
      ordered_json rj;
      rj["hypothesis"] = r.hypothesis;
      rj["tokens"] = r.tokens;
      rs.push_back(std::move(rj));
    }
    j["rationales"] = std::move(rs);
  }
  return j;
}

Puzzle puzzle_from_json(const ordered_json& j) {
  Puzzle p;
  p.id = j.at("id").get<int>();
  for (const auto& sj : j.at("statements")) {
    Statement s;
    s.tokens = sj.at("tokens").get<std::vector<int>>();
    s.role = role_from_name(sj.at("role").get<std::string>());
    p.statements.push_back(std::move(s));
  }
  p.hypotheses = j.at("hypotheses").get<std::vector<std::vector<int>>>();
  p.gold_label = j.at("gold_label").get<int>();
  p.gold_evidence_mask = j.at("gold_evidence_mask").get<std::vector<double>>();
  p.is_trap = j.at("is_trap").get<bool>();
  if (j.contains("rationales")) {
    for (const auto& rj : j.at("rationales")) {
      RationaleRecord r;
      r.hypothesis = rj.at("hypothesis").get<int>();
      r.tokens = rj.at("tokens").get<std::vector<int>>();
      p.rationales.push_back(std::move(r));
    }
  }
  return p;
}

}  // namespace

std::string serialize(const std::vector<Puzzle>& puzzles) {
  std::string out;
  for (const Puzzle& p : puzzles) {
    out += puzzle_to_json(p).dump();
    out += '\n';
  }
  return out;
}

std::vector<Puzzle> deserialize(const std::string& bytes) {
  std::vector<Puzzle> puzzles;
  std::size_t line_start = 0;
  int line_no = 1;
  while (line_start < bytes.size()) {
    std::size_t line_end = bytes.find('\n', line_start);
    if (line_end == std::string::npos) line_end = bytes.size();
    const std::string line = bytes.substr(line_start, line_end - line_start);
    if (!line.empty()) {
      try {
        const ordered_json j = ordered_json::parse(line);
        Puzzle p = puzzle_from_json(j);
        validate(p);
        puzzles.push_back(std::move(p));
      } catch (const ValueError& e) {
        throw ValueError("line " + std::to_string(line_no) + ": " + e.what());
      } catch (const std::exception& e) {
        throw ValueError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
      }
    }
    line_start = line_end + 1;
    ++line_no;
  }
  return puzzles;
}

std::tuple<std::vector<Puzzle>, std::vector<Puzzle>, std::vector<Puzzle>> split(
    const std::vector<Puzzle>& puzzles, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ValueError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValueError("split fractions must sum to 1");

  std::vector<std::size_t> order(puzzles.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  const auto n = static_cast<long long>(puzzles.size());
  long long n0 = std::llround(fractions[0] * static_cast<double>(n));
  long long n1 = std::llround(fractions[1] * static_cast<double>(n));
  n0 = std::clamp(n0, 0ll, n);
  n1 = std::clamp(n1, 0ll, n - n0);

  std::tuple<std::vector<Puzzle>, std::vector<Puzzle>, std::vector<Puzzle>> out;
  for (long long i = 0; i < n; ++i) {
    const Puzzle& p = puzzles[order[static_cast<std::size_t>(i)]];
    if (i < n0) {
      std::get<0>(out).push_back(p);
    } else if (i < n0 + n1) {
      std::get<1>(out).push_back(p);
    } else {
      std::get<2>(out).push_back(p);
    }
  }
  return out;
}

int decisive_rule_answer(const Puzzle& puzzle) {
  const int k = static_cast<int>(puzzle.hypotheses.size());
  std::vector<bool> negated(static_cast<std::size_t>(k), false);
  for (const Statement& s : puzzle.statements) {
    if (s.role != Role::decisive || s.tokens.size() < 3 || s.tokens[0] != Tokens::kNot) continue;
    const int option_token = s.tokens[2];
    for (int j = 0; j < k; ++j) {
      if (puzzle.hypotheses[j].size() >= 2 && puzzle.hypotheses[j][1] == option_token) {
        negated[static_cast<std::size_t>(j)] = true;
      }
    }
  }
  for (int j = 0; j < k; ++j) {
    if (!negated[static_cast<std::size_t>(j)]) return j;
  }
  return 0;
}

int association_vote_answer(const Puzzle& puzzle) {
  const int k = static_cast<int>(puzzle.hypotheses.size());
  std::vector<int> votes(static_cast<std::size_t>(k), 0);
  for (const Statement& s : puzzle.statements) {
    if (s.role != Role::association || s.tokens.size() < 4) continue;
    const int option_token = s.tokens[3];
    for (int j = 0; j < k; ++j) {
      if (puzzle.hypotheses[j].size() >= 2 && puzzle.hypotheses[j][1] == option_token) {
        ++votes[static_cast<std::size_t>(j)];
      }
    }
  }
  int best = 0;
  for (int j = 1; j < k; ++j) {
    if (votes[static_cast<std::size_t>(j)] > votes[static_cast<std::size_t>(best)]) best = j;
  }
  return best;
}

}  // namespace drn::puzzles
