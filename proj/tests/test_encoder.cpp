#include <doctest.h>

#include "drn/grad_check.hpp"
#include "drn/model.hpp"
#include "test_util.hpp"

using namespace drn;
using puzzles::Statement;
using puzzles::Role;

namespace {

ModelConfig tiny_config() {
  ModelConfig m;
  m.d = 16;
  m.n_blocks = 1;
  m.n_heads = 1;
  m.ffn_hidden = 32;
  m.vocab_size = 24;
  m.k = 2;
  return m;
}

std::vector<Statement> make_statements(std::vector<std::vector<int>> token_lists) {
  std::vector<Statement> out;
  for (auto& tokens : token_lists) {
    Statement s;
    s.tokens = std::move(tokens);
    s.role = Role::distractor;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("encode shape contract holds for any counts") {
  ModelConfig m = tiny_config();
  auto params = init_model_params<double>(m, Variant::drn_full, 3);
  for (int n_statements : {1, 3, 6}) {
    for (int k : {2, 3, 4}) {
      Tape<double> tape;
      Bound<double> bound(tape, params, false);
      std::vector<std::vector<int>> lists;
      for (int i = 0; i < n_statements; ++i) lists.push_back({1, 2, 3 + i});
      std::vector<std::vector<int>> hyps;
      for (int i = 0; i < k; ++i) hyps.push_back({3, 10 + i});
      auto context = encode(tape, bound, m, make_statements(std::move(lists)), hyps);
      CHECK(context.statements.rows() == n_statements);
      CHECK(context.statements.cols() == m.d);
      CHECK(context.hypotheses.rows() == k);
      CHECK(context.hypotheses.cols() == m.d);
    }
  }
}

// With positions disabled, a statement of one repeated token pools to the
// same vector the single token produces: attention over identical rows is a
// convex combination of identical rows.
TEST_CASE("mean pooling of identical tokens matches the single-token encoding") {
  ModelConfig m = tiny_config();
  m.positional_encodings = false;
  auto params = init_model_params<double>(m, Variant::drn_full, 5);

  Tape<double> tape;
  Bound<double> bound(tape, params, false);
  std::vector<std::vector<int>> hyp{{3, 10}, {3, 11}};
  auto repeated = encode(tape, bound, m, make_statements({{7, 7, 7, 7}}), hyp);
  auto single = encode(tape, bound, m, make_statements({{7}}), hyp);
  for (Index c = 0; c < m.d; ++c) {
    CHECK(repeated.statements.value()(0, c) ==
          doctest::Approx(single.statements.value()(0, c)).epsilon(1e-12));
  }
}

TEST_CASE("statement vectors permute with statement order when positions are disabled") {
  ModelConfig m = tiny_config();
  m.positional_encodings = false;
  auto params = init_model_params<double>(m, Variant::drn_full, 7);

  std::vector<std::vector<int>> hyp{{3, 10}, {3, 11}};
  auto stmts = make_statements({{0, 6, 9, 10}, {1, 6, 11}, {2, 8, 9}});
  auto swapped = stmts;
  std::swap(swapped[0], swapped[2]);

  Tape<double> tape;
  Bound<double> bound(tape, params, false);
  auto a = encode(tape, bound, m, stmts, hyp);
  auto b = encode(tape, bound, m, swapped, hyp);
  for (Index c = 0; c < m.d; ++c) {
    CHECK(a.statements.value()(0, c) == doctest::Approx(b.statements.value()(2, c)).epsilon(1e-9));
    CHECK(a.statements.value()(1, c) == doctest::Approx(b.statements.value()(1, c)).epsilon(1e-9));
    CHECK(a.statements.value()(2, c) == doctest::Approx(b.statements.value()(0, c)).epsilon(1e-9));
  }
}

TEST_CASE("positions enabled breaks permutation symmetry") {
  ModelConfig m = tiny_config();
  auto params = init_model_params<double>(m, Variant::drn_full, 7);
  auto stmts = make_statements({{0, 6, 9, 10}, {2, 8, 9}});
  auto swapped = stmts;
  std::swap(swapped[0], swapped[1]);

  std::vector<std::vector<int>> hyp{{3, 10}, {3, 11}};
  Tape<double> tape;
  Bound<double> bound(tape, params, false);
  auto a = encode(tape, bound, m, stmts, hyp);
  auto b = encode(tape, bound, m, swapped, hyp);
  CHECK((a.statements.value().row(0) - b.statements.value().row(1)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("out-of-vocabulary token raises") {
  ModelConfig m = tiny_config();
  auto params = init_model_params<double>(m, Variant::drn_full, 1);
  Tape<double> tape;
  Bound<double> bound(tape, params, false);
  CHECK_THROWS_AS(encode(tape, bound, m, make_statements({{1, 2, 99}}), {{3, 10}, {3, 11}}),
                  ValueError);
}

TEST_CASE("encoder gradients match finite differences through pooling") {
  ModelConfig m = tiny_config();
  auto full = init_model_params<double>(m, Variant::drn_full, 11);

  NamedParams params;
  for (const auto& [name, value] : full) params.emplace_back(name, value);

  auto build = [&](Tape<double>& tape, const std::vector<Var<double>>& vars) {
    std::map<std::string, Var<double>> bound_map;
    std::size_t i = 0;
    for (const auto& [name, value] : params) bound_map.emplace(name, vars[i++]);
    Bound<double> bound(std::move(bound_map));
    auto context = encode(tape, bound, m, make_statements({{0, 6, 9, 10}, {1, 6, 11}}),
                          {{3, 10}, {3, 11}});
    return add(sum(context.statements), sum(context.hypotheses));
  };

  auto report = grad_check(build, params, 1e-6, 1e-4);
  CAPTURE(report.max_rel_error);
  CAPTURE(report.worst_param);
  CHECK(report.passed);
}
