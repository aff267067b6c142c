#include <doctest.h>

#include <cmath>

#include "drn/decision.hpp"
#include "drn/grad_check.hpp"
#include "test_util.hpp"

using namespace drn;
using testutil::random_mat;

namespace {

ModelConfig uqn_config(int d) {
  ModelConfig m;
  m.d = d;
  m.vocab_size = 16;
  return m;
}

}  // namespace

TEST_CASE("zero pre-activation yields softplus(0) plus the floor") {
  const int d = 8;
  ModelConfig m = uqn_config(d);
  ParamMap<double> params;
  init_uqn_params(params, m, 3);
  params["uqn.w2"] = Mat<double>::Zero(d, 1);
  params["uqn.b2"] = Mat<double>::Zero(1, 1);

  Rng rng(1);
  Tape<double> tape;
  Bound<double> bound(tape, params, false);
  auto b = tape.constant(random_mat<double>(rng, 1, d));
  auto e = tape.constant(random_mat<double>(rng, 1, d));
  CHECK(quantify(bound, b, e).item() ==
        doctest::Approx(std::log(2.0) + kVarianceFloor).epsilon(1e-12));
}

TEST_CASE("deeply negative pre-activation approaches the positivity floor") {
  const int d = 8;
  ModelConfig m = uqn_config(d);
  ParamMap<double> params;
  init_uqn_params(params, m, 3);
  params["uqn.w2"] = Mat<double>::Zero(d, 1);
  params["uqn.b2"] = Mat<double>::Constant(1, 1, -60.0);

  Rng rng(2);
  Tape<double> tape;
  Bound<double> bound(tape, params, false);
  auto b = tape.constant(random_mat<double>(rng, 1, d));
  auto e = tape.constant(random_mat<double>(rng, 1, d));
  const double sigma2 = quantify(bound, b, e).item();
  CHECK(sigma2 > 0.0);
  CHECK(sigma2 == doctest::Approx(kVarianceFloor).epsilon(1e-6));
}

TEST_CASE("quantify is strictly positive for random parameters") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int d = 8;
    ModelConfig m = uqn_config(d);
    ParamMap<double> params;
    init_uqn_params(params, m, seed);
    Rng rng(seed + 100);
    Tape<double> tape;
    Bound<double> bound(tape, params, false);
    auto b = tape.constant(random_mat<double>(rng, 1, d, -5.0, 5.0));
    auto e = tape.constant(random_mat<double>(rng, 1, d, -5.0, 5.0));
    CHECK(quantify(bound, b, e).item() > 0.0);
  }
}

TEST_CASE("quantify gradients match finite differences") {
  const int d = 8;
  ModelConfig m = uqn_config(d);
  ParamMap<double> full;
  init_uqn_params(full, m, 17);

  Rng rng(5);
  NamedParams params;
  for (const auto& [name, value] : full) params.emplace_back(name, value);
  params.emplace_back("input.b", random_mat<double>(rng, 1, d));
  params.emplace_back("input.e", random_mat<double>(rng, 1, d));

  auto build = [&](Tape<double>&, const std::vector<Var<double>>& vars) {
    std::map<std::string, Var<double>> bound_map;
    std::size_t i = 0;
    for (const auto& [name, value] : params) bound_map.emplace(name, vars[i++]);
    Var<double> b = bound_map.at("input.b");
    Var<double> e = bound_map.at("input.e");
    Bound<double> bound(std::move(bound_map));
    return quantify(bound, b, e);
  };

  auto report = grad_check(build, params, 1e-6, 1e-4);
  CAPTURE(report.max_rel_error);
  CHECK(report.passed);
}

TEST_CASE("decide picks the argmin with lowest-index ties") {
  CHECK(decide({0.5, 1.2}) == 0);
  CHECK(decide({0.3, 0.3}) == 0);
  CHECK(decide({2.0, 0.1, 0.7}) == 1);
}

TEST_CASE("decide rejects invalid scores") {
  CHECK_THROWS_AS(decide({1.0}), ValueError);
  CHECK_THROWS_AS(decide({1.0, -0.5}), ValueError);
  CHECK_THROWS_AS(decide({1.0, 0.0}), ValueError);
  CHECK_THROWS_AS(decide({1.0, std::numeric_limits<double>::infinity()}), ValueError);
  CHECK_THROWS_AS(decide({1.0, std::numeric_limits<double>::quiet_NaN()}), ValueError);
}

// Property: argmin correctness and invariance under uniform strictly
// increasing transforms, over 1000 random score vectors.
TEST_CASE("decide is invariant under monotone transforms") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.uniform_int(5);
    std::vector<double> scores(k);
    for (double& s : scores) s = rng.uniform(1e-6, 10.0);

    const int choice = decide(scores);
    for (std::size_t i = 0; i < k; ++i) CHECK(scores[static_cast<std::size_t>(choice)] <= scores[i]);

    std::vector<double> doubled(k), shifted(k), exped(k), squared(k);
    for (std::size_t i = 0; i < k; ++i) {
      doubled[i] = 2.0 * scores[i];
      shifted[i] = scores[i] + 3.5;
      exped[i] = std::exp(scores[i] * 0.3);
      squared[i] = scores[i] * scores[i];
    }
    CHECK(decide(doubled) == choice);
    CHECK(decide(shifted) == choice);
    CHECK(decide(exped) == choice);
    CHECK(decide(squared) == choice);
  }
}
