#pragma once

#include <cmath>
#include <vector>

#include "drn/config.hpp"
#include "drn/params.hpp"
#include "drn/tape.hpp"

namespace drn {

// Uncertainty Quantification Network and the minimum-uncertainty decision
// rule. The UQN maps [belief ; evidence] through one tanh hidden layer to a
// raw scalar, then softplus + epsilon keeps the variance strictly positive.

inline constexpr double kVarianceFloor = 1e-6;

template <class Scalar>
void init_uqn_params(ParamMap<Scalar>& params, const ModelConfig& m, std::uint64_t seed,
                     const std::string& prefix = "uqn.") {
  const Index d = m.d;
  init_uniform_fan_in(params, prefix + "w1", 2 * d, d, seed);
  init_constant<Scalar>(params, prefix + "b1", 1, d, Scalar(0));
  init_uniform_fan_in(params, prefix + "w2", d, 1, seed);
  init_constant<Scalar>(params, prefix + "b2", 1, 1, Scalar(0));
}

// sigma^2 = softplus(raw) + eps as a differentiable 1x1 node.
template <class Scalar>
Var<Scalar> quantify(const Bound<Scalar>& p, Var<Scalar> belief, Var<Scalar> evidence,
                     const std::string& prefix = "uqn.") {
  if (belief.rows() != 1 || evidence.rows() != 1 || belief.cols() != evidence.cols()) {
    throw ShapeError("quantify: belief and evidence must be 1 x d");
  }
  Var<Scalar> joint = concat_cols(belief, evidence);
  Var<Scalar> hidden = tanh(add(matmul(joint, p(prefix + "w1")), p(prefix + "b1")));
  Var<Scalar> raw = add(matmul(hidden, p(prefix + "w2")), p(prefix + "b2"));
  return add_scalar(softplus(raw), Scalar(kVarianceFloor));
}

// argmin over variance scores; ties break to the lowest index.
inline int decide(const std::vector<double>& scores) {
  if (scores.size() < 2) throw ValueError("decide: need at least two hypotheses");
  int best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]) || scores[i] <= 0.0) {
      throw ValueError("decide: scores must be positive and finite");
    }
    if (scores[i] < scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace drn
