#pragma once

#include <vector>

#include "drn/config.hpp"
#include "drn/encoder.hpp"
#include "drn/params.hpp"
#include "drn/tape.hpp"

namespace drn {

// Per-hypothesis deliberation lane. The belief starts at the hypothesis
// vector; each step generates a query from the current belief, attends over
// the statement vectors, retrieves an evidence vector, and feeds it to a
// gated recurrent update. Lanes share parameters and context but never read
// each other's state.

// Belief over one hypothesis: centroid plus scalar variance. The variance is
// populated by the uncertainty head at the final step.
struct BeliefState {
  std::vector<double> centroid;
  double variance = 0.0;
};

// Value-level record of one lane, used by interpretability exports and the
// attention supervision loss. attentions/evidence have T entries, centroids
// T + 1 (step 0 is the hypothesis vector itself).
struct LaneTrace {
  std::vector<std::vector<double>> centroids;
  std::vector<std::vector<double>> attentions;
  std::vector<std::vector<double>> evidence;
};

using DeliberationTrace = std::vector<LaneTrace>;  // one LaneTrace per hypothesis

template <class Scalar>
void init_deliberation_params(ParamMap<Scalar>& params, const ModelConfig& m, std::uint64_t seed,
                              const std::string& prefix = "delib.") {
  const Index d = m.d;
  init_uniform_fan_in(params, prefix + "wq", d, d, seed);
  for (const char* gate : {"wz", "wr", "wh"}) {
    init_uniform_fan_in(params, prefix + "gru." + std::string(gate), 2 * d, d, seed);
  }
  for (const char* gate : {"bz", "br", "bh"}) {
    init_constant<Scalar>(params, prefix + "gru." + std::string(gate), 1, d, Scalar(0));
  }
}

// GRU-style update: gates over [evidence ; belief], candidate over
// [evidence ; reset * belief], new belief = b + z * (candidate - b).
template <class Scalar>
Var<Scalar> gated_update(const Bound<Scalar>& p, const std::string& prefix, Var<Scalar> evidence,
                         Var<Scalar> belief) {
  Var<Scalar> joint = concat_cols(evidence, belief);
  Var<Scalar> update = sigmoid(add(matmul(joint, p(prefix + "gru.wz")), p(prefix + "gru.bz")));
  Var<Scalar> reset = sigmoid(add(matmul(joint, p(prefix + "gru.wr")), p(prefix + "gru.br")));
  Var<Scalar> gated = concat_cols(evidence, hadamard(reset, belief));
  Var<Scalar> candidate = tanh(add(matmul(gated, p(prefix + "gru.wh")), p(prefix + "gru.bh")));
  return add(belief, hadamard(update, sub(candidate, belief)));
}

template <class Scalar>
struct LaneResult {
  Var<Scalar> belief;           // b_T, 1 x d
  Var<Scalar> evidence;         // e_T, 1 x d
  Var<Scalar> final_attention;  // a_T, 1 x n_statements
  LaneTrace trace;
};

namespace detail {

template <class Scalar>
std::vector<double> to_row_vector(const Mat<Scalar>& m) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = static_cast<double>(m(0, c));
  return out;
}

}  // namespace detail

template <class Scalar>
LaneResult<Scalar> deliberate(Tape<Scalar>& tape, const EncodedContext<Scalar>& context,
                              int hypothesis_index, const Bound<Scalar>& p, const ModelConfig& m,
                              const std::string& prefix = "delib.", bool record_trace = true) {
  if (m.T < 1) throw ValueError("deliberate: T must be at least 1");
  if (hypothesis_index < 0 || hypothesis_index >= context.hypotheses.rows()) {
    throw ValueError("deliberate: hypothesis index out of range");
  }
  const Scalar logit_scale =
      static_cast<Scalar>(m.attention_temperature / std::sqrt(static_cast<double>(m.d)));

  LaneResult<Scalar> lane;
  Var<Scalar> belief = row(context.hypotheses, hypothesis_index);
  if (record_trace) lane.trace.centroids.push_back(detail::to_row_vector(belief.value()));

  for (int t = 0; t < m.T; ++t) {
    Var<Scalar> query = matmul(belief, p(prefix + "wq"));
    Var<Scalar> attention = row_softmax(scale(matmul_nt(query, context.statements), logit_scale));
    Var<Scalar> evidence = matmul(attention, context.statements);
    belief = gated_update(p, prefix, evidence, belief);
    lane.evidence = evidence;
    lane.final_attention = attention;
    if (record_trace) {
      lane.trace.centroids.push_back(detail::to_row_vector(belief.value()));
      lane.trace.attentions.push_back(detail::to_row_vector(attention.value()));
      lane.trace.evidence.push_back(detail::to_row_vector(evidence.value()));
    }
  }
  lane.belief = belief;
  return lane;
}

}  // namespace drn
