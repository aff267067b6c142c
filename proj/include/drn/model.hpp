#pragma once

#include <string>
#include <vector>

#include "drn/decision.hpp"
#include "drn/deliberation.hpp"
#include "drn/encoder.hpp"
#include "drn/losses.hpp"
#include "drn/puzzle.hpp"

namespace drn {

// Model variants; rows of the ablation table plus the cross-entropy baseline.
enum class Variant { drn_full, drn_rank_only, drn_no_sep, drn_no_attn, baseline };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::drn_full: return "drn_full";
    case Variant::drn_rank_only: return "drn_rank_only";
    case Variant::drn_no_sep: return "drn_no_sep";
    case Variant::drn_no_attn: return "drn_no_attn";
    case Variant::baseline: return "baseline";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::drn_full, Variant::drn_rank_only, Variant::drn_no_sep,
                    Variant::drn_no_attn, Variant::baseline}) {
    if (name == variant_name(v)) return v;
  }
  throw ValueError("unknown model variant: " + name);
}

inline bool is_drn(Variant v) { return v != Variant::baseline; }

// Applies the ablation switches a variant implies.
inline LossConfig apply_variant(LossConfig cfg, Variant v) {
  switch (v) {
    case Variant::drn_full: break;
    case Variant::drn_rank_only:
      cfg.enable_sep = false;
      cfg.enable_attn = false;
      cfg.lambda_sep = 0.0;
      cfg.lambda_attn = 0.0;
      break;
    case Variant::drn_no_sep:
      cfg.enable_sep = false;
      cfg.lambda_sep = 0.0;
      break;
    case Variant::drn_no_attn:
      cfg.enable_attn = false;
      cfg.lambda_attn = 0.0;
      break;
    case Variant::baseline: break;
  }
  return cfg;
}

template <class Scalar>
ParamMap<Scalar> init_model_params(const ModelConfig& m, Variant variant, std::uint64_t seed) {
  validate(m);
  ParamMap<Scalar> params;
  init_encoder_params(params, m, seed);
  if (is_drn(variant)) {
    init_deliberation_params(params, m, seed);
    init_uqn_params(params, m, seed);
  } else {
    init_uniform_fan_in(params, "baseline.w", 2 * m.d, 1, seed);
    init_constant<Scalar>(params, "baseline.b", 1, 1, Scalar(0));
  }
  return params;
}

template <class Scalar>
struct DrnForward {
  std::vector<Var<Scalar>> sigma2;           // k positive 1x1 nodes
  std::vector<Var<Scalar>> centroids;        // k final beliefs, 1 x d
  std::vector<Var<Scalar>> final_attention;  // k rows over statements
  DeliberationTrace trace;

  std::vector<double> scores() const {
    std::vector<double> out;
    out.reserve(sigma2.size());
    for (const auto& s : sigma2) out.push_back(static_cast<double>(s.item()));
    return out;
  }

  int decision() const { return decide(scores()); }

  // Belief states with variance populated from the uncertainty head.
  std::vector<BeliefState> belief_states() const {
    std::vector<BeliefState> out;
    for (std::size_t i = 0; i < sigma2.size(); ++i) {
      BeliefState b;
      b.variance = static_cast<double>(sigma2[i].item());
      const Mat<Scalar>& mu = centroids[i].value();
      for (Index c = 0; c < mu.cols(); ++c) b.centroid.push_back(static_cast<double>(mu(0, c)));
      out.push_back(std::move(b));
    }
    return out;
  }
};

template <class Scalar>
DrnForward<Scalar> drn_forward(Tape<Scalar>& tape, const Bound<Scalar>& p, const ModelConfig& m,
                               const puzzles::Puzzle& puzzle, bool record_trace = false) {
  EncodedContext<Scalar> context = encode(tape, p, m, puzzle.statements, puzzle.hypotheses);
  DrnForward<Scalar> out;
  const int k = static_cast<int>(puzzle.hypotheses.size());
  for (int i = 0; i < k; ++i) {
    LaneResult<Scalar> lane = deliberate(tape, context, i, p, m, "delib.", record_trace);
    out.sigma2.push_back(quantify(p, lane.belief, lane.evidence));
    out.centroids.push_back(lane.belief);
    out.final_attention.push_back(lane.final_attention);
    if (record_trace) out.trace.push_back(std::move(lane.trace));
  }
  return out;
}

// Standard classifier head: mean of statement vectors joined with each
// hypothesis vector, one shared linear score. Shares the encoder architecture
// and budget with the DRN variants.
template <class Scalar>
Var<Scalar> baseline_logits(Tape<Scalar>& tape, const Bound<Scalar>& p, const ModelConfig& m,
                            const puzzles::Puzzle& puzzle) {
  EncodedContext<Scalar> context = encode(tape, p, m, puzzle.statements, puzzle.hypotheses);
  Var<Scalar> pooled = mean_rows(context.statements);
  Var<Scalar> logits;
  const int k = static_cast<int>(puzzle.hypotheses.size());
  for (int i = 0; i < k; ++i) {
    Var<Scalar> joint = concat_cols(pooled, row(context.hypotheses, i));
    Var<Scalar> logit = add(matmul(joint, p("baseline.w")), p("baseline.b"));
    logits = i == 0 ? logit : concat_cols(logits, logit);
  }
  return logits;  // 1 x k
}

template <class Scalar>
Var<Scalar> cross_entropy_loss(Tape<Scalar>& tape, Var<Scalar> logits, int gold_label) {
  if (gold_label < 0 || gold_label >= logits.cols()) {
    throw ValueError("cross_entropy_loss: gold label out of range");
  }
  Var<Scalar> log_probs = drn::log(row_softmax(logits));
  Mat<Scalar> pick = Mat<Scalar>::Zero(1, logits.cols());
  pick(0, gold_label) = Scalar(1);
  return scale(sum(hadamard(tape.constant(pick), log_probs)), Scalar(-1));
}

// argmax over baseline logits; ties break to the lowest index.
template <class Scalar>
int baseline_decision(Var<Scalar> logits) {
  int best = 0;
  for (Index c = 1; c < logits.cols(); ++c) {
    if (logits.value()(0, c) > logits.value()(0, best)) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace drn
