#pragma once

#include <cmath>
#include <vector>

#include "drn/tape.hpp"

namespace drn {

// Composite training objective: an uncertainty ranking loss over per-lane
// variances, a hinge on the distance between the gold and opposing belief
// centroids, and cross-entropy between the gold lane's final attention row
// and the annotated evidence mask.

struct LossConfig {
  double lambda_rank = 1.0;
  double lambda_sep = 0.1;
  double lambda_attn = 0.1;
  double margin_uncertainty = 1.0;  // m_u
  double margin_separation = 1.0;   // m_s
  // Ablation switches; a disabled term contributes exactly zero and is not
  // built on the tape.
  bool enable_rank = true;
  bool enable_sep = true;
  bool enable_attn = true;

  bool rank_active() const { return enable_rank && lambda_rank > 0.0; }
  bool sep_active() const { return enable_sep && lambda_sep > 0.0; }
  bool attn_active() const { return enable_attn && lambda_attn > 0.0; }
};

inline void validate(const LossConfig& c) {
  if (c.lambda_rank < 0.0 || c.lambda_sep < 0.0 || c.lambda_attn < 0.0) {
    throw ValueError("loss config: lambdas must be non-negative");
  }
  if (c.margin_uncertainty <= 0.0 || c.margin_separation <= 0.0) {
    throw ValueError("loss config: margins must be positive");
  }
}

struct LossBreakdown {
  double rank = 0.0;
  double sep = 0.0;
  double attn = 0.0;
  double total = 0.0;
};

// sigma2_true + sum over false j of max(0, m_u - sigma2_j).
template <class Scalar>
Var<Scalar> rank_loss(const std::vector<Var<Scalar>>& sigma2, int gold_label, double m_u) {
  if (gold_label < 0 || gold_label >= static_cast<int>(sigma2.size())) {
    throw ValueError("rank_loss: gold label out of range");
  }
  Var<Scalar> loss = sigma2[static_cast<std::size_t>(gold_label)];
  for (std::size_t j = 0; j < sigma2.size(); ++j) {
    if (static_cast<int>(j) == gold_label) continue;
    Var<Scalar> hinge = relu(add_scalar(scale(sigma2[j], Scalar(-1)), static_cast<Scalar>(m_u)));
    loss = add(loss, hinge);
  }
  return loss;
}

// mean over false j of max(0, m_s - ||mu_true - mu_j||).
template <class Scalar>
Var<Scalar> sep_loss(const std::vector<Var<Scalar>>& centroids, int gold_label, double m_s) {
  const int k = static_cast<int>(centroids.size());
  if (k < 2) throw ValueError("sep_loss: need at least two centroids");
  if (gold_label < 0 || gold_label >= k) throw ValueError("sep_loss: gold label out of range");
  Var<Scalar> acc;
  bool first = true;
  for (int j = 0; j < k; ++j) {
    if (j == gold_label) continue;
    Var<Scalar> diff = sub(centroids[static_cast<std::size_t>(gold_label)],
                           centroids[static_cast<std::size_t>(j)]);
    Var<Scalar> dist = drn::sqrt(sum(hadamard(diff, diff)));
    Var<Scalar> hinge = relu(add_scalar(scale(dist, Scalar(-1)), static_cast<Scalar>(m_s)));
    acc = first ? hinge : add(acc, hinge);
    first = false;
  }
  return scale(acc, Scalar(1.0 / (k - 1)));
}

// -sum_s mask_s * log a_s against the gold lane's final attention row.
template <class Scalar>
Var<Scalar> attn_loss(Var<Scalar> final_attention, const std::vector<double>& mask) {
  if (final_attention.rows() != 1 ||
      final_attention.cols() != static_cast<Index>(mask.size())) {
    throw ShapeError("attn_loss: attention / mask length mismatch");
  }
  double mass = 0.0;
  for (double m : mask) mass += m;
  if (std::abs(mass - 1.0) > 1e-9) throw ValueError("attn_loss: mask must sum to 1");
  Tape<Scalar>& tape = *final_attention.tape;
  Mat<Scalar> mask_row(1, final_attention.cols());
  for (Index c = 0; c < mask_row.cols(); ++c) {
    mask_row(0, c) = static_cast<Scalar>(mask[static_cast<std::size_t>(c)]);
  }
  Var<Scalar> weighted = hadamard(tape.constant(mask_row), drn::log(final_attention));
  return scale(sum(weighted), Scalar(-1));
}

template <class Scalar>
struct TotalLoss {
  Var<Scalar> value;  // lambda-weighted sum of the active terms
  LossBreakdown breakdown;
};

template <class Scalar>
TotalLoss<Scalar> total_loss(Tape<Scalar>& tape, const LossConfig& cfg,
                             const std::vector<Var<Scalar>>& sigma2,
                             const std::vector<Var<Scalar>>& centroids,
                             Var<Scalar> gold_final_attention, const std::vector<double>& mask,
                             int gold_label) {
  validate(cfg);
  TotalLoss<Scalar> out;
  Var<Scalar> acc = tape.scalar_constant(Scalar(0));
  if (cfg.rank_active()) {
    Var<Scalar> term = rank_loss(sigma2, gold_label, cfg.margin_uncertainty);
    out.breakdown.rank = static_cast<double>(term.item());
    acc = add(acc, scale(term, static_cast<Scalar>(cfg.lambda_rank)));
  }
  if (cfg.sep_active()) {
    Var<Scalar> term = sep_loss(centroids, gold_label, cfg.margin_separation);
    out.breakdown.sep = static_cast<double>(term.item());
    acc = add(acc, scale(term, static_cast<Scalar>(cfg.lambda_sep)));
  }
  if (cfg.attn_active()) {
    Var<Scalar> term = attn_loss(gold_final_attention, mask);
    out.breakdown.attn = static_cast<double>(term.item());
    acc = add(acc, scale(term, static_cast<Scalar>(cfg.lambda_attn)));
  }
  out.value = acc;
  // Reported total is recomposed in double so the breakdown identity holds
  // exactly regardless of the tape scalar type.
  out.breakdown.total = cfg.lambda_rank * out.breakdown.rank + cfg.lambda_sep * out.breakdown.sep +
                        cfg.lambda_attn * out.breakdown.attn;
  return out;
}

}  // namespace drn
