#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "drn/model.hpp"
#include "drn/puzzle.hpp"

namespace drn {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int steps = 3000;
  int eval_every = 200;
};

// Corpus recipe attached to an experiment: the training distribution, the
// held-out evaluation distribution, and the validation carve-out.
struct DataConfig {
  std::uint64_t data_seed = 7;
  int n_train = 2000;
  int n_test = 500;
  double rho_train = 0.7;
  double rho_test = 0.0;
  double val_fraction = 0.1;
  int n_association = 3;
  int n_distractor = 2;
};

// Single source of determinism for a run: every random choice descends from
// (seed, fixed stream tags).
struct ExperimentConfig {
  std::uint64_t seed = 42;
  Variant variant = Variant::drn_full;
  ModelConfig model;
  DataConfig data;
  LossConfig loss;
  OptimizerConfig optimizer;
};

inline void validate(const OptimizerConfig& o) {
  if (o.learning_rate <= 0.0 || o.batch_size <= 0 || o.steps < 0 || o.eval_every <= 0 ||
      o.beta1 < 0.0 || o.beta1 >= 1.0 || o.beta2 < 0.0 || o.beta2 >= 1.0 || o.epsilon <= 0.0) {
    throw ValueError("optimizer config: invalid settings");
  }
}

inline void validate(const DataConfig& d) {
  if (d.n_train <= 0 || d.n_test <= 0) throw ValueError("data config: corpus sizes must be positive");
  if (d.rho_train < 0.0 || d.rho_train > 1.0) {
    throw ValueError("data config: rho_train must lie in [0, 1]");
  }
  if (d.rho_test < 0.0 || d.rho_test > 1.0) throw ValueError("data config: rho_test must lie in [0, 1]");
  if (d.val_fraction < 0.0 || d.val_fraction >= 1.0) {
    throw ValueError("data config: val_fraction must lie in [0, 1)");
  }
  if (d.n_association <= 0 || d.n_distractor < 0) {
    throw ValueError("data config: statement counts invalid");
  }
}

inline void validate(const ExperimentConfig& c) {
  validate(c.model);
  validate(c.loss);
  validate(c.optimizer);
  validate(c.data);
  if (is_drn(c.variant) && !apply_variant(c.loss, c.variant).rank_active()) {
    throw ValueError("experiment config: DRN variants require an active ranking loss");
  }
}

inline puzzles::GeneratorConfig generator_config(const ExperimentConfig& c, bool train_split) {
  puzzles::GeneratorConfig g;
  g.seed = train_split ? c.data.data_seed : mix_seed(c.data.data_seed, 0x7e57);
  g.n_puzzles = train_split ? c.data.n_train : c.data.n_test;
  g.vocab_size = c.model.vocab_size;
  g.n_association = c.data.n_association;
  g.n_distractor = c.data.n_distractor;
  g.agreement_rate = train_split ? c.data.rho_train : c.data.rho_test;
  g.k = c.model.k;
  return g;
}

struct CurvePoint {
  int step = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_accuracy_trap = 0.0;
};

struct Metrics {
  int n = 0;
  int n_trap = 0;
  int n_nontrap = 0;
  double accuracy = 0.0;
  double accuracy_trap = 0.0;     // 0 when the split is empty
  double accuracy_nontrap = 0.0;  // 0 when the split is empty
  std::optional<double> mean_sigma2_chosen;    // DRN variants only
  std::optional<double> mean_sigma2_rejected;  // DRN variants only
  std::vector<CurvePoint> curve;
};

template <class Scalar>
struct Checkpoint {
  ExperimentConfig config;
  std::int64_t step = 0;
  ParamMap<Scalar> params;
};

namespace detail {

inline void check_corpus(const ExperimentConfig& config,
                         const std::vector<puzzles::Puzzle>& corpus) {
  if (corpus.empty()) throw ValueError("corpus is empty");
  for (const puzzles::Puzzle& p : corpus) {
    if (static_cast<int>(p.hypotheses.size()) != config.model.k) {
      throw ValueError("corpus/config mismatch: puzzle " + std::to_string(p.id) + " has " +
                       std::to_string(p.hypotheses.size()) + " hypotheses, config k=" +
                       std::to_string(config.model.k));
    }
    for (const puzzles::Statement& s : p.statements) {
      for (int tok : s.tokens) {
        if (tok < 0 || tok >= config.model.vocab_size) {
          throw ValueError("corpus/config mismatch: token " + std::to_string(tok) +
                           " outside vocab of size " + std::to_string(config.model.vocab_size));
        }
      }
    }
  }
}

// Per-example loss and prediction for whichever variant is configured.
template <class Scalar>
Var<Scalar> example_loss(Tape<Scalar>& tape, const Bound<Scalar>& bound,
                         const ExperimentConfig& config, const puzzles::Puzzle& puzzle,
                         int* prediction_out = nullptr) {
  if (config.variant == Variant::baseline) {
    Var<Scalar> logits = baseline_logits(tape, bound, config.model, puzzle);
    if (prediction_out) *prediction_out = baseline_decision(logits);
    return cross_entropy_loss(tape, logits, puzzle.gold_label);
  }
  auto fwd = drn_forward(tape, bound, config.model, puzzle, false);
  if (prediction_out) *prediction_out = fwd.decision();
  const LossConfig lc = apply_variant(config.loss, config.variant);
  auto total = total_loss(tape, lc, fwd.sigma2, fwd.centroids,
                          fwd.final_attention[static_cast<std::size_t>(puzzle.gold_label)],
                          puzzle.gold_evidence_mask, puzzle.gold_label);
  return total.value;
}

}  // namespace detail

// Pure evaluation pass; decisions via argmin variance for DRN variants and
// argmax logit for the baseline.
template <class Scalar>
Metrics evaluate(const ParamMap<Scalar>& params, const ExperimentConfig& config,
                 const std::vector<puzzles::Puzzle>& corpus) {
  detail::check_corpus(config, corpus);
  Metrics m;
  double sigma_chosen = 0.0, sigma_rejected = 0.0;
  std::int64_t n_rejected = 0;
  int correct = 0, correct_trap = 0, correct_nontrap = 0;
  for (const puzzles::Puzzle& p : corpus) {
    Tape<Scalar> tape;
    Bound<Scalar> bound(tape, params, false);
    int prediction = 0;
    if (config.variant == Variant::baseline) {
      prediction = baseline_decision(baseline_logits(tape, bound, config.model, p));
    } else {
      auto fwd = drn_forward(tape, bound, config.model, p, false);
      prediction = fwd.decision();
      const auto scores = fwd.scores();
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (static_cast<int>(i) == prediction) {
          sigma_chosen += scores[i];
        } else {
          sigma_rejected += scores[i];
          ++n_rejected;
        }
      }
    }
    const bool hit = prediction == p.gold_label;
    ++m.n;
    correct += hit;
    if (p.is_trap) {
      ++m.n_trap;
      correct_trap += hit;
    } else {
      ++m.n_nontrap;
      correct_nontrap += hit;
    }
  }
  m.accuracy = static_cast<double>(correct) / m.n;
  m.accuracy_trap = m.n_trap ? static_cast<double>(correct_trap) / m.n_trap : 0.0;
  m.accuracy_nontrap = m.n_nontrap ? static_cast<double>(correct_nontrap) / m.n_nontrap : 0.0;
  if (config.variant != Variant::baseline) {
    m.mean_sigma2_chosen = sigma_chosen / m.n;
    m.mean_sigma2_rejected = n_rejected ? sigma_rejected / static_cast<double>(n_rejected) : 0.0;
  }
  return m;
}

// Adam with bias correction; state kept per named parameter.
template <class Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(const ParamMap<Scalar>& params, OptimizerConfig config) : config_(config) {
    for (const auto& [name, value] : params) {
      m_[name] = Mat<Scalar>::Zero(value.rows(), value.cols());
      v_[name] = Mat<Scalar>::Zero(value.rows(), value.cols());
    }
  }

  void step(ParamMap<Scalar>& params, const ParamMap<Scalar>& grads) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar lr = static_cast<Scalar>(config_.learning_rate);
    const Scalar eps = static_cast<Scalar>(config_.epsilon);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, t_));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, t_));
    for (auto& [name, value] : params) {
      const Mat<Scalar>& g = grads.at(name);
      Mat<Scalar>& m = m_[name];
      Mat<Scalar>& v = v_[name];
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      value -= lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    }
  }

 private:
  OptimizerConfig config_;
  ParamMap<Scalar> m_, v_;
  int t_ = 0;
};

template <class Scalar>
struct TrainResult {
  Checkpoint<Scalar> checkpoint;  // best validation trap-split accuracy
  Metrics validation;             // metrics of the returned checkpoint
};

// Deterministic mini-batch training. Gradients accumulate example by example
// on a per-example tape; nothing about the reduction order depends on the
// platform. Throws DivergenceError on a non-finite loss.
template <class Scalar>
TrainResult<Scalar> train(const ExperimentConfig& config,
                          const std::vector<puzzles::Puzzle>& corpus) {
  validate(config);
  detail::check_corpus(config, corpus);

  auto [train_set, val_set, unused] =
      puzzles::split(corpus, {1.0 - config.data.val_fraction, config.data.val_fraction, 0.0},
                     mix_seed(config.seed, 0x5b17));
  if (train_set.empty()) throw ValueError("train split is empty");
  const std::vector<puzzles::Puzzle>& val = val_set.empty() ? train_set : val_set;

  ParamMap<Scalar> params = init_model_params<Scalar>(config.model, config.variant, config.seed);
  AdamOptimizer<Scalar> opt(params, config.optimizer);
  Rng shuffle_rng = Rng::derived(config.seed, 0xba7c4);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;

  auto val_score = [&](const Metrics& m) {
    // model selection tracks the phenomenon under test: trap-split accuracy,
    // overall accuracy as tie-break
    return (m.n_trap > 0 ? m.accuracy_trap : m.accuracy) + 1e-9 * m.accuracy;
  };

  TrainResult<Scalar> result;
  result.checkpoint.config = config;
  result.checkpoint.params = params;
  result.checkpoint.step = 0;
  double best = -1.0;
  Metrics current;

  for (int step = 1; step <= config.optimizer.steps; ++step) {
    ParamMap<Scalar> grads;
    for (const auto& [name, value] : params) {
      grads[name] = Mat<Scalar>::Zero(value.rows(), value.cols());
    }
    double batch_loss = 0.0;
    for (int b = 0; b < config.optimizer.batch_size; ++b) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const puzzles::Puzzle& puzzle = train_set[order[cursor++]];
      Tape<Scalar> tape;
      Bound<Scalar> bound(tape, params, true);
      Var<Scalar> loss = detail::example_loss(tape, bound, config, puzzle);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step));
      }
      batch_loss += value;
      tape.backward(loss);
      for (const auto& [name, var] : bound.all()) grads[name] += var.grad();
    }
    batch_loss /= config.optimizer.batch_size;
    for (auto& [name, g] : grads) g /= static_cast<Scalar>(config.optimizer.batch_size);
    opt.step(params, grads);

    if (step % config.optimizer.eval_every == 0 || step == config.optimizer.steps) {
      Metrics vm = evaluate(params, config, val);
      CurvePoint pt;
      pt.step = step;
      pt.train_loss = batch_loss;
      pt.val_accuracy = vm.accuracy;
      pt.val_accuracy_trap = vm.accuracy_trap;
      current.curve.push_back(pt);
      if (val_score(vm) > best) {
        best = val_score(vm);
        result.checkpoint.params = params;
        result.checkpoint.step = step;
        result.validation = vm;
      }
    }
  }

  if (config.optimizer.steps == 0) result.validation = evaluate(params, config, val);
  result.validation.curve = current.curve;
  return result;
}

// One ablation row: a variant with per-seed trap accuracies on the same data.
struct AblationRow {
  std::string variant;
  std::vector<double> trap_accuracy;
  std::vector<double> overall_accuracy;
  double mean_trap = 0.0;
  double std_trap = 0.0;
};

inline const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> variants = {Variant::drn_full, Variant::drn_no_sep,
                                                Variant::drn_no_attn, Variant::drn_rank_only,
                                                Variant::baseline};
  return variants;
}

// Runs every variant on identical data and seeds.
template <class Scalar>
std::vector<AblationRow> ablate(const ExperimentConfig& base,
                                const std::vector<puzzles::Puzzle>& train_corpus,
                                const std::vector<puzzles::Puzzle>& test_corpus,
                                const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (Variant variant : ablation_variants()) {
    AblationRow row;
    row.variant = variant_name(variant);
    for (std::uint64_t seed : seeds) {
      ExperimentConfig config = base;
      config.variant = variant;
      config.seed = seed;
      auto trained = train<Scalar>(config, train_corpus);
      Metrics tm = evaluate(trained.checkpoint.params, config, test_corpus);
      row.trap_accuracy.push_back(tm.accuracy_trap);
      row.overall_accuracy.push_back(tm.accuracy);
    }
    const double n = static_cast<double>(row.trap_accuracy.size());
    row.mean_trap = std::accumulate(row.trap_accuracy.begin(), row.trap_accuracy.end(), 0.0) / n;
    double sq = 0.0;
    for (double a : row.trap_accuracy) sq += (a - row.mean_trap) * (a - row.mean_trap);
    row.std_trap = n > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace drn
