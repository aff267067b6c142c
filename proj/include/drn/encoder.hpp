#pragma once

#include <string>
#include <vector>

#include "drn/config.hpp"
#include "drn/params.hpp"
#include "drn/puzzle.hpp"
#include "drn/tape.hpp"

namespace drn {

// Context and hypothesis encoder: token embeddings, sinusoidal positions, a
// small stack of self-attention blocks (pre-norm residual layout), mean
// pooling per statement, and a shared pooling projection. Hypotheses are
// encoded over their own tokens only; all evidence integration happens later
// in the deliberation lanes.

inline constexpr double kLayerNormEps = 1e-5;

template <class Scalar>
void init_encoder_params(ParamMap<Scalar>& params, const ModelConfig& m, std::uint64_t seed) {
  const Index d = m.d, h = m.ffn_hidden;
  init_uniform_fan_in(params, "encoder.embedding", m.vocab_size, d, seed);
  init_uniform_fan_in(params, "encoder.pool", d, d, seed);
  for (int b = 0; b < m.n_blocks; ++b) {
    const std::string p = "encoder.block" + std::to_string(b) + ".";
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      init_uniform_fan_in(params, p + w, d, d, seed);
    }
    init_constant<Scalar>(params, p + "ln1.gain", 1, d, Scalar(1));
    init_constant<Scalar>(params, p + "ln1.bias", 1, d, Scalar(0));
    init_constant<Scalar>(params, p + "ln2.gain", 1, d, Scalar(1));
    init_constant<Scalar>(params, p + "ln2.bias", 1, d, Scalar(0));
    init_uniform_fan_in(params, p + "ffn.w1", d, h, seed);
    init_constant<Scalar>(params, p + "ffn.b1", 1, h, Scalar(0));
    init_uniform_fan_in(params, p + "ffn.w2", h, d, seed);
    init_constant<Scalar>(params, p + "ffn.b2", 1, d, Scalar(0));
  }
}

template <class Scalar>
Mat<Scalar> sinusoidal_positions(Index n, Index d) {
  Mat<Scalar> pe(n, d);
  for (Index pos = 0; pos < n; ++pos) {
    for (Index i = 0; i < d; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(d));
      pe(pos, i) = static_cast<Scalar>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

// One pre-norm transformer block applied to a (len x d) sequence.
template <class Scalar>
Var<Scalar> encoder_block(Tape<Scalar>& tape, const Bound<Scalar>& p, const ModelConfig& m,
                          const std::string& prefix, Var<Scalar> x) {
  const Index head_dim = m.d / m.n_heads;
  Var<Scalar> normed = layer_norm_rows(x, p(prefix + "ln1.gain"), p(prefix + "ln1.bias"),
                                       Scalar(kLayerNormEps));
  Var<Scalar> q = matmul(normed, p(prefix + "attn.wq"));
  Var<Scalar> kk = matmul(normed, p(prefix + "attn.wk"));
  Var<Scalar> v = matmul(normed, p(prefix + "attn.wv"));
  Var<Scalar> attended;
  for (int h = 0; h < m.n_heads; ++h) {
    Var<Scalar> qh = m.n_heads == 1 ? q : cols(q, h * head_dim, head_dim);
    Var<Scalar> kh = m.n_heads == 1 ? kk : cols(kk, h * head_dim, head_dim);
    Var<Scalar> vh = m.n_heads == 1 ? v : cols(v, h * head_dim, head_dim);
    Var<Scalar> weights = row_softmax(
        scale(matmul_nt(qh, kh), Scalar(1.0 / std::sqrt(static_cast<double>(head_dim)))));
    Var<Scalar> oh = matmul(weights, vh);
    attended = h == 0 ? oh : concat_cols(attended, oh);
  }
  x = add(x, matmul(attended, p(prefix + "attn.wo")));
  Var<Scalar> normed2 = layer_norm_rows(x, p(prefix + "ln2.gain"), p(prefix + "ln2.bias"),
                                        Scalar(kLayerNormEps));
  Var<Scalar> hidden = relu(add_rowvec(matmul(normed2, p(prefix + "ffn.w1")), p(prefix + "ffn.b1")));
  Var<Scalar> ffn = add_rowvec(matmul(hidden, p(prefix + "ffn.w2")), p(prefix + "ffn.b2"));
  return add(x, ffn);
}

template <class Scalar>
Var<Scalar> encode_sequence(Tape<Scalar>& tape, const Bound<Scalar>& p, const ModelConfig& m,
                            const std::vector<int>& tokens) {
  std::vector<Index> ids;
  ids.reserve(tokens.size());
  for (int tok : tokens) {
    if (tok < 0 || tok >= m.vocab_size) {
      throw ValueError("token id " + std::to_string(tok) + " outside vocabulary of size " +
                       std::to_string(m.vocab_size));
    }
    ids.push_back(tok);
  }
  Var<Scalar> x = gather_rows(p("encoder.embedding"), ids);
  if (m.positional_encodings) {
    x = add(x, tape.constant(sinusoidal_positions<Scalar>(x.rows(), m.d)));
  }
  for (int b = 0; b < m.n_blocks; ++b) {
    x = encoder_block(tape, p, m, "encoder.block" + std::to_string(b) + ".", x);
  }
  return x;
}

template <class Scalar>
struct EncodedContext {
  Var<Scalar> statements;  // n_statements x d
  Var<Scalar> hypotheses;  // k x d
};

// Statements are encoded as one flat token sequence so attention can relate
// them, then mean-pooled per statement; each hypothesis is its own sequence.
template <class Scalar>
EncodedContext<Scalar> encode(Tape<Scalar>& tape, const Bound<Scalar>& p, const ModelConfig& m,
                              const std::vector<puzzles::Statement>& statements,
                              const std::vector<std::vector<int>>& hypotheses) {
  if (statements.empty()) throw ValueError("encode: puzzle has no statements");
  if (hypotheses.empty()) throw ValueError("encode: puzzle has no hypotheses");
  std::vector<int> flat;
  std::vector<Index> offsets{0};
  for (const puzzles::Statement& s : statements) {
    flat.insert(flat.end(), s.tokens.begin(), s.tokens.end());
    offsets.push_back(static_cast<Index>(flat.size()));
  }
  Var<Scalar> tokens = encode_sequence(tape, p, m, flat);
  Var<Scalar> pooled = segment_mean(tokens, offsets);
  EncodedContext<Scalar> out;
  out.statements = matmul(pooled, p("encoder.pool"));

  std::vector<Var<Scalar>> hyp_rows;
  hyp_rows.reserve(hypotheses.size());
  for (const std::vector<int>& hyp : hypotheses) {
    if (hyp.empty()) throw ValueError("encode: empty hypothesis token list");
    hyp_rows.push_back(mean_rows(encode_sequence(tape, p, m, hyp)));
  }
  out.hypotheses = matmul(vstack(hyp_rows), p("encoder.pool"));
  return out;
}

}  // namespace drn
