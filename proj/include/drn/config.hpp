#pragma once

#include <string>

#include "drn/common.hpp"

namespace drn {

// Architecture hyperparameters shared by the encoder, deliberation lanes and
// uncertainty head. k and vocab_size must match the corpus being consumed.
struct ModelConfig {
  int d = 32;               // embedding / belief dimension
  int n_blocks = 1;         // encoder self-attention blocks
  int n_heads = 1;
  int ffn_hidden = 128;
  int T = 3;                // deliberation steps
  int vocab_size = 64;
  int k = 2;                // hypotheses per puzzle
  bool positional_encodings = true;
  double attention_temperature = 1.0;  // fixed logit scale inside lanes
};

inline void validate(const ModelConfig& m) {
  if (m.d <= 0 || m.n_blocks <= 0 || m.n_heads <= 0 || m.ffn_hidden <= 0 || m.T < 1 ||
      m.vocab_size <= 0 || m.k < 2) {
    throw ValueError("model config: all sizes must be positive and k >= 2");
  }
  if (m.d % m.n_heads != 0) throw ValueError("model config: d must be divisible by n_heads");
  if (m.attention_temperature <= 0.0) {
    throw ValueError("model config: attention_temperature must be positive");
  }
}

}  // namespace drn
