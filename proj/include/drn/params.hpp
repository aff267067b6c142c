#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "drn/rng.hpp"
#include "drn/tape.hpp"

namespace drn {

// Flat named parameter store. std::map keeps iteration order stable, which the
// optimizer, checkpointing, and determinism tests all rely on.
template <class Scalar>
using ParamMap = std::map<std::string, Mat<Scalar>>;

// Tape-bound view of a ParamMap for one forward pass. Trainable binds create
// differentiable leaves; frozen binds create constants.
template <class Scalar>
class Bound {
 public:
  Bound(Tape<Scalar>& tape, const ParamMap<Scalar>& params, bool trainable) {
    for (const auto& [name, value] : params) {
      vars_.emplace(name, trainable ? tape.input(value) : tape.constant(value));
    }
  }

  explicit Bound(std::map<std::string, Var<Scalar>> vars) : vars_(std::move(vars)) {}

  Var<Scalar> operator()(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ValueError("unknown parameter: " + name);
    return it->second;
  }

  const std::map<std::string, Var<Scalar>>& all() const { return vars_; }

 private:
  std::map<std::string, Var<Scalar>> vars_;
};

inline std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Uniform fan-in init: U(-1/sqrt(rows), +1/sqrt(rows)). Each parameter draws
// from a stream derived from (seed, name), so the init is independent of
// insertion order.
template <class Scalar>
void init_uniform_fan_in(ParamMap<Scalar>& params, const std::string& name, Index rows, Index cols,
                         std::uint64_t seed) {
  Rng rng = Rng::derived(seed, name_stream(name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Mat<Scalar> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  params[name] = std::move(m);
}

template <class Scalar>
void init_constant(ParamMap<Scalar>& params, const std::string& name, Index rows, Index cols,
                   Scalar value) {
  params[name] = Mat<Scalar>::Constant(rows, cols, value);
}

template <class Scalar>
ParamMap<Scalar> cast_params(const ParamMap<double>& params) {
  ParamMap<Scalar> out;
  for (const auto& [name, value] : params) out[name] = value.template cast<Scalar>();
  return out;
}

}  // namespace drn
