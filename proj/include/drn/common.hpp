#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace drn {

// All numeric state in the project lives in dense row-vector / matrix form:
// a d-vector is a 1 x d matrix, a set of n items is an n x d matrix, a scalar
// is 1 x 1. Everything is templated on the element scalar so the same model
// code runs in f32 (training) and f64 (gradient verification).
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime switch for NaN/Inf detection inside the numeric core. Defaults to
// on in debug builds, off in release; tests flip it explicitly.
inline bool& debug_checks_flag() {
#ifdef NDEBUG
  static bool enabled = false;
#else
  static bool enabled = true;
#endif
  return enabled;
}

inline bool debug_checks_enabled() { return debug_checks_flag(); }
inline void set_debug_checks(bool enabled) { debug_checks_flag() = enabled; }

template <class Scalar>
void check_finite(const Mat<Scalar>& m, const char* where) {
  if (!m.allFinite()) {
    throw ValueError(std::string("non-finite values produced by ") + where);
  }
}

template <class Scalar>
void maybe_check_finite(const Mat<Scalar>& m, const char* where) {
  if (debug_checks_enabled()) check_finite(m, where);
}

}  // namespace drn
