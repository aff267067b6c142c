#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "drn/common.hpp"

namespace drn {

// Reverse-mode automatic differentiation on a linear tape.
//
// Every operation appends one node holding its value and a pull-back closure;
// node creation order is a topological order, so the backward pass is a single
// reverse sweep. Handles (Var) are cheap {tape, id} pairs; values are
// immutable once recorded. The tape is single-threaded by contract.
template <class Scalar>
class Tape;

template <class Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Mat<Scalar>& value() const { return tape->value(id); }
  const Mat<Scalar>& grad() const { return tape->grad(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  // Scalar payload of a 1x1 node.
  Scalar item() const { return value()(0, 0); }
};

template <class Scalar>
class Tape {
 public:
  using V = Var<Scalar>;
  using M = Mat<Scalar>;

  // Differentiable leaf (parameter or tracked input).
  V input(M value) { return push(std::move(value), true, {}, "input"); }

  // Non-differentiable leaf.
  V constant(M value) { return push(std::move(value), false, {}, "constant"); }

  V scalar_input(Scalar v) {
    M m(1, 1);
    m(0, 0) = v;
    return input(std::move(m));
  }

  V scalar_constant(Scalar v) {
    M m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  const M& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  const M& grad(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
      zero_.setZero(n.value.rows(), n.value.cols());
      return zero_;
    }
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Seeds the (1x1) output with gradient 1 and sweeps the tape in reverse.
  // After the sweep every differentiable leaf holds dOutput/dLeaf.
  void backward(V output) {
    const Node& out = nodes_[static_cast<std::size_t>(output.id)];
    if (out.value.rows() != 1 || out.value.cols() != 1) {
      throw ShapeError("backward requires a scalar (1x1) output node");
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    accumulate(output.id, M::Ones(1, 1));
    for (int id = output.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || n.grad.size() == 0 || !n.pull) continue;
      n.pull(*this, n.grad);
    }
  }

  void accumulate(int id, const M& delta) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  using Pull = std::function<void(Tape&, const M&)>;

  V push(M value, bool requires_grad, Pull pull, const char* what) {
    maybe_check_finite(value, what);
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return V{this, static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    M value;
    M grad;  // empty until touched by a backward sweep
    bool requires_grad = false;
    Pull pull;
  };

  std::vector<Node> nodes_;
  mutable M zero_;
};

namespace detail {

template <class Scalar>
void same_tape(Var<Scalar> a, Var<Scalar> b) {
  if (a.tape != b.tape) throw ValueError("operands belong to different tapes");
}

template <class Scalar>
bool any_grad(std::initializer_list<Var<Scalar>> vs) {
  for (Var<Scalar> v : vs) {
    if (v.tape->requires_grad(v.id)) return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural operations. Each returns a new node; pull-backs
// capture ids only and read values through the tape, so that node storage may
// reallocate safely.
// ---------------------------------------------------------------------------

template <class Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shape mismatch");
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  };
  return t.push(a.value() + b.value(), detail::any_grad({a, b}), std::move(pull), "add");
}

template <class Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("sub: shape mismatch");
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, (-g).eval());
  };
  return t.push(a.value() - b.value(), detail::any_grad({a, b}), std::move(pull), "sub");
}

template <class Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("hadamard: shape mismatch");
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  };
  return t.push(a.value().cwiseProduct(b.value()), detail::any_grad({a, b}), std::move(pull),
                "hadamard");
}

// Standard matrix product a (n x m) * b (m x p).
template <class Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner extents disagree (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g * t.value(ib).transpose());
    t.accumulate(ib, t.value(ia).transpose() * g);
  };
  return t.push(a.value() * b.value(), detail::any_grad({a, b}), std::move(pull), "matmul");
}

// a (n x d) * b (m x d)^T without materializing the transpose.
template <class Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner extents disagree");
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g * t.value(ib));
    t.accumulate(ib, g.transpose() * t.value(ia));
  };
  return t.push(a.value() * b.value().transpose(), detail::any_grad({a, b}), std::move(pull),
                "matmul_nt");
}

template <class Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g.transpose());
  };
  return t.push(a.value().transpose(), detail::any_grad({a}), std::move(pull), "transpose");
}

template <class Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, c](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, (g * c).eval());
  };
  return t.push(a.value() * c, detail::any_grad({a}), std::move(pull), "scale");
}

template <class Scalar>
Var<Scalar> add_scalar(Var<Scalar> a, Scalar c) {
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
  };
  return t.push((a.value().array() + c).matrix(), detail::any_grad({a}), std::move(pull),
                "add_scalar");
}

// Row-wise softmax with max subtraction.
template <class Scalar>
Var<Scalar> row_softmax(Var<Scalar> a) {
  if (a.cols() == 0) throw ShapeError("row_softmax: empty axis");
  Mat<Scalar> y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const Scalar m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  Tape<Scalar>& t = *a.tape;
  int out_id = static_cast<int>(t.size());
  typename Tape<Scalar>::Pull pull = [ia = a.id, out_id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& y = t.value(out_id);
    Mat<Scalar> gx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = g.row(r).cwiseProduct(y.row(r)).sum();
      gx.row(r) = y.row(r).cwiseProduct(g.row(r).array().matrix() -
                                        Mat<Scalar>::Constant(1, y.cols(), dot));
    }
    t.accumulate(ia, gx);
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "row_softmax");
}

// ln(1 + exp(x)), overflow-safe in both tails.
template <class Scalar>
Var<Scalar> softplus(Var<Scalar> a) {
  Mat<Scalar> y = a.value().unaryExpr([](Scalar x) {
    if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
    return Scalar(std::log1p(std::exp(x)));
  });
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Mat<Scalar> s = t.value(ia).unaryExpr([](Scalar x) {
      return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                            : std::exp(x) / (Scalar(1) + std::exp(x));
    });
    t.accumulate(ia, g.cwiseProduct(s));
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "softplus");
}

template <class Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Mat<Scalar> y = a.value().array().tanh().matrix();
  Tape<Scalar>& t = *a.tape;
  int out_id = static_cast<int>(t.size());
  typename Tape<Scalar>::Pull pull = [ia = a.id, out_id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& y = t.value(out_id);
    t.accumulate(ia, g.cwiseProduct((Scalar(1) - y.array().square()).matrix()));
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "tanh");
}

template <class Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Mat<Scalar> y = a.value().unaryExpr([](Scalar x) {
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                          : std::exp(x) / (Scalar(1) + std::exp(x));
  });
  Tape<Scalar>& t = *a.tape;
  int out_id = static_cast<int>(t.size());
  typename Tape<Scalar>::Pull pull = [ia = a.id, out_id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& y = t.value(out_id);
    t.accumulate(ia, g.cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix())));
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "sigmoid");
}

// max(0, x); subgradient 0 at the kink.
template <class Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Mat<Scalar> y = a.value().cwiseMax(Scalar(0));
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Mat<Scalar> mask = (t.value(ia).array() > Scalar(0)).template cast<Scalar>().matrix();
    t.accumulate(ia, g.cwiseProduct(mask));
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "relu");
}

// Natural log; inputs must be strictly positive.
template <class Scalar>
Var<Scalar> log(Var<Scalar> a) {
  if ((a.value().array() <= Scalar(0)).any()) throw ValueError("log: non-positive input");
  Mat<Scalar> y = a.value().array().log().matrix();
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g.cwiseQuotient(t.value(ia)));
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "log");
}

// Elementwise square root with subgradient 0 at x = 0 (the value itself stays
// exact; only the pull-back is regularized at the origin).
template <class Scalar>
Var<Scalar> sqrt(Var<Scalar> a) {
  if ((a.value().array() < Scalar(0)).any()) throw ValueError("sqrt: negative input");
  Mat<Scalar> y = a.value().array().sqrt().matrix();
  Tape<Scalar>& t = *a.tape;
  int out_id = static_cast<int>(t.size());
  typename Tape<Scalar>::Pull pull = [ia = a.id, out_id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& y = t.value(out_id);
    Mat<Scalar> gx = y.binaryExpr(g, [](Scalar yv, Scalar gv) {
      return yv > Scalar(0) ? gv / (Scalar(2) * yv) : Scalar(0);
    });
    t.accumulate(ia, gx);
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "sqrt");
}

// Sum of all elements -> 1x1.
template <class Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Mat<Scalar> y(1, 1);
  y(0, 0) = a.value().sum();
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& v = t.value(ia);
    t.accumulate(ia, Mat<Scalar>::Constant(v.rows(), v.cols(), g(0, 0)));
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "sum");
}

// Column-wise mean over rows: (n x d) -> (1 x d).
template <class Scalar>
Var<Scalar> mean_rows(Var<Scalar> a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: empty input");
  Mat<Scalar> y = a.value().colwise().mean();
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& v = t.value(ia);
    Mat<Scalar> gx = (Mat<Scalar>::Ones(v.rows(), 1) * g) / static_cast<Scalar>(v.rows());
    t.accumulate(ia, gx);
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "mean_rows");
}

// Mean-pool contiguous row segments: rows [offsets[s], offsets[s+1]) of the
// input average into output row s. offsets has n_segments + 1 entries.
template <class Scalar>
Var<Scalar> segment_mean(Var<Scalar> a, std::vector<Index> offsets) {
  const Index n_seg = static_cast<Index>(offsets.size()) - 1;
  if (n_seg < 1 || offsets.front() != 0 || offsets.back() != a.rows()) {
    throw ShapeError("segment_mean: offsets must cover all rows");
  }
  Mat<Scalar> y(n_seg, a.cols());
  for (Index s = 0; s < n_seg; ++s) {
    const Index beg = offsets[static_cast<std::size_t>(s)];
    const Index len = offsets[static_cast<std::size_t>(s) + 1] - beg;
    if (len <= 0) throw ShapeError("segment_mean: empty segment");
    y.row(s) = a.value().middleRows(beg, len).colwise().mean();
  }
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, offsets](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& v = t.value(ia);
    Mat<Scalar> gx = Mat<Scalar>::Zero(v.rows(), v.cols());
    for (Index s = 0; s + 1 < static_cast<Index>(offsets.size()); ++s) {
      const Index beg = offsets[static_cast<std::size_t>(s)];
      const Index len = offsets[static_cast<std::size_t>(s) + 1] - beg;
      gx.middleRows(beg, len).rowwise() +=
          (g.row(s) / static_cast<Scalar>(len)).eval().row(0);
    }
    t.accumulate(ia, gx);
  };
  return t.push(std::move(y), detail::any_grad({a}), std::move(pull), "segment_mean");
}

// Horizontal concatenation of matrices with equal row counts.
template <class Scalar>
Var<Scalar> concat_cols(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows()) throw ShapeError("concat_cols: row mismatch");
  Mat<Scalar> y(a.rows(), a.cols() + b.cols());
  y.leftCols(a.cols()) = a.value();
  y.rightCols(b.cols()) = b.value();
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id, ca = a.cols(),
                                      cb = b.cols()](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g.leftCols(ca).eval());
    t.accumulate(ib, g.rightCols(cb).eval());
  };
  return t.push(std::move(y), detail::any_grad({a, b}), std::move(pull), "concat_cols");
}

// Single row extraction: (n x d) -> (1 x d).
template <class Scalar>
Var<Scalar> row(Var<Scalar> a, Index i) {
  if (i < 0 || i >= a.rows()) throw ShapeError("row: index out of range");
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, i](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& v = t.value(ia);
    Mat<Scalar> gx = Mat<Scalar>::Zero(v.rows(), v.cols());
    gx.row(i) = g;
    t.accumulate(ia, gx);
  };
  return t.push(a.value().row(i), detail::any_grad({a}), std::move(pull), "row");
}

// Column block: (n x d) -> (n x len).
template <class Scalar>
Var<Scalar> cols(Var<Scalar> a, Index start, Index len) {
  if (start < 0 || len <= 0 || start + len > a.cols()) throw ShapeError("cols: range out of bounds");
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, start, len](Tape<Scalar>& t,
                                                             const Mat<Scalar>& g) {
    const Mat<Scalar>& v = t.value(ia);
    Mat<Scalar> gx = Mat<Scalar>::Zero(v.rows(), v.cols());
    gx.middleCols(start, len) = g;
    t.accumulate(ia, gx);
  };
  return t.push(a.value().middleCols(start, len), detail::any_grad({a}), std::move(pull), "cols");
}

// Row gather by index (embedding lookup). Duplicate ids accumulate gradient.
template <class Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::vector<Index> ids) {
  for (Index i : ids) {
    if (i < 0 || i >= table.rows()) {
      throw ValueError("gather_rows: id " + std::to_string(i) + " out of range [0, " +
                       std::to_string(table.rows()) + ")");
    }
  }
  Mat<Scalar> y(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t j = 0; j < ids.size(); ++j) y.row(static_cast<Index>(j)) = table.value().row(ids[j]);
  Tape<Scalar>& t = *table.tape;
  typename Tape<Scalar>::Pull pull = [it = table.id, ids](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& v = t.value(it);
    Mat<Scalar> gx = Mat<Scalar>::Zero(v.rows(), v.cols());
    for (std::size_t j = 0; j < ids.size(); ++j) gx.row(ids[j]) += g.row(static_cast<Index>(j));
    t.accumulate(it, gx);
  };
  return t.push(std::move(y), detail::any_grad({table}), std::move(pull), "gather_rows");
}

// (n x d) + broadcast (1 x d) row vector.
template <class Scalar>
Var<Scalar> add_rowvec(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (b.rows() != 1 || a.cols() != b.cols()) throw ShapeError("add_rowvec: shape mismatch");
  Mat<Scalar> y = a.value();
  y.rowwise() += b.value().row(0);
  Tape<Scalar>& t = *a.tape;
  typename Tape<Scalar>::Pull pull = [ia = a.id, ib = b.id](Tape<Scalar>& t, const Mat<Scalar>& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g.colwise().sum().eval());
  };
  return t.push(std::move(y), detail::any_grad({a, b}), std::move(pull), "add_rowvec");
}

// Vertical stack of equal-width blocks.
template <class Scalar>
Var<Scalar> vstack(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("vstack: no parts");
  Tape<Scalar>& t = *parts.front().tape;
  Index total = 0;
  for (Var<Scalar> p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.cols() != parts.front().cols()) throw ShapeError("vstack: column mismatch");
    total += p.rows();
  }
  Mat<Scalar> y(total, parts.front().cols());
  std::vector<int> ids;
  std::vector<Index> row_counts;
  Index at = 0;
  bool needs = false;
  for (Var<Scalar> p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    ids.push_back(p.id);
    row_counts.push_back(p.rows());
    needs = needs || t.requires_grad(p.id);
  }
  typename Tape<Scalar>::Pull pull = [ids, row_counts](Tape<Scalar>& t, const Mat<Scalar>& g) {
    Index at = 0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      t.accumulate(ids[j], g.middleRows(at, row_counts[j]).eval());
      at += row_counts[j];
    }
  };
  return t.push(std::move(y), needs, std::move(pull), "vstack");
}

// Row-wise layer normalization with learned gain and bias (both 1 x d).
template <class Scalar>
Var<Scalar> layer_norm_rows(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias, Scalar eps) {
  detail::same_tape(x, gain);
  detail::same_tape(x, bias);
  if (gain.rows() != 1 || bias.rows() != 1 || gain.cols() != x.cols() || bias.cols() != x.cols()) {
    throw ShapeError("layer_norm_rows: gain/bias must be 1 x d");
  }
  const Index n = x.rows(), d = x.cols();
  Mat<Scalar> normed(n, d);
  Mat<Scalar> inv_std(n, 1);
  for (Index r = 0; r < n; ++r) {
    const Scalar mu = x.value().row(r).mean();
    const Scalar var = (x.value().row(r).array() - mu).square().mean();
    const Scalar istd = Scalar(1) / std::sqrt(var + eps);
    inv_std(r, 0) = istd;
    normed.row(r) = ((x.value().row(r).array() - mu) * istd).matrix();
  }
  Mat<Scalar> y = normed;
  for (Index r = 0; r < n; ++r) {
    y.row(r) = y.row(r).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  }
  Tape<Scalar>& t = *x.tape;
  typename Tape<Scalar>::Pull pull = [ix = x.id, ig = gain.id, ib = bias.id, normed,
                                      inv_std](Tape<Scalar>& t, const Mat<Scalar>& g) {
    const Mat<Scalar>& gv = t.value(ig);
    const Index n = normed.rows(), d = normed.cols();
    Mat<Scalar> gx(n, d);
    for (Index r = 0; r < n; ++r) {
      // dL/dnormed for this row
      Mat<Scalar> gn = g.row(r).cwiseProduct(gv.row(0));
      const Scalar m1 = gn.mean();
      const Scalar m2 = gn.cwiseProduct(normed.row(r)).mean();
      gx.row(r) =
          ((gn.array() - m1 - normed.row(r).array() * m2) * inv_std(r, 0)).matrix();
    }
    t.accumulate(ix, gx);
    t.accumulate(ig, g.cwiseProduct(normed).colwise().sum().eval());
    t.accumulate(ib, g.colwise().sum().eval());
  };
  return t.push(std::move(y), detail::any_grad({x, gain, bias}), std::move(pull),
                "layer_norm_rows");
}

}  // namespace drn
