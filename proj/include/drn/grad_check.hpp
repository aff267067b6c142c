#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "drn/tape.hpp"

namespace drn {

// Gradient verification against central finite differences. Runs in f64 only;
// finite differences are too noisy at f32. Inputs must be differentiable in a
// neighbourhood of the evaluation point (kinks such as |x| at 0 are excluded
// by contract).
struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::string worst_param;
  Index worst_row = -1;
  Index worst_col = -1;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
};

using NamedParams = std::vector<std::pair<std::string, Mat<double>>>;

// f: (Tape<double>&, const std::vector<Var<double>>&) -> Var<double> (1x1),
// rebuilt from scratch on every call.
template <class F>
GradCheckReport grad_check(F&& f, NamedParams params, double step, double tolerance) {
  auto eval = [&](const NamedParams& ps) -> double {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(ps.size());
    for (const auto& [name, value] : ps) vars.push_back(tape.input(value));
    return f(tape, vars).item();
  };

  // Analytic gradients from one reverse sweep.
  std::vector<Mat<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(params.size());
    for (const auto& [name, value] : params) vars.push_back(tape.input(value));
    Var<double> out = f(tape, vars);
    tape.backward(out);
    for (Var<double> v : vars) analytic.push_back(v.grad());
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat<double>& value = params[p].second;
    for (Index r = 0; r < value.rows(); ++r) {
      for (Index c = 0; c < value.cols(); ++c) {
        const double orig = value(r, c);
        value(r, c) = orig + step;
        const double up = eval(params);
        value(r, c) = orig - step;
        const double down = eval(params);
        value(r, c) = orig;
        const double fd = (up - down) / (2.0 * step);
        const double an = analytic[p](r, c);
        const double rel = std::abs(an - fd) / std::max(1.0, std::abs(fd));
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = params[p].first;
          report.worst_row = r;
          report.worst_col = c;
          report.worst_analytic = an;
          report.worst_fd = fd;
        }
      }
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace drn
