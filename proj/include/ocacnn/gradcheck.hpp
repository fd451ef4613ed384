#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ocacnn/tape.hpp"

namespace ocacnn {

/// Builds a scalar on `tape` from one leaf per parameter tensor.
using ScalarGraphFn = std::function<Var<double>(Tape<double>& tape, std::span<const Var<double>> params)>;

/// Returns true for coordinates that must not be checked (e.g. near a ReLU kink).
using SkipFn = std::function<bool(std::size_t param, std::size_t coord)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;
  /// Coordinates whose |a| + |n| was below the denominator floor.
  std::size_t coords_near_zero = 0;
  /// Coordinates left out because the one-sided differences disagreed, i.e.
  /// the probe straddled a kink (ReLU, clamp, |.|).
  std::size_t coords_nonsmooth = 0;
};

struct GradCheckOptions {
  double step = 1e-6;
  /// Denominator floor of the relative error. Below it the check is in effect
  /// absolute with tolerance tol * floor, since a true zero gradient cannot be
  /// resolved below the round-off of the difference quotient.
  double floor = 1e-12;
  /// Skip a coordinate when |forward - backward| > nonsmooth_tol * max(1, |n|).
  /// Zero disables the test.
  double nonsmooth_tol = 0.0;
};

/// Compares reverse-mode gradients with central differences
/// (f(p+h) - f(p-h)) / 2h. The per-coordinate error is
/// |a - n| / max(floor, |a| + |n|); the report carries the maximum.
GradCheckReport gradient_check(const ScalarGraphFn& f, std::span<const Tensor64> params,
                               const GradCheckOptions& options, const SkipFn& skip = {});
GradCheckReport gradient_check(const ScalarGraphFn& f, std::span<const Tensor64> params,
                               double step, const SkipFn& skip = {});

/// Reverse-mode gradients of f at params, one tensor per parameter.
std::vector<Tensor64> analytic_gradients(const ScalarGraphFn& f, std::span<const Tensor64> params);

}  // namespace ocacnn
