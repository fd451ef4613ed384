#include "ocacnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ocacnn {

namespace {

double evaluate(const ScalarGraphFn& f, std::span<const Tensor64> params) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.constant(p));
  const double value = f(tape, leaves).value().item();
  if (!std::isfinite(value)) throw NumericalError("gradient_check: function value is not finite");
  return value;
}

}  // namespace

std::vector<Tensor64> analytic_gradients(const ScalarGraphFn& f, std::span<const Tensor64> params) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(p));
  Var<double> root = f(tape, leaves);
  if (!std::isfinite(root.value().item())) {
    throw NumericalError("gradient_check: function value is not finite");
  }
  tape.backward(root);
  std::vector<Tensor64> grads;
  grads.reserve(leaves.size());
  for (const auto& leaf : leaves) grads.push_back(tape.grad(leaf));
  return grads;
}

GradCheckReport gradient_check(const ScalarGraphFn& f, std::span<const Tensor64> params,
                               const GradCheckOptions& options, const SkipFn& skip) {
  const double step = options.step;
  if (!(step > 0.0)) throw ContractError("gradient_check: step must be positive");
  if (!(options.floor > 0.0)) throw ContractError("gradient_check: floor must be positive");
  const std::vector<Tensor64> analytic = analytic_gradients(f, params);
  const double center = options.nonsmooth_tol > 0.0 ? evaluate(f, params) : 0.0;

  std::vector<Tensor64> probe(params.begin(), params.end());
  GradCheckReport report;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      if (skip && skip(p, i)) {
        ++report.coords_skipped;
        continue;
      }
      const double original = probe[p][i];
      probe[p][i] = original + step;
      const double plus = evaluate(f, probe);
      probe[p][i] = original - step;
      const double minus = evaluate(f, probe);
      probe[p][i] = original;

      const double numeric = (plus - minus) / (2.0 * step);
      if (options.nonsmooth_tol > 0.0) {
        const double forward = (plus - center) / step;
        const double backward = (center - minus) / step;
        if (std::abs(forward - backward) > options.nonsmooth_tol * std::max(1.0, std::abs(numeric))) {
          ++report.coords_nonsmooth;
          continue;
        }
      }
      const double a = analytic[p][i];
      const double scale = std::abs(a) + std::abs(numeric);
      if (scale < options.floor) ++report.coords_near_zero;
      const double err = std::abs(a - numeric) / std::max(options.floor, scale);
      ++report.coords_checked;
      if (err > report.max_rel_error || report.coords_checked == 1) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_param = p;
        report.worst_coord = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

GradCheckReport gradient_check(const ScalarGraphFn& f, std::span<const Tensor64> params,
                               double step, const SkipFn& skip) {
  GradCheckOptions options;
  options.step = step;
  return gradient_check(f, params, options, skip);
}

}  // namespace ocacnn
