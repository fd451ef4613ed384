#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "ocacnn/tensor.hpp"

namespace ocacnn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> m;  // first moments, zero on first touch
  std::map<std::string, Tensor> v;  // second moments
};

/// One bias-corrected Adam update. Parameters named in `frozen` are left
/// untouched; a parameter without an entry in `grads` sees a zero gradient.
/// All gradients are checked before anything is modified, so a non-finite
/// gradient leaves params and state unchanged (NumericalError names it).
void adam_step(AdamState& state, std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, const std::set<std::string>& frozen = {});

}  // namespace ocacnn
