#include "ocacnn/optim.hpp"

#include <cmath>

namespace ocacnn {

void adam_step(AdamState& state, std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, const std::set<std::string>& frozen) {
  for (const auto& [name, g] : grads) {
    const auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
    if (g.shape() != it->second.shape()) {
      throw ShapeError("adam_step: gradient of '" + name + "' has shape " + shape_str(g.shape()) +
                       ", parameter is " + shape_str(it->second.shape()));
    }
    if (!frozen.contains(name) && !all_finite(g)) {
      throw NumericalError("adam_step: non-finite gradient for parameter '" + name + "'");
    }
  }

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  for (auto& [name, theta] : params) {
    if (frozen.contains(name)) continue;
    auto& m = state.m.try_emplace(name, theta.shape()).first->second;
    auto& v = state.v.try_emplace(name, theta.shape()).first->second;
    const auto git = grads.find(name);
    const Tensor* g = git == grads.end() ? nullptr : &git->second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      theta[i] = static_cast<float>(theta[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace ocacnn
