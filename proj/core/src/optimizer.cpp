#include "dtsl/optimizer.hpp"

#include <cmath>

#include "dtsl/errors.hpp"

namespace dtsl {

AdamState AdamState::init(const std::vector<const Tensor*>& params, std::vector<std::string> names,
                          AdamConfig config) {
  AdamState s;
  s.config = config;
  s.names = std::move(names);
  if (s.names.size() != params.size()) throw ValueError("adam init: names do not match parameter list");
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter, gradient, and state lists differ in length");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::string& name = t < state.names.size() ? state.names[t] : std::to_string(t);
    if (!params[t]->same_shape(*grads[t])) {
      throw ShapeError("adam_step: gradient shape " + shape_to_string(grads[t]->shape()) + " does not match '" +
                       name + "' " + shape_to_string(params[t]->shape()));
    }
    if (!grads[t]->all_finite()) throw ValueError("adam_step: non-finite gradient in '" + name + "'");
  }

  state.step_count += 1;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    Tensor& m = state.m[t];
    Tensor& v = state.v[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace dtsl
