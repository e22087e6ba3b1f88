#include "graphuil/adam.hpp"

#include <cmath>

#include "graphuil/error.hpp"

namespace graphuil {

AdamState AdamState::init(const ParamSet& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (!params.same_layout(grads)) throw DimensionError("adam_step: gradient layout does not match parameters");
  if (!params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw DimensionError("adam_step: moment layout does not match parameters");
  }
  const auto& c = state.config;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].value.array();
    auto g = grads[k].value.array();
    auto m = state.m[k].value.array();
    auto v = state.v[k].value.array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    p -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
  }
}

}  // namespace graphuil
