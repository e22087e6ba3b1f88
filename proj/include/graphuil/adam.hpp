#pragma once

#include <cstdint>

#include "graphuil/params.hpp"

namespace graphuil {

struct AdamConfig {
  double lr{0.01};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

struct AdamState {
  AdamConfig config;
  ParamSet m;
  ParamSet v;
  std::int64_t t{0};

  /// Zero moments shaped like params.
  static AdamState init(const ParamSet& params, AdamConfig config = {});
};

/// One bias-corrected Adam update in place. Throws DimensionError when the
/// gradient or moment layout does not match params.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

}  // namespace graphuil
