#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "graphuil/autodiff.hpp"

namespace graphuil {

struct GradCheckOptions {
  double eps{1e-5};
  /// 0 checks every coordinate; otherwise a seeded random subset of
  /// max(32, limit) coordinates per block.
  std::size_t max_coords_per_block{0};
  std::uint64_t seed{0};
};

struct GradCheckReport {
  struct Block {
    std::string name;
    std::size_t checked{0};
    double max_rel_error{0.0};
  };
  std::vector<Block> blocks;
  double max_rel_error{0.0};
};

/// Compares the tape gradient against central differences
/// (loss(p+eps) − loss(p−eps)) / 2eps, coordinate by coordinate. The relative
/// error uses the denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_diff_check(const LossBuilder& loss, const ParamSet& params,
                                  const GradCheckOptions& options = {});

}  // namespace graphuil
