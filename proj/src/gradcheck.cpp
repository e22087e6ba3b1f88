#include "graphuil/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphuil/rng.hpp"

namespace graphuil {

GradCheckReport finite_diff_check(const LossBuilder& loss, const ParamSet& params, const GradCheckOptions& options) {
  const ParamSet analytic = grad(loss, params).grads;
  ParamSet probe = params;
  GradCheckReport report;
  Rng rng(derive_seed(options.seed, {0x67726164ULL}));

  for (std::size_t k = 0; k < probe.size(); ++k) {
    Matrix& block = probe[k].value;
    const auto total = static_cast<std::size_t>(block.size());
    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_block > 0) {
      const std::size_t limit = std::max<std::size_t>(32, options.max_coords_per_block);
      if (total > limit) {
        shuffle(coords.begin(), coords.end(), rng);
        coords.resize(limit);
        std::sort(coords.begin(), coords.end());
      }
    }

    GradCheckReport::Block entry{probe[k].name, coords.size(), 0.0};
    for (std::size_t c : coords) {
      double& x = block.data()[c];
      const double saved = x;
      x = saved + options.eps;
      const double up = evaluate_loss(loss, probe);
      x = saved - options.eps;
      const double down = evaluate_loss(loss, probe);
      x = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double exact = analytic[k].value.data()[c];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(exact - numeric) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.blocks.push_back(std::move(entry));
  }
  return report;
}

}  // namespace graphuil
