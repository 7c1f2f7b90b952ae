#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fcs/autodiff.hpp"

namespace fcs {

struct ParamCheck {
  std::string name;
  std::uint64_t id = 0;
  std::size_t probes = 0;
  double max_rel_error = 0.0;
  /// Entries whose ±step probe straddled a ReLU kink and were re-probed with a smaller step.
  std::size_t reprobed = 0;
  /// Entries left out because every step tried straddled a kink.
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  /// Frozen parameters left out of the check.
  std::vector<std::string> excluded;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  double tolerance = 1e-5;
  double step = 1e-5;
  /// 0 probes every entry; otherwise a seeded subset of this many entries per parameter.
  std::size_t max_probes_per_param = 0;
  std::uint64_t seed = 0;
  /// Smaller steps tried (each a tenth of the previous) when a probe crosses a kink.
  int max_step_reductions = 3;
};

/// Compares reverse-mode gradients against central differences
/// (f(θ+h) − f(θ−h)) / 2h for every probed entry. The reported error of an
/// entry is |analytic − numeric| / max(|analytic|, |numeric|, 1e-12).
/// Central differences are meaningless across a ReLU kink, so a probe whose
/// branch signature differs from the base point is repeated with smaller steps.
GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& loss_of,
                                  const std::vector<Parameter*>& params,
                                  const GradCheckOptions& options = {});

}  // namespace fcs
