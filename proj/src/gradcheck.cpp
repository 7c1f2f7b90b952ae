#include "fcs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

struct Probe {
  double loss;
  std::uint64_t signature;
};

Probe loss_only(const std::function<Var(Tape&)>& loss_of) {
  Tape tape;
  const double loss = loss_of(tape).value()[0];
  return {loss, tape.branch_signature()};
}

std::vector<std::size_t> probe_indices(std::size_t numel, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(numel);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || numel <= limit) return idx;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& loss_of,
                                  const std::vector<Parameter*>& params,
                                  const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  value_and_grad(loss_of);
  const Probe base = loss_only(loss_of);
  if (!std::isfinite(base.loss)) throw NumericError("gradcheck: non-finite loss at the base point");

  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  const double h = options.step;

  for (Parameter* p : params) {
    if (!p->trainable) {
      report.excluded.push_back(p->name);
      continue;
    }
    ParamCheck check{p->name, p->id, 0, 0.0, 0, 0};
    const Tensor analytic = p->grad;
    for (std::size_t i : probe_indices(p->value.numel(), options.max_probes_per_param, rng)) {
      const double saved = p->value[i];
      double step = h;
      bool smooth = false;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= options.max_step_reductions; ++attempt, step /= 10.0) {
        p->value[i] = saved + step;
        const Probe plus = loss_only(loss_of);
        p->value[i] = saved - step;
        const Probe minus = loss_only(loss_of);
        p->value[i] = saved;
        if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
          throw NumericError("gradcheck: non-finite loss while probing parameter id " +
                             std::to_string(p->id) + " (" + p->name + ")");
        }
        if (plus.signature == base.signature && minus.signature == base.signature) {
          numeric = (plus.loss - minus.loss) / (2.0 * step);
          smooth = true;
          if (attempt > 0) ++check.reprobed;
          break;
        }
      }
      if (!smooth) {
        ++check.skipped;
        continue;
      }
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(a - numeric) / denom);
      ++check.probes;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  report.pass = report.max_rel_error <= report.tolerance &&
                std::all_of(report.params.begin(), report.params.end(),
                            [](const ParamCheck& c) { return c.probes > 0; });
  return report;
}

}  // namespace fcs
