#pragma once

#include <cstdint>
#include <vector>

#include "fcs/autodiff.hpp"

namespace fcs {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameters. Frozen parameters
/// (trainable == false) are never touched.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update from the gradients currently stored in the parameters.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig config_;
  std::uint64_t t_ = 0;
};

}  // namespace fcs
