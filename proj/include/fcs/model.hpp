#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fcs/autodiff.hpp"
#include "fcs/gradcheck.hpp"
#include "fcs/measurement.hpp"

namespace fcs {

enum class Arch {
  GaussianBlock,    // fixed Gaussian block sensing, learned linear recovery + refinement
  AdaptiveFcBlock,  // learned block sensing, same recovery head
  FullyConvTiny,    // conv measurement + deconv, no residual path
  FullyConvRes,     // conv measurement + deconv + residual blocks
};

std::string_view arch_name(Arch arch);
/// Throws ConfigError for unknown names.
Arch parse_arch(std::string_view name);
bool is_blockwise(Arch arch);

struct ModelConfig {
  double rate = 0.1;
  std::uint64_t seed = 0;
  /// Feature width of the residual path and of the block refinement convs.
  std::size_t features = 64;
  std::size_t resblocks = 3;
  ConvGeometry conv{};
  std::size_t block_size = kDefaultBlockSize;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Outputs of the whole-image pipeline, all cropped to the input extent.
struct ReconstructionTriple {
  Tensor preliminary;  // deconvolution output
  Tensor residual;     // residual-path output (zero for the tiny variant)
  Tensor final;        // preliminary + residual
};

/// An architecture variant: a measurer plus named reconstruction parameters.
/// Parameter addresses are stable for the lifetime of the object as long as
/// it is not moved.
class Model {
 public:
  Arch arch() const { return arch_; }
  const ModelConfig& config() const { return config_; }
  const Measurer& measurer() const { return measurer_; }
  Measurer& measurer() { return measurer_; }

  /// Measurement parameter first, then reconstruction parameters in build order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& param(std::string_view name);
  const Parameter& param(std::string_view name) const;
  bool has_param(std::string_view name) const;
  std::size_t parameter_count(bool trainable_only = false) const;

  Model(Arch arch, ModelConfig config, Measurer measurer, std::vector<Parameter> recon);

 private:
  Arch arch_;
  ModelConfig config_;
  Measurer measurer_;
  std::vector<Parameter> recon_;
};

/// Deterministic in (arch, config).
Model build_model(Arch arch, const ModelConfig& config);

struct GraphTriple {
  Var preliminary;
  Var residual;  // unbound for the tiny variant
  Var final;
};

/// Records the whole-image pipeline for an N×1×H×W batch. Inputs are
/// reflect-padded to stride multiples; outputs are cropped back to H×W.
GraphTriple record_full(Model& model, Tape& tape, const Tensor& images);
/// Records the block pipeline for an N×1×H×W batch (reflect-padded to block
/// multiples, cropped back).
Var record_blockwise(Model& model, Tape& tape, const Tensor& images);
/// Final reconstruction for any architecture.
Var record_reconstruction(Model& model, Tape& tape, const Tensor& images);

ReconstructionTriple forward_full(Model& model, const Tensor& image);
Tensor forward_blockwise(Model& model, const Tensor& image);
/// Dispatches on the architecture; unclamped.
Tensor reconstruct(Model& model, const Tensor& image);

/// Central-difference check of the reconstruction loss mse(f(x), x).
GradCheckReport finite_diff_check(Model& model, const Tensor& input,
                                  const GradCheckOptions& options);

/// Miniature variant used by the gradient-check gate: F = 4, R = 1,
/// 8×8/stride-4 measurement kernels, 8×8 blocks.
ModelConfig miniature_config(double rate, std::uint64_t seed);

}  // namespace fcs
