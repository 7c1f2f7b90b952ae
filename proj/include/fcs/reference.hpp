#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "fcs/model.hpp"

namespace fcs {

/// Methods of the published comparison tables.
enum class Method { ReconNet, DR2Net, AdpRec, FullyConv, Proposed };

inline constexpr std::array<Method, 5> kMethods = {Method::ReconNet, Method::DR2Net, Method::AdpRec,
                                                   Method::FullyConv, Method::Proposed};

std::string_view method_name(Method m);

/// The published method each local architecture stands in for.
Method reference_method(Arch arch);

/// Published mean results at one measurement rate.
struct PublishedTable {
  double rate = 0.0;
  /// Mean PSNR (dB) over the 11 standard test images, indexed by Method.
  std::array<double, 5> mean_psnr{};
  /// Mean SSIM, only published at rate 0.01; absent for Fully-Conv.
  std::array<std::optional<double>, 5> mean_ssim{};
  /// Mean opinion scores, only published at rate 0.01; absent for Fully-Conv.
  std::array<std::optional<double>, 5> mean_mos{};

  double psnr(Method m) const { return mean_psnr[static_cast<std::size_t>(m)]; }
  std::optional<double> ssim(Method m) const { return mean_ssim[static_cast<std::size_t>(m)]; }
  std::optional<double> mos(Method m) const { return mean_mos[static_cast<std::size_t>(m)]; }
};

/// MOS of the uncompressed originals at rate 0.01.
inline constexpr double kOriginalMeanMos = 4.9545;

/// rate ∈ {0.01, 0.10, 0.25}; anything else raises ConfigError.
PublishedTable published_reference(double rate);
bool has_published_reference(double rate);

}  // namespace fcs
