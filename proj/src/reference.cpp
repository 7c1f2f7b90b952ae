#include "fcs/reference.hpp"

#include <cmath>
#include <string>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

constexpr double kRates[3] = {0.01, 0.10, 0.25};

// Mean(all) rows; column order ReconNet, DR2-Net, Adp-Rec, Fully-Conv, Proposed.
constexpr double kMeanPsnr[3][5] = {
    {17.94, 17.44, 20.33, 20.59, 21.27},
    {23.28, 24.32, 27.53, 26.98, 28.30},
    {26.42, 28.66, 30.80, 30.09, 32.69},
};

int rate_slot(double rate) {
  for (int i = 0; i < 3; ++i)
    if (std::abs(rate - kRates[i]) < 1e-9) return i;
  return -1;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::ReconNet: return "ReconNet";
    case Method::DR2Net: return "DR2-Net";
    case Method::AdpRec: return "Adp-Rec";
    case Method::FullyConv: return "Fully-Conv";
    case Method::Proposed: return "Proposed";
  }
  return "?";
}

Method reference_method(Arch arch) {
  switch (arch) {
    case Arch::GaussianBlock: return Method::ReconNet;
    case Arch::AdaptiveFcBlock: return Method::AdpRec;
    case Arch::FullyConvTiny: return Method::FullyConv;
    case Arch::FullyConvRes: return Method::Proposed;
  }
  return Method::Proposed;
}

bool has_published_reference(double rate) { return rate_slot(rate) >= 0; }

PublishedTable published_reference(double rate) {
  const int slot = rate_slot(rate);
  if (slot < 0) {
    throw ConfigError("no published reference at rate " + std::to_string(rate) +
                      " (available: 0.01, 0.10, 0.25)");
  }
  PublishedTable t;
  t.rate = kRates[slot];
  for (std::size_t m = 0; m < 5; ++m) t.mean_psnr[m] = kMeanPsnr[slot][m];
  if (slot == 0) {
    t.mean_ssim = {0.4083, 0.4291, 0.5031, std::nullopt, 0.5447};
    t.mean_mos = {1.0734, 1.1188, 1.8496, std::nullopt, 2.6328};
  }
  return t;
}

}  // namespace fcs
