#pragma once

#include <filesystem>

#include "fcs/tensor.hpp"

namespace fcs {

/// Binary PGM (P5), maxval 1..65535. Pixel p maps to p / maxval.
Tensor read_pgm(const std::filesystem::path& path);
/// PNG, gray or color; color is reduced to luma Y = 0.299R + 0.587G + 0.114B.
Tensor read_png(const std::filesystem::path& path);
/// Dispatches on the file signature. Unknown signatures raise FormatError.
Tensor read_image(const std::filesystem::path& path);

/// Writes a 1×1×H×W image as P5 with maxval 255 after clamping to [0, 1].
void write_pgm(const std::filesystem::path& path, const Tensor& image);

}  // namespace fcs
