#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcs/tensor.hpp"

namespace fcs {

struct NamedImage {
  std::string name;
  Tensor image;  // 1×1×H×W in [0, 1]
};

/// Loads every .pgm/.pnm/.png file of each directory (lexicographic order)
/// and every explicitly listed file. A missing path raises ConfigError.
std::vector<NamedImage> load_corpus(const std::vector<std::filesystem::path>& paths);

struct PatchSet {
  std::vector<Tensor> patches;
  /// Images smaller than the patch size, left out.
  std::size_t skipped = 0;
};

/// Seeded uniform random crops, `per_image` from each image in corpus order.
PatchSet extract_patches(const std::vector<NamedImage>& corpus, std::size_t patch_size,
                         std::size_t per_image, std::uint64_t seed);

/// Deterministic piecewise-smooth test imagery: a 1/f background field,
/// soft-edged ellipses and rotated rectangles, some striped textures and a
/// little sensor noise, rescaled to [0.05, 0.95].
Tensor synthesize_image(std::size_t height, std::size_t width, Rng& rng);
std::vector<NamedImage> synthesize_corpus(std::size_t count, std::size_t height,
                                          std::size_t width, std::uint64_t seed);

/// Writes each image as <dir>/<name>.pgm.
void write_corpus(const std::vector<NamedImage>& corpus, const std::filesystem::path& dir);

}  // namespace fcs
