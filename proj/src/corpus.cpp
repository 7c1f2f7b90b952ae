#include "fcs/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "fcs/errors.hpp"
#include "fcs/image_io.hpp"

namespace fcs {

namespace fs = std::filesystem;

namespace {

bool image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm" || ext == ".pnm" || ext == ".png";
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

std::vector<NamedImage> load_corpus(const std::vector<fs::path>& paths) {
  std::vector<NamedImage> out;
  for (const fs::path& root : paths) {
    if (!fs::exists(root)) throw ConfigError("corpus path does not exist: " + root.string());
    std::vector<fs::path> files;
    if (fs::is_directory(root)) {
      for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_regular_file() && image_extension(entry.path())) files.push_back(entry.path());
      std::sort(files.begin(), files.end());
    } else {
      files.push_back(root);
    }
    for (const fs::path& f : files) out.push_back({f.stem().string(), read_image(f)});
  }
  return out;
}

PatchSet extract_patches(const std::vector<NamedImage>& corpus, std::size_t patch_size,
                         std::size_t per_image, std::uint64_t seed) {
  if (patch_size == 0 || per_image == 0) throw ConfigError("patch size and count must be positive");
  PatchSet set;
  Rng rng(seed);
  for (const NamedImage& img : corpus) {
    const Shape s = img.image.shape();
    if (s.h < patch_size || s.w < patch_size) {
      ++set.skipped;
      continue;
    }
    for (std::size_t k = 0; k < per_image; ++k) {
      const std::size_t top = rng.index(s.h - patch_size + 1);
      const std::size_t left = rng.index(s.w - patch_size + 1);
      Tensor p(Shape{1, 1, patch_size, patch_size});
      for (std::size_t i = 0; i < patch_size; ++i)
        for (std::size_t j = 0; j < patch_size; ++j)
          p.at(0, 0, i, j) = img.image.at(0, 0, top + i, left + j);
      set.patches.push_back(std::move(p));
    }
  }
  return set;
}

Tensor synthesize_image(std::size_t height, std::size_t width, Rng& rng) {
  const double pi = std::numbers::pi;
  const double scale = static_cast<double>(std::max(height, width));
  Tensor img(Shape{1, 1, height, width});

  // Background: sum of cosines with 1/f amplitudes.
  struct Wave { double fx, fy, amp, phase; };
  std::vector<Wave> waves;
  for (int k = 0; k < 14; ++k) {
    const double f = rng.uniform(0.5, 7.0);
    const double theta = rng.uniform(0.0, pi);
    waves.push_back({f * std::cos(theta), f * std::sin(theta), 0.18 / f, rng.uniform(0.0, 2 * pi)});
  }
  const double gx = rng.uniform(-0.3, 0.3), gy = rng.uniform(-0.3, 0.3);
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      const double y = static_cast<double>(i) / scale, x = static_cast<double>(j) / scale;
      double v = 0.5 + gx * (x - 0.5) + gy * (y - 0.5);
      for (const Wave& wv : waves) v += wv.amp * std::cos(2 * pi * (wv.fx * x + wv.fy * y) + wv.phase);
      img.at(0, 0, i, j) = v;
    }

  // Foreground shapes composited back to front with a ~1 px soft edge.
  const int shapes = 3 + static_cast<int>(rng.index(5));
  const double edge = 1.0 / scale;
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.5;
    const double cx = rng.uniform(0.0, 1.0), cy = rng.uniform(0.0, 1.0);
    const double rx = rng.uniform(0.06, 0.3), ry = rng.uniform(0.06, 0.3);
    const double rot = rng.uniform(0.0, pi);
    const double level = rng.uniform(0.0, 1.0);
    const double slope_x = rng.uniform(-0.4, 0.4), slope_y = rng.uniform(-0.4, 0.4);
    const bool striped = rng.uniform() < 0.35;
    const double period = rng.uniform(3.0, 9.0) / scale;
    const double stripe_dir = rng.uniform(0.0, pi);
    const double cr = std::cos(rot), sr = std::sin(rot);
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        const double y = static_cast<double>(i) / scale, x = static_cast<double>(j) / scale;
        const double u = (x - cx) * cr + (y - cy) * sr;
        const double v = -(x - cx) * sr + (y - cy) * cr;
        double dist;  // approximate signed distance, negative inside
        if (ellipse) {
          const double r = std::hypot(u / rx, v / ry);
          dist = (r - 1.0) * std::min(rx, ry);
        } else {
          dist = std::max(std::abs(u) - rx, std::abs(v) - ry);
        }
        const double alpha = 1.0 - smoothstep(-edge, edge, dist);
        if (alpha <= 0.0) continue;
        double fill = level + slope_x * u + slope_y * v;
        if (striped) {
          fill += 0.15 * std::sin(2 * pi * (x * std::cos(stripe_dir) + y * std::sin(stripe_dir)) / period);
        }
        double& px = img.at(0, 0, i, j);
        px = (1.0 - alpha) * px + alpha * fill;
      }
  }

  for (auto& v : img.data()) v += rng.normal(0.0, 0.004);
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const double l = *lo, span = std::max(*hi - *lo, 1e-12);
  for (auto& v : img.data()) v = 0.05 + 0.9 * (v - l) / span;
  return img;
}

std::vector<NamedImage> synthesize_corpus(std::size_t count, std::size_t height, std::size_t width,
                                          std::uint64_t seed) {
  std::vector<NamedImage> out;
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03zu", k);
    out.push_back({name, synthesize_image(height, width, rng)});
  }
  return out;
}

void write_corpus(const std::vector<NamedImage>& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  for (const NamedImage& img : corpus) write_pgm(dir / (img.name + ".pgm"), img.image);
}

}  // namespace fcs
