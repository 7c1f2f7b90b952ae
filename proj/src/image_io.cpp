#include "fcs/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open image file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<unsigned char>& buf, std::size_t& pos,
                         const std::filesystem::path& path) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok += static_cast<char>(buf[pos++]);
  if (tok.empty()) throw IngestionError("truncated PGM header in " + path.string());
  return tok;
}

std::size_t header_number(const std::vector<unsigned char>& buf, std::size_t& pos,
                          const std::filesystem::path& path) {
  const std::string tok = header_token(buf, pos, path);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw IngestionError("malformed PGM header field '" + tok + "' in " + path.string());
  }
  return std::stoul(tok);
}

Tensor decode_pgm(const std::vector<unsigned char>& buf, const std::filesystem::path& path) {
  std::size_t pos = 0;
  if (header_token(buf, pos, path) != "P5") {
    throw FormatError("unsupported PGM variant in " + path.string() + " (only P5 is read)");
  }
  const std::size_t width = header_number(buf, pos, path);
  const std::size_t height = header_number(buf, pos, path);
  const std::size_t maxval = header_number(buf, pos, path);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw IngestionError("invalid PGM dimensions or maxval in " + path.string());
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  const std::size_t need = width * height * bytes;
  if (pos > buf.size() || buf.size() - pos < need) {
    throw IngestionError("truncated PGM raster in " + path.string());
  }
  Tensor img(Shape{1, 1, height, width});
  const auto scale = static_cast<double>(maxval);
  for (std::size_t i = 0; i < width * height; ++i) {
    std::size_t v = buf[pos + i * bytes];
    if (bytes == 2) v = (v << 8) | buf[pos + i * bytes + 1];
    img[i] = static_cast<double>(v) / scale;
  }
  return img;
}

bool has_png_signature(const std::vector<unsigned char>& buf) {
  static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return buf.size() >= 8 && std::memcmp(buf.data(), sig, 8) == 0;
}

Tensor decode_png(const std::vector<unsigned char>& buf, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
    throw IngestionError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IngestionError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Tensor img(Shape{1, 1, image.height, image.width});
  const std::size_t count = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < count; ++i) {
    if (color) {
      const double r = pixels[3 * i], g = pixels[3 * i + 1], b = pixels[3 * i + 2];
      img[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    } else {
      img[i] = pixels[i] / 255.0;
    }
  }
  return img;
}

}  // namespace

Tensor read_pgm(const std::filesystem::path& path) { return decode_pgm(slurp(path), path); }

Tensor read_png(const std::filesystem::path& path) { return decode_png(slurp(path), path); }

Tensor read_image(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  if (has_png_signature(buf)) return decode_png(buf, path);
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] >= '1' && buf[1] <= '7') return decode_pgm(buf, path);
  if (buf.empty()) throw IngestionError("empty image file " + path.string());
  throw FormatError("unsupported image format: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 1) throw DimensionError("write_pgm: expected 1x1xHxW, got " + s.str());
  std::string out = "P5\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + s.h * s.w);
  for (std::size_t i = 0; i < s.h * s.w; ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    out[header + i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IngestionError("cannot write image file " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IngestionError("failed writing image file " + path.string());
}

}  // namespace fcs
