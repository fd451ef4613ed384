#include "ocacnn/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace ocacnn {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (in) {
    if (c == '#') {
      while (in && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (in && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == '#') in.unget();
  return token;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string token = next_token(in);
  std::size_t value = 0;
  try {
    std::size_t used = 0;
    value = std::stoul(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad PPM " + what + " '" + token + "'");
  }
  return value;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  if (next_token(in) != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
  const std::size_t width = header_number(in, path, "width");
  const std::size_t height = header_number(in, path, "height");
  const std::size_t maxval = header_number(in, path, "maxval");
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PPM geometry or maxval");
  }
  std::string pixels(width * height * 3, '\0');
  in.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!in) throw FormatError(path.string() + ": truncated PPM pixel data");

  Tensor image(Shape{3, height, width});
  const std::size_t plane = width * height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto level = static_cast<unsigned char>(pixels[i * 3 + c]);
      image[c * plane + i] = static_cast<float>(-1.0 + 2.0 * level / static_cast<double>(maxval));
    }
  }
  return image;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t height = image.dim(1), width = image.dim(2), plane = height * width;
  std::string pixels(plane * 3, '\0');
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(image[c * plane + i]), -1.0, 1.0);
      pixels[i * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround((v + 1.0) * 127.5)));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".oct") {
    Tensor t = load_tensor<float>(path);
    if (t.rank() != 3) throw FormatError(path.string() + ": image tensor must be [C,H,W]");
    return t;
  }
  throw FormatError(path.string() + ": unsupported image extension '" + ext + "'");
}

Tensor center_crop_resize(const Tensor& image, std::size_t size) {
  if (image.rank() != 3 || size == 0) throw ShapeError("center_crop_resize: expected [C,H,W]");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  const std::size_t side = std::min(height, width);
  const std::size_t top = (height - side) / 2, left = (width - side) / 2;
  Tensor out(Shape{channels, size, size});
  const double scale = static_cast<double>(side) / static_cast<double>(size);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* plane = image.raw() + c * height * width;
    for (std::size_t i = 0; i < size; ++i) {
      const double sy = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(side - 1));
      const auto y0 = static_cast<std::size_t>(sy);
      const std::size_t y1 = std::min(y0 + 1, side - 1);
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t j = 0; j < size; ++j) {
        const double sx = std::clamp((j + 0.5) * scale - 0.5, 0.0, static_cast<double>(side - 1));
        const auto x0 = static_cast<std::size_t>(sx);
        const std::size_t x1 = std::min(x0 + 1, side - 1);
        const double fx = sx - static_cast<double>(x0);
        auto at = [&](std::size_t y, std::size_t x) {
          return static_cast<double>(plane[(top + y) * width + left + x]);
        };
        const double top_row = at(y0, x0) * (1 - fx) + at(y0, x1) * fx;
        const double bottom_row = at(y1, x0) * (1 - fx) + at(y1, x1) * fx;
        out[(c * size + i) * size + j] = static_cast<float>(top_row * (1 - fy) + bottom_row * fy);
      }
    }
  }
  return out;
}

}  // namespace ocacnn
