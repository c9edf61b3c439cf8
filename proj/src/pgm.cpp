#include "advrl/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace advrl {

std::uint8_t quantize_pixel(double p) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
}

namespace {

std::pair<std::size_t, std::size_t> plane_of(const Tensor& image) {
  if (image.rank() == 2) return {image.dim(0), image.dim(1)};
  if (image.rank() == 3 && image.dim(0) == 1) return {image.dim(1), image.dim(2)};
  throw ShapeError("PGM holds one channel, got shape " + to_string(image.shape()));
}

// Reads the next whitespace-separated header integer, skipping '#' comments.
std::size_t header_int(const std::string& s, std::size_t& pos) {
  for (;;) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size() && s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos || pos - start > 6) throw PgmError(PgmError::Kind::Malformed, "PGM: malformed header");
  return std::stoul(s.substr(start, pos - start));
}

}  // namespace

std::string encode_pgm(const Tensor& image) {
  const auto [h, w] = plane_of(image);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + h * w);
  for (double p : image.data()) out.push_back(static_cast<char>(quantize_pixel(p)));
  return out;
}

Tensor decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw PgmError(PgmError::Kind::Malformed, "PGM: expected P5 magic");
  std::size_t pos = 2;
  const std::size_t w = header_int(bytes, pos);
  const std::size_t h = header_int(bytes, pos);
  const std::size_t maxval = header_int(bytes, pos);
  if (maxval != 255) throw PgmError(PgmError::Kind::Malformed, "PGM: only maxval 255 is supported");
  if (w == 0 || h == 0) throw PgmError(PgmError::Kind::Malformed, "PGM: empty image");
  ++pos;  // single whitespace byte before the raster
  if (bytes.size() < pos + w * h) throw PgmError(PgmError::Kind::Malformed, "PGM: raster truncated");
  Tensor img(Shape{1, h, w});
  for (std::size_t i = 0; i < w * h; ++i)
    img[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return img;
}

void write_pgm(const Tensor& image, const std::filesystem::path& path) {
  const std::string bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PgmError(PgmError::Kind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PgmError(PgmError::Kind::Io, "cannot open " + path.string());
  return decode_pgm({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

Tensor difference_image(const Tensor& perturbed, const Tensor& original) {
  if (perturbed.shape() != original.shape())
    throw ShapeError("difference_image: shapes " + to_string(perturbed.shape()) + " and " +
                     to_string(original.shape()) + " differ");
  Tensor out(original.shape());
  double mean = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 10.0 * (perturbed[i] - original[i]);
    mean += out[i];
  }
  mean /= static_cast<double>(out.size());
  for (auto& v : out.data()) v = std::clamp(v - mean + 0.5, 0.0, 1.0);
  return out;
}

}  // namespace advrl
