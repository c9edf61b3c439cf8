#include "advrl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

namespace advrl {

const char* split_name(Split split) { return split == Split::Train ? "train" : "test"; }

Shape Dataset::image_shape() const {
  if (images.empty()) throw std::logic_error("dataset is empty");
  return images.front().pixels.shape();
}

std::vector<std::size_t> Dataset::indices_of(std::size_t label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].label == label) out.push_back(i);
  return out;
}

namespace {

struct Placement {
  double cx, cy, r, half_width;
};

bool inside(std::size_t shape, const Placement& p, double x, double y) {
  const double dx = x - p.cx;
  const double dy = y - p.cy;
  const double ax = std::abs(dx), ay = std::abs(dy);
  const double r = p.r, hw = p.half_width;
  switch (shape) {
    case 0:  // disk
      return dx * dx + dy * dy <= r * r;
    case 1:  // square
      return ax <= 0.8 * r && ay <= 0.8 * r;
    case 2: {  // triangle, apex up
      if (dy < -r || dy > 0.8 * r) return false;
      return ax <= 0.95 * r * (dy + r) / (1.8 * r);
    }
    case 3:  // plus
      return (ax <= hw && ay <= r) || (ay <= hw && ax <= r);
    case 4: {  // ring
      const double d = std::sqrt(dx * dx + dy * dy);
      return d <= r && d >= r - 2.0 * hw;
    }
    case 5: {  // frame
      const double m = std::max(ax, ay);
      return m <= 0.85 * r && m >= 0.85 * r - 2.0 * hw;
    }
    case 6:  // saltire
      return std::max(ax, ay) <= 0.8 * r &&
             (std::abs(dx - dy) <= 1.414 * hw || std::abs(dx + dy) <= 1.414 * hw);
    case 7:  // diamond
      return ax + ay <= r;
    case 8:  // two horizontal bars
      return ax <= r && std::abs(ay - 0.5 * r) <= hw;
    case 9:  // two vertical bars
      return ay <= r && std::abs(ax - 0.5 * r) <= hw;
    default:
      return false;
  }
}

Tensor render(std::size_t shape, std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = static_cast<double>(size);
  Placement p{};
  p.r = s * (0.22 + 0.12 * unit(rng));
  const double slack = std::max(0.0, s / 2.0 - p.r - 1.0);
  p.cx = s / 2.0 + (2.0 * unit(rng) - 1.0) * slack * 0.6;
  p.cy = s / 2.0 + (2.0 * unit(rng) - 1.0) * slack * 0.6;
  p.half_width = std::max(1.0, 0.18 * p.r);
  const double background = 0.2 * unit(rng);
  const double contrast = (0.3 + 0.4 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);

  Tensor img(Shape{1, size, size});
  constexpr std::array<double, 2> sub{0.25, 0.75};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      int hits = 0;
      for (double oy : sub)
        for (double ox : sub)
          hits += inside(shape, p, static_cast<double>(x) + ox, static_cast<double>(y) + oy);
      const double noise = 0.05 * (2.0 * unit(rng) - 1.0);
      img[y * size + x] = std::clamp(background + contrast * hits / 4.0 + noise, 0.0, 1.0);
    }
  }
  return img;
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off) {
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  os.write(bytes, 4);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, "cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset generate_shapes(const ShapesConfig& config) {
  if (config.classes < 2) throw std::invalid_argument("generate_shapes: need at least 2 classes");
  if (config.classes > kShapeLibrarySize)
    throw std::invalid_argument("generate_shapes: " + std::to_string(config.classes) +
                                " classes requested, shape library has " +
                                std::to_string(kShapeLibrarySize));
  if (config.size < 16) throw std::invalid_argument("generate_shapes: size must be >= 16");

  Dataset ds;
  ds.classes = config.classes;
  ds.split = config.split;
  ds.provenance = "shapes:seed=" + std::to_string(config.seed) + ",split=" +
                  split_name(config.split) + ",classes=" + std::to_string(config.classes) +
                  ",per_class=" + std::to_string(config.per_class) +
                  ",size=" + std::to_string(config.size);
  ds.images.reserve(config.classes * config.per_class);
  const auto seed_lo = static_cast<std::uint32_t>(config.seed);
  const auto seed_hi = static_cast<std::uint32_t>(config.seed >> 32);
  for (std::size_t i = 0; i < config.per_class; ++i) {
    for (std::size_t c = 0; c < config.classes; ++c) {
      std::seed_seq seq{seed_lo, seed_hi, static_cast<std::uint32_t>(config.split),
                        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      ds.images.push_back({render(c, config.size, rng), c});
    }
  }
  return ds;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, Split split) {
  const auto img = slurp(images_path);
  const auto lbl = slurp(labels_path);
  if (img.size() < 16)
    throw IdxError(IdxError::Kind::Truncated, "IDX image header truncated in " + images_path.string());
  if (lbl.size() < 8)
    throw IdxError(IdxError::Kind::Truncated, "IDX label header truncated in " + labels_path.string());
  if (read_be32(img, 0) != 0x00000803)
    throw IdxError(IdxError::Kind::BadMagic, "bad IDX image magic in " + images_path.string());
  if (read_be32(lbl, 0) != 0x00000801)
    throw IdxError(IdxError::Kind::BadMagic, "bad IDX label magic in " + labels_path.string());

  const std::size_t count = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  const std::size_t labels = read_be32(lbl, 4);
  if (count != labels)
    throw IdxError(IdxError::Kind::CountMismatch,
                   "IDX count mismatch: " + std::to_string(count) + " images vs " +
                       std::to_string(labels) + " labels");
  if (rows == 0 || cols == 0)
    throw IdxError(IdxError::Kind::BadMagic, "IDX image dimensions must be positive");
  if (rows > img.size() || cols > img.size() || (count > 0 && rows * cols > (img.size() - 16) / count))
    throw IdxError(IdxError::Kind::Truncated, "IDX image payload truncated in " + images_path.string());
  if (lbl.size() < 8 + count)
    throw IdxError(IdxError::Kind::Truncated, "IDX label payload truncated in " + labels_path.string());

  Dataset ds;
  ds.split = split;
  ds.provenance = "idx:" + images_path.filename().string() + "," + labels_path.filename().string();
  ds.images.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Tensor px(Shape{1, rows, cols});
    const unsigned char* src = img.data() + 16 + n * rows * cols;
    for (std::size_t i = 0; i < rows * cols; ++i) px[i] = src[i] / 255.0;
    const std::size_t label = lbl[8 + n];
    ds.classes = std::max(ds.classes, label + 1);
    ds.images.push_back({std::move(px), label});
  }
  return ds;
}

void save_idx(const Dataset& dataset, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  const Shape shape = dataset.image_shape();
  if (shape.size() != 3 || shape[0] != 1)
    throw ShapeError("save_idx: only single-channel images, got " + to_string(shape));
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lbl(labels_path, std::ios::binary);
  if (!img || !lbl) throw IdxError(IdxError::Kind::Io, "cannot write IDX files");
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(dataset.size()));
  write_be32(img, static_cast<std::uint32_t>(shape[1]));
  write_be32(img, static_cast<std::uint32_t>(shape[2]));
  write_be32(lbl, 0x00000801);
  write_be32(lbl, static_cast<std::uint32_t>(dataset.size()));
  for (const auto& item : dataset.images) {
    if (item.label > 255) throw std::invalid_argument("save_idx: label " + std::to_string(item.label) + " exceeds one byte");
    for (double p : item.pixels.data())
      img.put(static_cast<char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
    lbl.put(static_cast<char>(item.label));
  }
  if (!img || !lbl) throw IdxError(IdxError::Kind::Io, "short write to IDX files");
}

}  // namespace advrl
