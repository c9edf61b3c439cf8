#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "advrl/tensor.hpp"

namespace advrl {

/// Image with pixels in [0,1], shaped [channels, height, width].
struct LabeledImage {
  Tensor pixels;
  std::size_t label = 0;
};

enum class Split { Train, Test };

const char* split_name(Split split);

struct Dataset {
  std::vector<LabeledImage> images;
  std::size_t classes = 0;
  Split split = Split::Train;
  std::string provenance;

  bool empty() const { return images.empty(); }
  std::size_t size() const { return images.size(); }
  Shape image_shape() const;
  /// Indices of all images carrying the given label, in dataset order.
  std::vector<std::size_t> indices_of(std::size_t label) const;
};

/// Number of distinct primitives the shape generator can draw.
inline constexpr std::size_t kShapeLibrarySize = 10;

struct ShapesConfig {
  std::uint64_t seed = 1;
  std::size_t classes = 10;
  std::size_t per_class = 500;
  std::size_t size = 28;
  Split split = Split::Train;
};

/// Procedural dataset of single-channel geometric primitives (disk, square,
/// triangle, plus, ring, frame, saltire, diamond, horizontal bars, vertical
/// bars) with random position, scale and intensity plus uniform noise of
/// magnitude at most 0.05. Image i of class c depends only on
/// (seed, split, c, i). Images are interleaved by index, then class.
Dataset generate_shapes(const ShapesConfig& config);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, CountMismatch, Truncated };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads an IDX3 image file (magic 0x00000803) and an IDX1 label file
/// (magic 0x00000801). Bytes are scaled to [0,1] by division by 255; the
/// class count is one more than the largest label.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, Split split = Split::Test);

/// Writes a single-channel dataset as an IDX pair, quantizing pixels to
/// round(p * 255).
void save_idx(const Dataset& dataset, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

}  // namespace advrl
