#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "advrl/tensor.hpp"

namespace advrl {

class PgmError : public std::runtime_error {
 public:
  enum class Kind { Io, Malformed };
  PgmError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Pixel p in [0,1] stored as round(p * 255); out-of-range values clamp.
std::uint8_t quantize_pixel(double p);

/// Binary 8-bit PGM (P5, maxval 255). Accepts [1,H,W] or [H,W] tensors.
std::string encode_pgm(const Tensor& image);
/// Decodes a P5 maxval-255 image into a [1,H,W] tensor of values byte/255.
Tensor decode_pgm(const std::string& bytes);

void write_pgm(const Tensor& image, const std::filesystem::path& path);
Tensor read_pgm(const std::filesystem::path& path);

/// Visualization of a perturbation: delta * 10, shifted so its mean sits at
/// mid-grey 0.5, clamped to [0,1].
Tensor difference_image(const Tensor& perturbed, const Tensor& original);

}  // namespace advrl
