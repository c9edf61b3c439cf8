#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "advrl/model.hpp"
#include "advrl/tensor.hpp"

namespace testing {

inline advrl::Tensor random_tensor(advrl::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  advrl::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// ||a - b|| / max(||a||, ||b||, floor)
inline double relative_error(const advrl::Tensor& a, const advrl::Tensor& b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Conv-pool-dense network on 8x8 single-channel inputs.
inline advrl::Architecture tiny_architecture(std::size_t classes = 3) {
  using advrl::LayerSpec;
  advrl::Architecture a;
  a.input = {1, 8, 8};
  a.classes = classes;
  a.layers = {LayerSpec::conv(2, 3), LayerSpec::relu(), LayerSpec::max_pool(), LayerSpec::flatten(),
              LayerSpec::dense(6),   LayerSpec::relu(), LayerSpec::dense(classes), LayerSpec::softmax()};
  return a;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("advrl-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
