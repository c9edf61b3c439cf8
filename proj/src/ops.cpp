#include "advrl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace advrl::ops {
namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

template <typename F>
Tensor elementwise(const char* op, const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  if (is_scalar(b)) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[0]);
    return out;
  }
  if (is_scalar(a)) {
    Tensor out(b.shape());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = f(a[0], b[i]);
    return out;
  }
  mismatch(op, a, b);
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise("add", a, b, [](double x, double y) { return x + y; });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  return elementwise("multiply", a, b, [](double x, double y) { return x * y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0))
    mismatch("matmul", a, b);
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
  Tensor out(b.rank() == 2 ? Shape{m, n} : Shape{m});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double av = pa[i * k + j];
      const double* brow = pb + j * n;
      double* orow = po + i * n;
      for (std::size_t c = 0; c < n; ++c) orow[c] += av * brow[c];
    }
  }
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank("conv2d", input, 3);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const std::size_t outs = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != channels || weight.dim(3) != k || k % 2 == 0)
    mismatch("conv2d", input, weight);
  if (bias.dim(0) != outs) mismatch("conv2d", weight, bias);

  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  Tensor out(Shape{outs, height, width});
  const double* px = input.data().data();
  const double* pw = weight.data().data();
  double* po = out.data().data();
  for (std::size_t o = 0; o < outs; ++o) {
    double* plane = po + o * height * width;
    std::fill(plane, plane + height * width, bias[o]);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* src = px + c * height * width;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = pw[((o * channels + c) * k + ky) * k + kx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, w - dx);
          for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, -dy);
               y < std::min<std::ptrdiff_t>(h, h - dy); ++y) {
            const double* srow = src + (y + dy) * w + dx;
            double* orow = plane + y * w;
            for (std::ptrdiff_t x = x0; x < x1; ++x) orow[x] += wv * srow[x];
          }
        }
      }
    }
  }
  return out;
}

Tensor max_pool2d(const Tensor& input, std::vector<std::size_t>& winners) {
  require_rank("max_pool2d", input, 3);
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  if (height < 2 || width < 2)
    throw ShapeError("max_pool2d: spatial extent too small in " + to_string(input.shape()));
  const std::size_t oh = height / 2, ow = width / 2;
  Tensor out(Shape{channels, oh, ow});
  winners.assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        std::size_t best = (c * height + 2 * y) * width + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * height + 2 * y + dy) * width + 2 * x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        winners[o] = best;
        out[o] = input[best];
      }
    }
  }
  return out;
}

Tensor max_pool2d(const Tensor& input) {
  std::vector<std::size_t> winners;
  return max_pool2d(input, winners);
}

Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) { return a.reshaped(std::move(shape)); }

Tensor flatten(const Tensor& a) { return a.reshaped(Shape{a.size()}); }

Tensor softmax(const Tensor& logits) {
  require_rank("softmax", logits, 1);
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total;
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  require_rank("cross_entropy", logits, 1);
  if (target >= logits.size())
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " outside " + std::to_string(logits.size()) + " classes");
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  double total = 0.0;
  for (double z : logits.data()) total += std::exp(z - peak);
  return Tensor::scalar(peak + std::log(total) - logits[target]);
}

Tensor sum(const Tensor& a) {
  return Tensor::scalar(std::accumulate(a.data().begin(), a.data().end(), 0.0));
}

}  // namespace advrl::ops
