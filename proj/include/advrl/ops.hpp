#pragma once

#include <cstddef>
#include <vector>

#include "advrl/tensor.hpp"

/// Forward kernels for the differentiable primitives. Each validates its
/// input shapes and throws ShapeError naming the primitive on mismatch.
namespace advrl::ops {

/// Elementwise sum. Operands must share a shape, or one must be a scalar.
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise product with the same broadcasting rule as add.
Tensor multiply(const Tensor& a, const Tensor& b);
/// [m,k] x [k,n] -> [m,n], or [m,k] x [k] -> [m].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation of input [C,H,W] with weight [O,C,k,k] plus bias [O].
/// Stride 1, odd k, zero padding (k-1)/2 so the output is [O,H,W].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// 2x2 stride-2 max pooling over [C,H,W]. Odd trailing rows/columns are
/// dropped. Ties go to the first element in row-major order.
Tensor max_pool2d(const Tensor& input);
/// Same as max_pool2d, also returning the flat input index of each winner.
Tensor max_pool2d(const Tensor& input, std::vector<std::size_t>& winners);

Tensor relu(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
/// Softmax of a rank-1 tensor.
Tensor softmax(const Tensor& logits);
/// -log softmax(logits)[target], computed with log-sum-exp.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
Tensor sum(const Tensor& a);

}  // namespace advrl::ops
