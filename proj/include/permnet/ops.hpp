#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "permnet/tensor.hpp"

namespace permnet {

// Binary elementwise ops accept equal shapes, or one operand whose shape
// (leading 1s stripped) equals the trailing dimensions of the other. The
// smaller operand is repeated over the leading axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& t);
Tensor relu(const Tensor& t);  // subgradient 0 at 0
Tensor elu(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor abs(const Tensor& t);  // subgradient 0 at 0
Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor scale(const Tensor& t, double factor);
Tensor add_scalar(const Tensor& t, double value);
Tensor square(const Tensor& t);

enum class ElementwiseKind { kAdd, kMul, kRelu, kTanh, kAbs, kExp, kLog, kNeg };

// Dispatcher over the kinds above. Binary kinds take two args, unary one.
Tensor elementwise(ElementwiseKind kind, std::span<const Tensor> args);

// (n,k) x (k,m) -> (n,m)
Tensor matmul(const Tensor& a, const Tensor& b);
// x W + b with x (n,k), W (k,m), b (m).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Row r of the result is x[r] (k) times w[r] viewed as a (k, h) matrix;
// x (R,k), w (R,k*h) -> (R,h).
Tensor row_vecmat(const Tensor& x, const Tensor& w);
// (B,n,k) x (B,k,m) -> (B,n,m)
Tensor bmm(const Tensor& a, const Tensor& b);

enum class ReduceKind { kSum, kMax, kMean };

// Removes `axis`. Max routes the gradient to the first maximal element.
Tensor reduce(const Tensor& t, ReduceKind kind, std::size_t axis);
Tensor sum(const Tensor& t, std::size_t axis);
Tensor max(const Tensor& t, std::size_t axis);
Tensor mean(const Tensor& t, std::size_t axis);
Tensor sum_all(const Tensor& t);
Tensor mean_all(const Tensor& t);

// Sum along `axis` whose result depends only on the multiset of values in
// each fibre: the values are added in ascending order. Used by set pooling
// so reordered inputs give bitwise-identical sums.
Tensor set_sum(const Tensor& t, std::size_t axis);

// Stabilised by subtracting the per-fibre maximum. Throws NumericError
// "fully masked logits" if a fibre has no finite entry.
Tensor softmax(const Tensor& t, std::size_t axis);

Tensor reshape(const Tensor& t, Shape shape);
// Swaps the last two axes.
Tensor transpose(const Tensor& t);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor narrow(const Tensor& t, std::size_t axis, std::size_t start, std::size_t length);

// For t of shape (..., n) picks t[..., index[r]] for every leading row r.
Tensor gather_last(const Tensor& t, std::span<const std::size_t> index);

// Rows of t along axis 0, in the given order (repeats allowed).
Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows);

// Entries where mask != 0 are replaced by `value` and receive no gradient.
Tensor masked_fill(const Tensor& t, std::span<const unsigned char> mask, double value);

// Forward value is `forward_value` (no gradient); backward passes the
// incoming gradient unchanged to `surrogate`.
Tensor straight_through(const Tensor& forward_value, const Tensor& surrogate);

}  // namespace permnet
