#pragma once

#include <cstddef>
#include <vector>

#include "dtsl/tensor.hpp"

// Pure forward/backward kernels. The graph layers in layers.hpp call these;
// they are also usable (and tested) on their own. Backward kernels accumulate
// (+=) into their destination buffers; pass nullptr to skip a gradient.
namespace dtsl::ops {

// 3x3 convolution, stride 1, zero "same" padding.
// x: [B, Cin, H, W] (rank 3 means a single [Cin, H, W] sample)
// w: [Cout, Cin, 3, 3]; b: [Cout]  ->  y: [B, Cout, H, W] (rank matches x)
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db);

// Non-overlapping 2x2 max pooling, stride 2, trailing odd row/column dropped.
// argmax (flat indices into x) records which input fed each output; on ties
// the first element in row-major window scan order wins.
Tensor maxpool2(const Tensor& x, std::vector<std::size_t>* argmax = nullptr);
void maxpool2_backward(const std::vector<std::size_t>& argmax, const Tensor& dy, Tensor& dx);

Tensor relu(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx);

// Affine map. x: [B, F] or [F]; w: [out, F]; b: [out].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db);

// Row-wise softmax with max subtraction. x: [B, C] or [C], C >= 2.
Tensor softmax_rows(const Tensor& x);
void softmax_rows_backward(const Tensor& y, const Tensor& dy, Tensor& dx);

}  // namespace dtsl::ops
