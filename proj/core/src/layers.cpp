#include "dtsl/layers.hpp"

#include <cmath>
#include <memory>

#include "dtsl/errors.hpp"
#include "dtsl/ops.hpp"
#include "dtsl/primitives.hpp"

namespace dtsl {

ConvParams ConvParams::zeros(std::size_t out_channels, std::size_t in_channels) {
  return ConvParams{Tensor({out_channels, in_channels, 3, 3}), Tensor({out_channels})};
}

ConvParams ConvParams::he_init(std::size_t out_channels, std::size_t in_channels, Rng& rng) {
  ConvParams p = zeros(out_channels, in_channels);
  const double sd = std::sqrt(2.0 / (static_cast<double>(in_channels) * 9.0));
  for (std::size_t i = 0; i < p.filters.size(); ++i) p.filters[i] = sd * rng.normal();
  return p;
}

DenseParams DenseParams::zeros(std::size_t out_dim, std::size_t in_dim) {
  if (out_dim < 1) throw ShapeError("dense layer needs out_dim >= 1");
  return DenseParams{Tensor({out_dim, in_dim}), Tensor({out_dim})};
}

DenseParams DenseParams::he_init(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
  DenseParams p = zeros(out_dim, in_dim);
  const double sd = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] = sd * rng.normal();
  return p;
}

Var conv2d(DiffGraph& g, Var x, Var filters, Var biases) {
  Tensor y = ops::conv2d(g.value(x), g.value(filters), g.value(biases));
  return g.push("conv2d", std::move(y), {x, filters, biases},
                [x, filters, biases](DiffGraph& g, const Tensor&, const Tensor& dy) {
                  Tensor* dx = g.wants_grad(x) ? &g.grad_accum(x) : nullptr;
                  Tensor* dw = g.wants_grad(filters) ? &g.grad_accum(filters) : nullptr;
                  Tensor* db = g.wants_grad(biases) ? &g.grad_accum(biases) : nullptr;
                  ops::conv2d_backward(g.value(x), g.value(filters), dy, dx, dw, db);
                });
}

Var maxpool2(DiffGraph& g, Var x) {
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  Tensor y = ops::maxpool2(g.value(x), argmax.get());
  return g.push("maxpool2", std::move(y), {x}, [x, argmax](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(x)) return;
    ops::maxpool2_backward(*argmax, dy, g.grad_accum(x));
  });
}

Var relu(DiffGraph& g, Var x) {
  Tensor y = ops::relu(g.value(x));
  return g.push("relu", std::move(y), {x}, [x](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(x)) return;
    ops::relu_backward(g.value(x), dy, g.grad_accum(x));
  });
}

Var dense(DiffGraph& g, Var x, Var weights, Var biases) {
  Tensor y = ops::dense(g.value(x), g.value(weights), g.value(biases));
  return g.push("dense", std::move(y), {x, weights, biases},
                [x, weights, biases](DiffGraph& g, const Tensor&, const Tensor& dy) {
                  Tensor* dx = g.wants_grad(x) ? &g.grad_accum(x) : nullptr;
                  Tensor* dw = g.wants_grad(weights) ? &g.grad_accum(weights) : nullptr;
                  Tensor* db = g.wants_grad(biases) ? &g.grad_accum(biases) : nullptr;
                  ops::dense_backward(g.value(x), g.value(weights), dy, dx, dw, db);
                });
}

Var softmax(DiffGraph& g, Var x) {
  Tensor y = ops::softmax_rows(g.value(x));
  return g.push("softmax", std::move(y), {x}, [x](DiffGraph& g, const Tensor& value, const Tensor& dy) {
    if (!g.wants_grad(x)) return;
    ops::softmax_rows_backward(value, dy, g.grad_accum(x));
  });
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  Tensor mask(shape);
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < keep ? scale : 0.0;
  return mask;
}

Var apply_mask(DiffGraph& g, Var x, Tensor mask) {
  if (!g.value(x).same_shape(mask)) {
    throw ShapeError("dropout mask shape " + shape_to_string(mask.shape()) + " does not match input " +
                     shape_to_string(g.value(x).shape()));
  }
  Var m = g.leaf(std::move(mask), false, "dropout_mask");
  return mul(g, x, m);
}

Var dropout(DiffGraph& g, Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  return apply_mask(g, x, dropout_mask(g.value(x).shape(), rate, rng));
}

}  // namespace dtsl
