#pragma once

#include <cstdint>

#include "dtsl/graph.hpp"
#include "dtsl/rng.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

// One 3x3 convolution layer's trainable state.
struct ConvParams {
  Tensor filters;  // [out_channels, in_channels, 3, 3]
  Tensor biases;   // [out_channels]

  static ConvParams zeros(std::size_t out_channels, std::size_t in_channels);
  // He initialization: weights ~ Normal(0, variance 2/fan_in), zero biases.
  static ConvParams he_init(std::size_t out_channels, std::size_t in_channels, Rng& rng);
  std::size_t out_channels() const { return filters.dim(0); }
  std::size_t in_channels() const { return filters.dim(1); }
};

struct DenseParams {
  Tensor weights;  // [out_dim, in_dim]
  Tensor biases;   // [out_dim]

  static DenseParams zeros(std::size_t out_dim, std::size_t in_dim);
  static DenseParams he_init(std::size_t out_dim, std::size_t in_dim, Rng& rng);
  std::size_t out_dim() const { return weights.dim(0); }
  std::size_t in_dim() const { return weights.dim(1); }
};

// Graph-building layer applications. Shapes follow the kernels in ops.hpp.
Var conv2d(DiffGraph& g, Var x, Var filters, Var biases);
Var maxpool2(DiffGraph& g, Var x);
Var relu(DiffGraph& g, Var x);
Var dense(DiffGraph& g, Var x, Var weights, Var biases);
Var softmax(DiffGraph& g, Var x);

// Inverted-dropout mask: entries are 0 with probability rate, else
// 1/(1 - rate). rate must lie in [0, 1).
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng);

// Multiplies by a constant (non-trainable) mask tensor; the randomness is a
// leaf input, so backward stays deterministic.
Var apply_mask(DiffGraph& g, Var x, Tensor mask);

// training && rate > 0: sample a mask and apply it. Otherwise the exact
// identity (returns x unchanged).
Var dropout(DiffGraph& g, Var x, double rate, bool training, Rng& rng);

}  // namespace dtsl
