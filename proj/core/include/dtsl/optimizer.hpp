#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtsl/tensor.hpp"

namespace dtsl {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over an ordered list of parameter tensors. Moments are
// held in the same canonical order as the parameter list.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;  // k; incremented once per adam_step call
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::vector<std::string> names;  // for diagnostics

  static AdamState init(const std::vector<const Tensor*>& params, std::vector<std::string> names, AdamConfig config);
};

// One update over all tensors. grads must mirror params in order and shape
// and be finite everywhere; a non-finite gradient raises ValueError naming
// the offending tensor.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state);

}  // namespace dtsl
