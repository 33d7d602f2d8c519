#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dtsl/tensor.hpp"

namespace dtsl {

// Central-difference gradient oracle: entry i of the result is
// (f(x + h*e_i) - f(x - h*e_i)) / (2h). Independent of the graph machinery;
// this is what every backward rule is verified against.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
double max_rel_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-4);

struct GradcheckOptions {
  double tolerance = 1e-5;
  double step = 1e-5;  // h
  std::uint64_t seed = 0x9d7c5e31;
  std::size_t repeats = 100;  // random inputs per primitive
};

struct GradcheckResult {
  std::string component;
  double max_rel_error = 0.0;
  bool passed = false;
  std::string note;
};

struct GradcheckReport {
  double tolerance = 0.0;
  std::vector<GradcheckResult> results;
  bool all_passed() const;
};

// A named check; extra components (e.g. deliberately corrupted rules in
// tests) can be appended to the built-in suite.
struct GradcheckComponent {
  std::string name;
  std::function<GradcheckResult(const GradcheckOptions&)> run;
};

// Built-in suite: every layer primitive, the loss compositions, and the full
// two-path total loss on a tiny architecture.
GradcheckReport run_gradcheck(const GradcheckOptions& opts = {},
                              std::span<const GradcheckComponent> extra = {});

}  // namespace dtsl
