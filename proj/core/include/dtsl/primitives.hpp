#pragma once

#include <cstddef>
#include <vector>

#include "dtsl/graph.hpp"
#include "dtsl/tensor.hpp"

// Elementwise and reduction primitives on graph nodes. Each registers its
// backward rule when the graph is recording.
namespace dtsl {

Var identity(DiffGraph& g, Var a);
Var add(DiffGraph& g, Var a, Var b);
Var sub(DiffGraph& g, Var a, Var b);
Var mul(DiffGraph& g, Var a, Var b);
Var scale(DiffGraph& g, Var a, double c);
Var sum(DiffGraph& g, Var a);                    // -> scalar [1]
Var log_shift(DiffGraph& g, Var a, double eps);  // ln(x + eps), entries must stay positive
Var reshape(DiffGraph& g, Var a, Shape shape);

// Weighted sum of selected matrix entries: sum_e weight_e * a[row_e, col_e].
struct WeightedEntry {
  std::size_t row;
  std::size_t col;
  double weight;
};
Var select_weighted_sum(DiffGraph& g, Var a, std::vector<WeightedEntry> entries);

}  // namespace dtsl
