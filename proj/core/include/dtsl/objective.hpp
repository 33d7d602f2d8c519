#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dtsl/graph.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

// log(p + kLogEps) guards the cross-entropy against exactly-zero
// probabilities.
inline constexpr double kLogEps = 1e-12;

struct LossBreakdown {
  double l = 0.0;        // supervised component
  double l_prime = 0.0;  // unsupervised (consistency) component
  double w = 0.0;        // ramp-up weight at this epoch
  double total = 0.0;    // l + w * l_prime
};

// Consistency weight schedule: w(t) = w_max * exp(-5 * (1 - min(t,T)/T)^2),
// rising from w_max*e^-5 at t=0 to exactly w_max at t >= t_ramp.
struct RampSchedule {
  double w_max = 1.0;
  double t_ramp = 80.0;
};

using BatchLabels = std::vector<std::optional<std::size_t>>;  // one entry per batch row

// Mean negative log-softmax at the true class over the labeled rows,
// normalized by the full batch size (not the labeled count).
double supervised_loss(const Tensor& z, const BatchLabels& labels);

// Mean squared difference of raw logits over all rows, normalized by C*|B|.
double consistency_loss(const Tensor& z, const Tensor& z_prime);

double ramp_weight(double t, const RampSchedule& schedule);

LossBreakdown total_loss(const Tensor& z, const Tensor& z_prime, const BatchLabels& labels, double t,
                         const RampSchedule& schedule);

// Graph version of one batch slice's contribution to the batch total:
//   -(1/full_batch) sum_{labeled rows} log(softmax(z)[y] + eps)
//   + w/(C*full_batch) * sum ||z - z'||^2.
// Rows of z/z_prime correspond to entries of labels. Returns a scalar node;
// slices of one batch sum to the batch's total loss.
Var total_loss_graph(DiffGraph& g, Var z, Var z_prime, const BatchLabels& labels, double w, std::size_t full_batch);

}  // namespace dtsl
