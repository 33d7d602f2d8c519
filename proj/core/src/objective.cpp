#include "dtsl/objective.hpp"

#include <cmath>

#include "dtsl/errors.hpp"
#include "dtsl/layers.hpp"
#include "dtsl/ops.hpp"
#include "dtsl/primitives.hpp"

namespace dtsl {
namespace {

void check_logits(const Tensor& z, const BatchLabels& labels) {
  if (z.rank() != 2) throw ShapeError("supervised_loss: logits must be [B,C], got " + shape_to_string(z.shape()));
  if (labels.size() != z.dim(0)) {
    throw ShapeError("supervised_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(z.dim(0)) +
                     " rows");
  }
  const std::size_t c = z.dim(1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].has_value() && *labels[i] >= c) {
      throw ValueError("label " + std::to_string(*labels[i]) + " of row " + std::to_string(i) +
                       " is out of range for " + std::to_string(c) + " classes");
    }
  }
}

}  // namespace

double supervised_loss(const Tensor& z, const BatchLabels& labels) {
  check_logits(z, labels);
  const std::size_t b = z.dim(0);
  const std::size_t c = z.dim(1);
  const Tensor probs = ops::softmax_rows(z);
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!labels[i].has_value()) continue;
    acc -= std::log(probs[i * c + *labels[i]] + kLogEps);
  }
  return acc / static_cast<double>(b);
}

double consistency_loss(const Tensor& z, const Tensor& z_prime) {
  if (!z.same_shape(z_prime)) {
    throw ShapeError("consistency_loss: shapes " + shape_to_string(z.shape()) + " and " +
                     shape_to_string(z_prime.shape()) + " differ");
  }
  if (z.rank() != 2) throw ShapeError("consistency_loss: logits must be [B,C], got " + shape_to_string(z.shape()));
  const std::size_t b = z.dim(0);
  const std::size_t c = z.dim(1);
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - z_prime[i];
    acc += d * d;
  }
  return acc / (static_cast<double>(c) * static_cast<double>(b));
}

double ramp_weight(double t, const RampSchedule& schedule) {
  if (!(schedule.t_ramp > 0.0)) throw ValueError("ramp schedule: t_ramp must be positive");
  if (schedule.w_max < 0.0) throw ValueError("ramp schedule: w_max must be nonnegative");
  if (t < 0.0) throw ValueError("ramp_weight: t must be nonnegative");
  const double progress = std::min(t, schedule.t_ramp) / schedule.t_ramp;
  const double gap = 1.0 - progress;
  return schedule.w_max * std::exp(-5.0 * gap * gap);
}

LossBreakdown total_loss(const Tensor& z, const Tensor& z_prime, const BatchLabels& labels, double t,
                         const RampSchedule& schedule) {
  LossBreakdown out;
  out.l = supervised_loss(z, labels);
  out.l_prime = consistency_loss(z, z_prime);
  out.w = ramp_weight(t, schedule);
  out.total = out.l + out.w * out.l_prime;
  return out;
}

Var total_loss_graph(DiffGraph& g, Var z, Var z_prime, const BatchLabels& labels, double w, std::size_t full_batch) {
  check_logits(g.value(z), labels);
  if (!g.value(z).same_shape(g.value(z_prime))) {
    throw ShapeError("total_loss_graph: z and z' shapes differ");
  }
  if (full_batch == 0) throw ValueError("total_loss_graph: empty batch");
  const double inv_b = 1.0 / static_cast<double>(full_batch);
  const std::size_t c = g.value(z).dim(1);

  std::vector<WeightedEntry> picks;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].has_value()) picks.push_back({i, *labels[i], 1.0});
  }

  Var acc{};
  if (!picks.empty()) {
    Var log_probs = log_shift(g, softmax(g, z), kLogEps);
    acc = scale(g, select_weighted_sum(g, log_probs, std::move(picks)), -inv_b);
  }
  if (w != 0.0) {
    Var diff = sub(g, z, z_prime);
    Var cons = scale(g, sum(g, mul(g, diff, diff)), w * inv_b / static_cast<double>(c));
    acc = acc.valid() ? add(g, acc, cons) : cons;
  }
  if (!acc.valid()) acc = g.leaf(Tensor::scalar(0.0), false, "zero_loss");
  return acc;
}

}  // namespace dtsl
