#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dtsl/data.hpp"
#include "dtsl/network.hpp"
#include "dtsl/objective.hpp"
#include "dtsl/optimizer.hpp"

namespace dtsl {

struct TrainConfig {
  ArchDescriptor arch;
  std::size_t batch_size = 25;
  std::size_t epochs = 200;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.5;
  // Consistency weight cap; when unset it defaults to the labeled fraction
  // M/N of the split being trained on.
  std::optional<double> w_max;
  double t_ramp = 80.0;
  std::uint64_t seed = 42;
  std::size_t mem_budget = kDefaultMemBudget;

  void validate() const;  // ConfigError naming the offending field
};

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based outer loop counter t
  LossBreakdown loss;        // mean over the epoch's minibatches
  double wall_ms = 0.0;      // the only timing-dependent field
};

struct TrainState {
  std::size_t epoch = 0;  // last completed epoch
  NetworkParams params;
  AdamState optimizer;
  std::vector<EpochRecord> history;  // epochs completed by this call
};

struct TrainHooks {
  std::function<void(const TrainState&)> on_epoch_end;
  // Return true to stop after the current epoch (e.g. once training accuracy
  // reaches a target). Never called when absent.
  std::function<bool(const TrainState&)> stop_early;
};

// Algorithm: per epoch t, per minibatch B: evaluate both paths, form
// l, l', total = l + w(t) * l', and apply one Adam update to all of
// theta_shared, theta_sup, theta_unsup. w is evaluated once per epoch from
// the completed-epoch count (t-1), so training starts at w_max * e^-5.
// Deterministic given the config; aborts with diagnostics on non-finite loss.
TrainState train(const CorpusSplit& split, const EmbeddingTable& table, const TrainConfig& config,
                 const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

}  // namespace dtsl
