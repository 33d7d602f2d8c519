#include "dtsl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

#include "dtsl/errors.hpp"
#include "dtsl/layers.hpp"
#include "dtsl/rng.hpp"

namespace dtsl {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(t_ramp > 0.0)) throw ConfigError("t_ramp must be positive");
  if (w_max.has_value() && *w_max < 0.0) throw ConfigError("w_max must be nonnegative");
  if (arch.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (arch.max_len < 8) throw ConfigError("max_len must be >= 8");
  if (arch.embed_dim < 8) throw ConfigError("embed_dim must be >= 8");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

namespace {

Tensor slice_rows(const Tensor& t, std::size_t r0, std::size_t r1) {
  const std::size_t stride = t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = r1 - r0;
  Tensor out(std::move(s));
  std::memcpy(out.data(), t.data() + r0 * stride, (r1 - r0) * stride * sizeof(double));
  return out;
}

}  // namespace

TrainState train(const CorpusSplit& split, const EmbeddingTable& table, const TrainConfig& config,
                 const TrainHooks& hooks, const Checkpoint* resume) {
  config.validate();
  if (split.size() == 0) throw ValueError("train: empty corpus split");
  if (split.labeled_count() == 0) throw ValueError("train: split has no labeled samples");
  if (table.dim != config.arch.embed_dim) {
    throw ConfigError("embed_dim " + std::to_string(config.arch.embed_dim) + " does not match embedding table (" +
                      std::to_string(table.dim) + ")");
  }

  const std::size_t n = split.size();
  const double labeled_fraction = static_cast<double>(split.labeled_count()) / static_cast<double>(n);
  const RampSchedule schedule{config.w_max.value_or(labeled_fraction), config.t_ramp};
  const ForwardShapes fs = forward_shapes(config.arch);

  TrainState state;
  std::size_t start_epoch = 1;
  if (resume != nullptr) {
    if (resume->params.arch.max_len != config.arch.max_len || resume->params.arch.embed_dim != config.arch.embed_dim ||
        resume->params.arch.num_classes != config.arch.num_classes) {
      throw ConfigError("checkpoint architecture does not match the training configuration");
    }
    state.params = resume->params;
    state.optimizer = resume->optimizer;
    state.epoch = resume->epoch;
    start_epoch = resume->epoch + 1;
  } else {
    state.params = init_network(config.arch, mix_seed({config.seed, 0x1817u}));
    AdamConfig adam{config.lr, config.beta1, config.beta2, config.adam_eps};
    state.optimizer = AdamState::init(tensor_list(std::as_const(state.params)), tensor_names(state.params), adam);
  }

  auto params_ptrs = tensor_list(state.params);
  std::vector<Tensor> grads;
  grads.reserve(params_ptrs.size());
  for (const Tensor* p : params_ptrs) grads.emplace_back(p->shape());
  std::vector<const Tensor*> grad_ptrs;
  for (const Tensor& gt : grads) grad_ptrs.push_back(&gt);

  const std::size_t chunk = auto_chunk(config.arch, /*training=*/true, config.mem_budget);

  for (std::size_t t = start_epoch; t <= config.epochs; ++t) {
    const auto epoch_start = std::chrono::steady_clock::now();
    // w(t) is held constant within the epoch; the ramp argument is the
    // completed-epoch count.
    const double ramp_t = static_cast<double>(t - 1);
    const double w_t = ramp_weight(ramp_t, schedule);

    const auto plan = batch_index_plan(n, config.batch_size, config.seed, t);
    double sum_l = 0.0, sum_lp = 0.0;

    for (std::size_t batch_idx = 0; batch_idx < plan.size(); ++batch_idx) {
      const Minibatch mb = assemble_minibatch(split, table, config.arch.max_len, plan[batch_idx]);
      const std::size_t b = plan[batch_idx].size();

      Tensor sup_mask, unsup_mask;
      if (config.dropout > 0.0) {
        const std::uint64_t mask_seed = mix_seed({config.seed, t, batch_idx});
        Rng sup_rng(mix_seed({mask_seed, 0}));
        Rng unsup_rng(mix_seed({mask_seed, 1}));
        sup_mask = dropout_mask({b, fs.flat}, config.dropout, sup_rng);
        unsup_mask = dropout_mask({b, fs.flat}, config.dropout, unsup_rng);
      }

      for (Tensor& gt : grads) gt.fill(0.0);
      Tensor z_batch({b, config.arch.num_classes});
      Tensor zp_batch({b, config.arch.num_classes});
      const std::size_t c = config.arch.num_classes;

      auto run_batch = [&]() {
        for (std::size_t r0 = 0; r0 < b; r0 += chunk) {
          const std::size_t r1 = std::min(b, r0 + chunk);
          const Tensor rows = slice_rows(mb.x, r0, r1);
          Tensor sup_rows, unsup_rows;
          const Tensor* sp = nullptr;
          const Tensor* up = nullptr;
          if (!sup_mask.empty()) {
            sup_rows = slice_rows(sup_mask, r0, r1);
            unsup_rows = slice_rows(unsup_mask, r0, r1);
            sp = &sup_rows;
            up = &unsup_rows;
          }
          BatchLabels chunk_labels(mb.labels.begin() + static_cast<std::ptrdiff_t>(r0),
                                   mb.labels.begin() + static_cast<std::ptrdiff_t>(r1));
          bool any_labeled = false;
          for (const auto& lbl : chunk_labels) any_labeled = any_labeled || lbl.has_value();
          const bool needs_grads = any_labeled || w_t != 0.0;

          TwoPathGraph fwd = build_two_path_graph(rows, state.params, sp, up, needs_grads);
          std::memcpy(z_batch.data() + r0 * c, fwd.graph.value(fwd.z).data(), (r1 - r0) * c * sizeof(double));
          std::memcpy(zp_batch.data() + r0 * c, fwd.graph.value(fwd.z_prime).data(),
                      (r1 - r0) * c * sizeof(double));
          if (!needs_grads) continue;

          const Var loss = total_loss_graph(fwd.graph, fwd.z, fwd.z_prime, chunk_labels, w_t, b);
          if (!fwd.graph.requires_grad(loss)) continue;
          fwd.graph.backward(loss);
          for (std::size_t k = 0; k < grads.size(); ++k) {
            if (!fwd.graph.has_grad(fwd.param_vars[k])) continue;
            const Tensor& gk = fwd.graph.grad(fwd.param_vars[k]);
            Tensor& acc = grads[k];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gk[i];
          }
        }
        const LossBreakdown breakdown = total_loss(z_batch, zp_batch, mb.labels, ramp_t, schedule);
        if (!std::isfinite(breakdown.total)) {
          throw ValueError("non-finite total (l=" + std::to_string(breakdown.l) +
                           ", l'=" + std::to_string(breakdown.l_prime) + ", w=" + std::to_string(breakdown.w) +
                           ")");
        }
        return breakdown;
      };

      LossBreakdown breakdown;
      try {
        breakdown = run_batch();
        adam_step(params_ptrs, grad_ptrs, state.optimizer);
      } catch (const std::exception& e) {
        throw Error("training aborted at epoch " + std::to_string(t) + ", batch " + std::to_string(batch_idx) +
                    ": " + e.what());
      }
      sum_l += breakdown.l;
      sum_lp += breakdown.l_prime;
    }

    EpochRecord rec;
    rec.epoch = t;
    rec.loss.l = sum_l / static_cast<double>(plan.size());
    rec.loss.l_prime = sum_lp / static_cast<double>(plan.size());
    rec.loss.w = w_t;
    rec.loss.total = rec.loss.l + w_t * rec.loss.l_prime;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_start).count();
    state.epoch = t;
    state.history.push_back(rec);

    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
    if (hooks.stop_early && hooks.stop_early(state)) break;
  }
  return state;
}

}  // namespace dtsl
