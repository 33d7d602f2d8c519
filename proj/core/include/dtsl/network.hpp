#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dtsl/graph.hpp"
#include "dtsl/layers.hpp"
#include "dtsl/optimizer.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

// Fixed filter plan of the three-CNN architecture: a shared trunk of six
// convolutions feeding two structurally identical classification paths.
inline constexpr std::array<std::size_t, 6> kSharedFilterPlan{128, 128, 128, 256, 256, 256};
inline constexpr std::array<std::size_t, 3> kPathFilterPlan{512, 256, 128};

struct ArchDescriptor {
  std::size_t max_len = 64;     // L: token rows per sample
  std::size_t embed_dim = 100;  // D: embedding width
  std::size_t num_classes = 2;  // C
};

struct PathParams {
  std::array<ConvParams, 3> convs;  // 512, 256, 128 filters
  DenseParams head;                 // flattened features -> C logits
};

struct NetworkParams {
  ArchDescriptor arch;
  std::vector<ConvParams> shared;  // 128,128,128,256,256,256 filters
  PathParams sup;
  PathParams unsup;
};

// Spatial bookkeeping through the three pooling stages.
struct ForwardShapes {
  std::size_t trunk_h, trunk_w;  // after the shared trunk (two pools): L/4 x D/4
  std::size_t path_h, path_w;    // after the per-path pool: L/8 x D/8
  std::size_t flat;              // 128 * path_h * path_w
};
ForwardShapes forward_shapes(const ArchDescriptor& arch);

// He-initialized parameters, deterministic in the seed. Requires C >= 2 and
// L, D >= 8 so all three pooling stages stay at least 2x2.
NetworkParams init_network(const ArchDescriptor& arch, std::uint64_t seed);

std::size_t parameter_count(const ArchDescriptor& arch);

// Canonical tensor traversal; this fixed order defines the checkpoint layout,
// the optimizer state layout, and gradient accumulation order:
// shared conv 0..5 (filters, biases), sup conv 0..2, sup head (weights,
// biases), then the unsup path likewise.
void visit_tensors(NetworkParams& p, const std::function<void(Tensor&, const std::string&)>& fn);
void visit_tensors(const NetworkParams& p, const std::function<void(const Tensor&, const std::string&)>& fn);
std::vector<Tensor*> tensor_list(NetworkParams& p);
std::vector<const Tensor*> tensor_list(const NetworkParams& p);
std::vector<std::string> tensor_names(const NetworkParams& p);

enum class Mode { kTraining, kInference };

struct TwoPathOutput {
  Tensor z;        // [B, C] supervised-path logits
  Tensor z_prime;  // [B, C] unsupervised-path logits
};

// One recorded (or plain) evaluation of both paths over a batch slice.
// param_vars follows the canonical tensor order.
struct TwoPathGraph {
  DiffGraph graph{true};
  Var z;
  Var z_prime;
  std::vector<Var> param_vars;
};

// batch: [b, 1, L, D]. Masks, when given, are [b, flat] dropout masks for the
// respective path; nullptr means no dropout (inference or rate 0).
TwoPathGraph build_two_path_graph(const Tensor& batch, const NetworkParams& params, const Tensor* sup_mask,
                                  const Tensor* unsup_mask, bool recording);

// Evaluates both paths over a whole batch, slicing it into memory-bounded
// chunks. In training mode dropout masks are derived from (seed, path);
// inference ignores the seed and is deterministic.
TwoPathOutput forward_two_path(const Tensor& batch, const NetworkParams& params, Mode mode, std::uint64_t seed,
                               double dropout_rate = 0.5);

// argmax over softmax of the supervised-path logits, inference mode; ties go
// to the lower class index.
std::vector<std::size_t> predict(const Tensor& batch, const NetworkParams& params);

// How many samples fit a forward/backward graph within mem_budget_bytes.
std::size_t auto_chunk(const ArchDescriptor& arch, bool training, std::size_t mem_budget_bytes);

inline constexpr std::size_t kDefaultMemBudget = std::size_t{1536} * 1024 * 1024;

// Everything needed to stop and later resume a run: parameters, optimizer
// moments, and the epoch counter.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  NetworkParams params;
  AdamState optimizer;
  std::uint64_t epoch = 0;
};

// Binary layout: magic "DTSL", u32 version, u32 L/D/C, the filter plan, then
// all parameter tensors in canonical order as rank/dims/length-prefixed
// little-endian float64 payloads, Adam hyperparameters + step count + moment
// tensors, and the epoch counter.
void save_checkpoint(const std::string& path, const NetworkParams& params, const AdamState& optimizer,
                     std::uint64_t epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dtsl
