#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dtsl/errors.hpp"
#include "dtsl/network.hpp"
#include "dtsl/objective.hpp"
#include "dtsl/rng.hpp"

using namespace dtsl;

namespace {

Tensor random_batch(std::size_t b, const ArchDescriptor& arch, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({b, 1, arch.max_len, arch.embed_dim});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

const ArchDescriptor kTiny{8, 8, 2};

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / (std::string("dtsl_test_") + name);
}

bool params_bitwise_equal(const NetworkParams& a, const NetworkParams& b) {
  const auto ta = tensor_list(a), tb = tensor_list(b);
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (ta[k]->shape() != tb[k]->shape()) return false;
    for (std::size_t i = 0; i < ta[k]->size(); ++i) {
      if ((*ta[k])[i] != (*tb[k])[i]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("initialization is deterministic in the seed") {
  const NetworkParams a = init_network(kTiny, 9);
  const NetworkParams b = init_network(kTiny, 9);
  const NetworkParams c = init_network(kTiny, 10);
  CHECK(params_bitwise_equal(a, b));
  CHECK_FALSE(params_bitwise_equal(a, c));
}

TEST_CASE("initialization rejects degenerate architectures") {
  CHECK_THROWS_AS(init_network({4, 100, 2}, 1), ValueError);
  CHECK_THROWS_AS(init_network({64, 4, 2}, 1), ValueError);
  CHECK_THROWS_AS(init_network({64, 100, 1}, 1), ValueError);
}

TEST_CASE("He-initialized weight variance matches 2/fan_in") {
  const NetworkParams p = init_network(kTiny, 123);
  const Tensor& filters = p.sup.convs[0].filters;  // 512 x 256 x 3 x 3
  CHECK(filters.dim(0) == 512);
  double mean = 0.0;
  for (std::size_t i = 0; i < filters.size(); ++i) mean += filters[i];
  mean /= static_cast<double>(filters.size());
  double var = 0.0;
  for (std::size_t i = 0; i < filters.size(); ++i) var += (filters[i] - mean) * (filters[i] - mean);
  var /= static_cast<double>(filters.size());
  const double expected = 2.0 / (256.0 * 9.0);
  CHECK(var == doctest::Approx(expected).epsilon(0.10));
  for (std::size_t i = 0; i < p.shared[0].biases.size(); ++i) CHECK(p.shared[0].biases[i] == 0.0);
}

TEST_CASE("figure plan filter counts") {
  const NetworkParams p = init_network(kTiny, 5);
  REQUIRE(p.shared.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(p.shared[i].out_channels() == kSharedFilterPlan[i]);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p.sup.convs[i].out_channels() == kPathFilterPlan[i]);
    CHECK(p.unsup.convs[i].out_channels() == kPathFilterPlan[i]);
  }
  CHECK(p.sup.convs[0].filters.dim(2) == 3);
  CHECK(p.sup.convs[0].filters.dim(3) == 3);
}

TEST_CASE("shape plan for the reference architecture") {
  const ArchDescriptor arch{64, 100, 2};
  const ForwardShapes fs = forward_shapes(arch);
  CHECK(fs.trunk_h == 16);
  CHECK(fs.trunk_w == 25);
  CHECK(fs.path_h == 8);
  CHECK(fs.path_w == 12);
  CHECK(fs.flat == 12288);

  // Hand count: shared 1280 + 2*147584 + 295168 + 2*590080 = 1,771,776;
  // each path 1,180,160 + 1,179,904 + 295,040 + (2*12288 + 2) = 2,679,682.
  CHECK(parameter_count(arch) == 1771776 + 2 * 2679682);
  CHECK(parameter_count(arch) == 7131140);
}

TEST_CASE("equal path parameters give identical outputs") {
  NetworkParams p = init_network(kTiny, 21);
  p.unsup = p.sup;
  const Tensor batch = random_batch(3, kTiny, 77);
  const TwoPathOutput out = forward_two_path(batch, p, Mode::kInference, 0);
  for (std::size_t i = 0; i < out.z.size(); ++i) CHECK(out.z[i] == out.z_prime[i]);
  CHECK(consistency_loss(out.z, out.z_prime) == 0.0);
}

TEST_CASE("inference is deterministic") {
  const NetworkParams p = init_network(kTiny, 22);
  const Tensor batch = random_batch(2, kTiny, 78);
  const TwoPathOutput a = forward_two_path(batch, p, Mode::kInference, 1);
  const TwoPathOutput b = forward_two_path(batch, p, Mode::kInference, 999);
  for (std::size_t i = 0; i < a.z.size(); ++i) {
    CHECK(a.z[i] == b.z[i]);
    CHECK(a.z_prime[i] == b.z_prime[i]);
  }
}

TEST_CASE("recording does not change the forward values") {
  const NetworkParams p = init_network(kTiny, 23);
  const Tensor batch = random_batch(1, kTiny, 79);
  const TwoPathGraph recorded = build_two_path_graph(batch, p, nullptr, nullptr, true);
  const TwoPathGraph plain = build_two_path_graph(batch, p, nullptr, nullptr, false);
  for (std::size_t i = 0; i < p.arch.num_classes; ++i) {
    CHECK(recorded.graph.value(recorded.z)[i] == plain.graph.value(plain.z)[i]);
    CHECK(recorded.graph.value(recorded.z_prime)[i] == plain.graph.value(plain.z_prime)[i]);
  }
}

TEST_CASE("gradients reach all three parameter sets") {
  const NetworkParams p = init_network(kTiny, 24);
  const Tensor batch = random_batch(2, kTiny, 80);
  TwoPathGraph fwd = build_two_path_graph(batch, p, nullptr, nullptr, true);
  const BatchLabels labels{std::optional<std::size_t>{0}, std::nullopt};
  fwd.graph.backward(total_loss_graph(fwd.graph, fwd.z, fwd.z_prime, labels, 0.5, 2));

  const auto names = tensor_names(p);
  bool shared_hit = false, sup_hit = false, unsup_hit = false;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (!fwd.graph.has_grad(fwd.param_vars[k])) continue;
    const Tensor& grad = fwd.graph.grad(fwd.param_vars[k]);
    bool nonzero = false;
    for (std::size_t i = 0; i < grad.size(); ++i) nonzero = nonzero || grad[i] != 0.0;
    if (!nonzero) continue;
    if (names[k].starts_with("shared.")) shared_hit = true;
    if (names[k].starts_with("sup.")) sup_hit = true;
    if (names[k].starts_with("unsup.")) unsup_hit = true;
  }
  CHECK(shared_hit);
  CHECK(sup_hit);
  CHECK(unsup_hit);
}

TEST_CASE("prediction breaks ties toward the lower class") {
  // All-zero parameters force identical logits for every class.
  NetworkParams p = init_network(kTiny, 25);
  for (Tensor* t : tensor_list(p)) t->fill(0.0);
  const Tensor batch = random_batch(3, kTiny, 81);
  for (std::size_t label : predict(batch, p)) CHECK(label == 0);
}

TEST_CASE("checkpoint roundtrip is bitwise") {
  const NetworkParams p = init_network(kTiny, 26);
  AdamState opt = AdamState::init(tensor_list(p), tensor_names(p), AdamConfig{});
  opt.step_count = 17;
  for (Tensor& t : opt.m) t.fill(0.25);
  for (Tensor& t : opt.v) t.fill(0.5);

  const auto path = temp_path("ckpt.bin");
  save_checkpoint(path.string(), p, opt, 50);
  const Checkpoint loaded = load_checkpoint(path.string());

  CHECK(loaded.epoch == 50);
  CHECK(loaded.optimizer.step_count == 17);
  CHECK(loaded.optimizer.config.lr == opt.config.lr);
  CHECK(params_bitwise_equal(p, loaded.params));
  bool moments_equal = true;
  for (std::size_t k = 0; k < opt.m.size(); ++k) {
    for (std::size_t i = 0; i < opt.m[k].size(); ++i) {
      moments_equal = moments_equal && opt.m[k][i] == loaded.optimizer.m[k][i] &&
                      opt.v[k][i] == loaded.optimizer.v[k][i];
    }
  }
  CHECK(moments_equal);

  const Tensor batch = random_batch(2, kTiny, 82);
  const auto before = predict(batch, p);
  const auto after = predict(batch, loaded.params);
  CHECK(before == after);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt and mismatched checkpoints are rejected") {
  const NetworkParams p = init_network(kTiny, 27);
  const AdamState opt = AdamState::init(tensor_list(p), tensor_names(p), AdamConfig{});
  const auto path = temp_path("ckpt_corrupt.bin");
  save_checkpoint(path.string(), p, opt, 3);

  // Truncate to half the size.
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full / 2);
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("truncated"), IoError);

  // Wrong magic.
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE this is not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path.string()), IoError);

  // Wrong version: patch the little-endian u32 after the magic.
  save_checkpoint(path.string(), p, opt, 3);
  {
    std::fstream os(path, std::ios::binary | std::ios::in | std::ios::out);
    os.seekp(4);
    const char bumped = 9;
    os.write(&bumped, 1);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()), doctest::Contains("version"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("missing checkpoint file") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dtsl.ckpt"), IoError);
}
