#include "dtsl/network.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dtsl/errors.hpp"
#include "dtsl/ops.hpp"
#include "dtsl/primitives.hpp"

namespace dtsl {

ForwardShapes forward_shapes(const ArchDescriptor& arch) {
  ForwardShapes s;
  s.trunk_h = arch.max_len / 2 / 2;
  s.trunk_w = arch.embed_dim / 2 / 2;
  s.path_h = s.trunk_h / 2;
  s.path_w = s.trunk_w / 2;
  s.flat = kPathFilterPlan.back() * s.path_h * s.path_w;
  return s;
}

NetworkParams init_network(const ArchDescriptor& arch, std::uint64_t seed) {
  if (arch.num_classes < 2) {
    throw ValueError("init_network: need at least 2 classes, got " + std::to_string(arch.num_classes));
  }
  if (arch.max_len < 8 || arch.embed_dim < 8) {
    throw ValueError("init_network: L and D must be >= 8 so three pooling stages stay valid, got L=" +
                     std::to_string(arch.max_len) + " D=" + std::to_string(arch.embed_dim));
  }
  const ForwardShapes fs = forward_shapes(arch);
  Rng rng(mix_seed({seed}));

  NetworkParams p;
  p.arch = arch;
  std::size_t cin = 1;
  for (std::size_t cout : kSharedFilterPlan) {
    p.shared.push_back(ConvParams::he_init(cout, cin, rng));
    cin = cout;
  }
  auto make_path = [&]() {
    PathParams path;
    std::size_t in = kSharedFilterPlan.back();
    for (std::size_t i = 0; i < kPathFilterPlan.size(); ++i) {
      path.convs[i] = ConvParams::he_init(kPathFilterPlan[i], in, rng);
      in = kPathFilterPlan[i];
    }
    path.head = DenseParams::he_init(arch.num_classes, fs.flat, rng);
    return path;
  };
  p.sup = make_path();
  p.unsup = make_path();
  return p;
}

std::size_t parameter_count(const ArchDescriptor& arch) {
  const ForwardShapes fs = forward_shapes(arch);
  std::size_t count = 0;
  std::size_t cin = 1;
  for (std::size_t cout : kSharedFilterPlan) {
    count += cout * cin * 9 + cout;
    cin = cout;
  }
  std::size_t path = 0;
  std::size_t in = kSharedFilterPlan.back();
  for (std::size_t cout : kPathFilterPlan) {
    path += cout * in * 9 + cout;
    in = cout;
  }
  path += arch.num_classes * fs.flat + arch.num_classes;
  return count + 2 * path;
}

namespace {

template <typename Params, typename Fn>
void visit_impl(Params& p, const Fn& fn) {
  for (std::size_t i = 0; i < p.shared.size(); ++i) {
    fn(p.shared[i].filters, "shared.conv" + std::to_string(i) + ".filters");
    fn(p.shared[i].biases, "shared.conv" + std::to_string(i) + ".biases");
  }
  auto visit_path = [&fn](auto& path, const std::string& prefix) {
    for (std::size_t i = 0; i < path.convs.size(); ++i) {
      fn(path.convs[i].filters, prefix + ".conv" + std::to_string(i) + ".filters");
      fn(path.convs[i].biases, prefix + ".conv" + std::to_string(i) + ".biases");
    }
    fn(path.head.weights, prefix + ".head.weights");
    fn(path.head.biases, prefix + ".head.biases");
  };
  visit_path(p.sup, "sup");
  visit_path(p.unsup, "unsup");
}

}  // namespace

void visit_tensors(NetworkParams& p, const std::function<void(Tensor&, const std::string&)>& fn) {
  visit_impl(p, fn);
}

void visit_tensors(const NetworkParams& p, const std::function<void(const Tensor&, const std::string&)>& fn) {
  visit_impl(p, fn);
}

std::vector<Tensor*> tensor_list(NetworkParams& p) {
  std::vector<Tensor*> out;
  visit_tensors(p, [&out](Tensor& t, const std::string&) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> tensor_list(const NetworkParams& p) {
  std::vector<const Tensor*> out;
  visit_tensors(p, [&out](const Tensor& t, const std::string&) { out.push_back(&t); });
  return out;
}

std::vector<std::string> tensor_names(const NetworkParams& p) {
  std::vector<std::string> out;
  visit_tensors(p, [&out](const Tensor&, const std::string& name) { out.push_back(name); });
  return out;
}

namespace {

void check_batch_shape(const Tensor& batch, const ArchDescriptor& arch) {
  if (batch.rank() != 4 || batch.dim(1) != 1) {
    throw ShapeError("two-path forward: batch must be [B,1,L,D], got " + shape_to_string(batch.shape()));
  }
  if (batch.dim(2) != arch.max_len || batch.dim(3) != arch.embed_dim) {
    throw ShapeError("two-path forward: batch " + shape_to_string(batch.shape()) + " does not match architecture L=" +
                     std::to_string(arch.max_len) + " D=" + std::to_string(arch.embed_dim));
  }
}

Tensor slice_rows(const Tensor& batch, std::size_t r0, std::size_t r1) {
  const std::size_t stride = batch.size() / batch.dim(0);
  Shape s = batch.shape();
  s[0] = r1 - r0;
  Tensor out(std::move(s));
  std::memcpy(out.data(), batch.data() + r0 * stride, (r1 - r0) * stride * sizeof(double));
  return out;
}

}  // namespace

TwoPathGraph build_two_path_graph(const Tensor& batch, const NetworkParams& params, const Tensor* sup_mask,
                                  const Tensor* unsup_mask, bool recording) {
  check_batch_shape(batch, params.arch);
  const ForwardShapes fs = forward_shapes(params.arch);
  const std::size_t b = batch.dim(0);

  TwoPathGraph out;
  out.graph = DiffGraph(recording);
  DiffGraph& g = out.graph;

  // Parameter leaves in canonical order, then an index into them.
  visit_tensors(params,
                [&](const Tensor& t, const std::string& name) { out.param_vars.push_back(g.leaf(t, true, name)); });
  std::size_t next = 0;
  auto take = [&]() { return out.param_vars[next++]; };

  Var x = g.leaf(batch, false, "input");
  for (std::size_t i = 0; i < params.shared.size(); ++i) {
    Var w = take();
    Var bias = take();
    x = relu(g, conv2d(g, x, w, bias));
    if (i == 2 || i == 5) x = maxpool2(g, x);
  }

  auto run_path = [&](const Tensor* mask) {
    Var h = x;
    for (std::size_t i = 0; i < kPathFilterPlan.size(); ++i) {
      Var w = take();
      Var bias = take();
      h = relu(g, conv2d(g, h, w, bias));
    }
    h = maxpool2(g, h);
    h = reshape(g, h, {b, fs.flat});
    if (mask != nullptr) h = apply_mask(g, h, *mask);
    Var w = take();
    Var bias = take();
    return dense(g, h, w, bias);
  };
  out.z = run_path(sup_mask);
  out.z_prime = run_path(unsup_mask);
  return out;
}

std::size_t auto_chunk(const ArchDescriptor& arch, bool training, std::size_t mem_budget_bytes) {
  const std::size_t ld = arch.max_len * arch.embed_dim;
  const ForwardShapes fs = forward_shapes(arch);
  // Node values per sample: conv+relu pairs plus pool outputs.
  std::size_t values = 2 * 3 * kSharedFilterPlan[0] * ld + kSharedFilterPlan[2] * (ld / 4);
  values += 2 * 3 * kSharedFilterPlan[3] * (ld / 4) + kSharedFilterPlan[5] * (ld / 16);
  std::size_t path = 0;
  for (std::size_t c : kPathFilterPlan) path += 2 * c * (ld / 16);
  path += kPathFilterPlan.back() * (ld / 64) + 3 * fs.flat;
  values += 2 * path;
  // im2col / col2im scratch, dominated by the 128->128 convolutions.
  const std::size_t scratch = (training ? 3 : 2) * 1152 * ld;
  const std::size_t per_sample = (training ? 2 : 1) * values + scratch;
  const std::size_t chunk = mem_budget_bytes / sizeof(double) / per_sample;
  return std::max<std::size_t>(1, std::min<std::size_t>(chunk, 1024));
}

TwoPathOutput forward_two_path(const Tensor& batch, const NetworkParams& params, Mode mode, std::uint64_t seed,
                               double dropout_rate) {
  check_batch_shape(batch, params.arch);
  const ForwardShapes fs = forward_shapes(params.arch);
  const std::size_t b = batch.dim(0);
  const bool training = mode == Mode::kTraining;

  Tensor sup_mask, unsup_mask;
  if (training && dropout_rate > 0.0) {
    Rng sup_rng(mix_seed({seed, 0}));
    Rng unsup_rng(mix_seed({seed, 1}));
    sup_mask = dropout_mask({b, fs.flat}, dropout_rate, sup_rng);
    unsup_mask = dropout_mask({b, fs.flat}, dropout_rate, unsup_rng);
  }

  TwoPathOutput out{Tensor({b, params.arch.num_classes}), Tensor({b, params.arch.num_classes})};
  const std::size_t chunk = auto_chunk(params.arch, false, kDefaultMemBudget);
  const std::size_t c = params.arch.num_classes;
  for (std::size_t r0 = 0; r0 < b; r0 += chunk) {
    const std::size_t r1 = std::min(b, r0 + chunk);
    Tensor rows = slice_rows(batch, r0, r1);
    Tensor sup_rows, unsup_rows;
    const Tensor* sp = nullptr;
    const Tensor* up = nullptr;
    if (!sup_mask.empty()) {
      sup_rows = slice_rows(sup_mask, r0, r1);
      unsup_rows = slice_rows(unsup_mask, r0, r1);
      sp = &sup_rows;
      up = &unsup_rows;
    }
    TwoPathGraph fwd = build_two_path_graph(rows, params, sp, up, /*recording=*/false);
    std::memcpy(out.z.data() + r0 * c, fwd.graph.value(fwd.z).data(), (r1 - r0) * c * sizeof(double));
    std::memcpy(out.z_prime.data() + r0 * c, fwd.graph.value(fwd.z_prime).data(), (r1 - r0) * c * sizeof(double));
  }
  return out;
}

std::vector<std::size_t> predict(const Tensor& batch, const NetworkParams& params) {
  TwoPathOutput out = forward_two_path(batch, params, Mode::kInference, 0);
  Tensor probs = ops::softmax_rows(out.z);
  const std::size_t c = params.arch.num_classes;
  std::vector<std::size_t> labels(batch.dim(0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = probs.data() + i * c;
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (row[j] > row[best]) best = j;
    }
    labels[i] = best;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'T', 'S', 'L'};

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(os, b, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(os, b, 8);
}

void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) throw IoError("truncated checkpoint");
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  read_bytes(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  read_bytes(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u64(os, t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) write_u64(os, t.dim(i));
  write_u64(os, t.size());
  std::vector<unsigned char> buf(t.size() * 8);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(t[i]);
    for (int k = 0; k < 8; ++k) buf[i * 8 + k] = static_cast<unsigned char>((v >> (8 * k)) & 0xff);
  }
  write_bytes(os, buf.data(), buf.size());
}

void read_tensor_into(std::istream& is, Tensor& t, const std::string& name) {
  const std::uint64_t rank = read_u64(is);
  if (rank > 8) throw IoError("corrupt checkpoint: absurd tensor rank for '" + name + "'");
  Shape shape(rank);
  for (std::uint64_t i = 0; i < rank; ++i) shape[i] = read_u64(is);
  const std::uint64_t n = read_u64(is);
  if (shape != t.shape() || n != t.size()) {
    throw IoError("checkpoint tensor '" + name + "' has shape " + shape_to_string(shape) + ", expected " +
                  shape_to_string(t.shape()));
  }
  std::vector<unsigned char> buf(n * 8);
  read_bytes(is, buf.data(), buf.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(buf[i * 8 + k]) << (8 * k);
    t[i] = std::bit_cast<double>(v);
  }
}

NetworkParams zero_params(const ArchDescriptor& arch) {
  const ForwardShapes fs = forward_shapes(arch);
  NetworkParams p;
  p.arch = arch;
  std::size_t cin = 1;
  for (std::size_t cout : kSharedFilterPlan) {
    p.shared.push_back(ConvParams::zeros(cout, cin));
    cin = cout;
  }
  auto make_path = [&]() {
    PathParams path;
    std::size_t in = kSharedFilterPlan.back();
    for (std::size_t i = 0; i < kPathFilterPlan.size(); ++i) {
      path.convs[i] = ConvParams::zeros(kPathFilterPlan[i], in);
      in = kPathFilterPlan[i];
    }
    path.head = DenseParams::zeros(arch.num_classes, fs.flat);
    return path;
  };
  p.sup = make_path();
  p.unsup = make_path();
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params, const AdamState& optimizer,
                     std::uint64_t epoch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_bytes(os, kMagic, 4);
  write_u32(os, Checkpoint::kVersion);
  write_u32(os, static_cast<std::uint32_t>(params.arch.max_len));
  write_u32(os, static_cast<std::uint32_t>(params.arch.embed_dim));
  write_u32(os, static_cast<std::uint32_t>(params.arch.num_classes));
  write_u32(os, static_cast<std::uint32_t>(kSharedFilterPlan.size()));
  for (std::size_t f : kSharedFilterPlan) write_u32(os, static_cast<std::uint32_t>(f));
  write_u32(os, static_cast<std::uint32_t>(kPathFilterPlan.size()));
  for (std::size_t f : kPathFilterPlan) write_u32(os, static_cast<std::uint32_t>(f));

  const auto tensors = tensor_list(params);
  write_u64(os, tensors.size());
  for (const Tensor* t : tensors) write_tensor(os, *t);

  write_f64(os, optimizer.config.lr);
  write_f64(os, optimizer.config.beta1);
  write_f64(os, optimizer.config.beta2);
  write_f64(os, optimizer.config.eps);
  write_u64(os, optimizer.step_count);
  if (optimizer.m.size() != tensors.size() || optimizer.v.size() != tensors.size()) {
    throw ValueError("optimizer state does not cover all parameter tensors");
  }
  for (const Tensor& t : optimizer.m) write_tensor(os, t);
  for (const Tensor& t : optimizer.v) write_tensor(os, t);
  write_u64(os, epoch);
  if (!os) throw IoError("failed writing checkpoint to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[4];
  read_bytes(is, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("'" + path + "' is not a DTSL checkpoint");
  const std::uint32_t version = read_u32(is);
  if (version != Checkpoint::kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(Checkpoint::kVersion) + ")");
  }
  ArchDescriptor arch;
  arch.max_len = read_u32(is);
  arch.embed_dim = read_u32(is);
  arch.num_classes = read_u32(is);
  const std::uint32_t n_shared = read_u32(is);
  bool plan_ok = n_shared == kSharedFilterPlan.size();
  for (std::uint32_t i = 0; i < n_shared; ++i) {
    const std::uint32_t f = read_u32(is);
    plan_ok = plan_ok && i < kSharedFilterPlan.size() && f == kSharedFilterPlan[i];
  }
  const std::uint32_t n_path = read_u32(is);
  plan_ok = plan_ok && n_path == kPathFilterPlan.size();
  for (std::uint32_t i = 0; i < n_path; ++i) {
    const std::uint32_t f = read_u32(is);
    plan_ok = plan_ok && i < kPathFilterPlan.size() && f == kPathFilterPlan[i];
  }
  if (!plan_ok) throw IoError("checkpoint filter plan does not match this build");

  Checkpoint ckpt;
  ckpt.params = zero_params(arch);
  auto tensors = tensor_list(ckpt.params);
  auto names = tensor_names(ckpt.params);
  const std::uint64_t n_tensors = read_u64(is);
  if (n_tensors != tensors.size()) {
    throw IoError("checkpoint holds " + std::to_string(n_tensors) + " tensors, expected " +
                  std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) read_tensor_into(is, *tensors[i], names[i]);

  AdamConfig cfg;
  cfg.lr = read_f64(is);
  cfg.beta1 = read_f64(is);
  cfg.beta2 = read_f64(is);
  cfg.eps = read_f64(is);
  std::vector<const Tensor*> shapes(tensors.begin(), tensors.end());
  ckpt.optimizer = AdamState::init(shapes, names, cfg);
  ckpt.optimizer.step_count = read_u64(is);
  for (std::size_t i = 0; i < tensors.size(); ++i) read_tensor_into(is, ckpt.optimizer.m[i], names[i] + ".m");
  for (std::size_t i = 0; i < tensors.size(); ++i) read_tensor_into(is, ckpt.optimizer.v[i], names[i] + ".v");
  ckpt.epoch = read_u64(is);
  is.peek();
  if (!is.eof()) throw IoError("trailing bytes after checkpoint payload in '" + path + "'");
  return ckpt;
}

}  // namespace dtsl
