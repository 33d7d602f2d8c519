#include "dtsl/gradcheck.hpp"

#include <cmath>

#include "dtsl/errors.hpp"
#include "dtsl/layers.hpp"
#include "dtsl/network.hpp"
#include "dtsl/objective.hpp"
#include "dtsl/primitives.hpp"
#include "dtsl/rng.hpp"

namespace dtsl {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ValueError("finite_difference_gradient: step must be positive");
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double hi = f(probe);
    probe[i] = x[i] - h;
    const double lo = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw ValueError("finite_difference_gradient: non-finite value near entry " + std::to_string(i));
    }
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

double max_rel_error(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (!analytic.same_shape(numeric)) {
    throw ShapeError("max_rel_error: shapes " + shape_to_string(analytic.shape()) + " and " +
                     shape_to_string(numeric.shape()) + " differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), floor});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

bool GradcheckReport::all_passed() const {
  for (const GradcheckResult& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Projects a multi-output op to a scalar with fixed random weights R, so the
// analytic gradient (backward seeded with R) can be compared to finite
// differences of x -> sum(op(x) .* R).
struct ScalarizedCheck {
  // builds the op output node from leaf vars
  std::function<Var(DiffGraph&, const std::vector<Var>&)> apply;
  std::vector<Tensor> inputs;
  Tensor weights;  // R, shaped like the op output
};

double check_scalarized(const ScalarizedCheck& c, const GradcheckOptions& opts) {
  DiffGraph g;
  std::vector<Var> leaves;
  for (const Tensor& t : c.inputs) leaves.push_back(g.leaf(t, true));
  Var out = c.apply(g, leaves);
  Var loss = sum(g, mul(g, out, g.leaf(c.weights, false, "projection")));
  g.backward(loss);

  double worst = 0.0;
  for (std::size_t which = 0; which < c.inputs.size(); ++which) {
    auto f = [&](const Tensor& probe) {
      DiffGraph plain(false);
      std::vector<Var> vars;
      for (std::size_t j = 0; j < c.inputs.size(); ++j) {
        vars.push_back(plain.leaf(j == which ? probe : c.inputs[j], false));
      }
      Var o = c.apply(plain, vars);
      const Tensor& y = plain.value(o);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * c.weights[i];
      return acc;
    };
    const Tensor numeric = finite_difference_gradient(f, c.inputs[which], opts.step);
    const Tensor& analytic =
        g.has_grad(leaves[which]) ? g.grad(leaves[which]) : Tensor(c.inputs[which].shape());
    worst = std::max(worst, max_rel_error(analytic, numeric, 1e-4));
  }
  return worst;
}

GradcheckResult run_repeats(const std::string& name, const std::string& note, const GradcheckOptions& opts,
                            std::size_t repeats,
                            const std::function<ScalarizedCheck(Rng&)>& make) {
  Rng rng(mix_seed({opts.seed, std::hash<std::string>{}(name)}));
  double worst = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const ScalarizedCheck c = make(rng);
    worst = std::max(worst, check_scalarized(c, opts));
  }
  return GradcheckResult{name, worst, worst <= opts.tolerance, note};
}

GradcheckResult check_full_total_loss(const GradcheckOptions& opts) {
  const ArchDescriptor arch{8, 8, 2};
  NetworkParams params = init_network(arch, mix_seed({opts.seed, 77}));
  const ForwardShapes fs = forward_shapes(arch);

  Rng rng(mix_seed({opts.seed, 78}));
  Tensor batch = random_tensor({2, 1, arch.max_len, arch.embed_dim}, rng);
  const BatchLabels labels{std::optional<std::size_t>{1}, std::nullopt};  // one labeled, one unlabeled
  const double w = 0.3;
  Rng mask_rng_sup(mix_seed({opts.seed, 79}));
  Rng mask_rng_unsup(mix_seed({opts.seed, 80}));
  const Tensor sup_mask = dropout_mask({2, fs.flat}, 0.5, mask_rng_sup);
  const Tensor unsup_mask = dropout_mask({2, fs.flat}, 0.5, mask_rng_unsup);

  TwoPathGraph fwd = build_two_path_graph(batch, params, &sup_mask, &unsup_mask, true);
  Var loss = total_loss_graph(fwd.graph, fwd.z, fwd.z_prime, labels, w, 2);
  fwd.graph.backward(loss);

  // Same function evaluated without recording, for the finite differences.
  auto loss_value = [&](const NetworkParams& probe) {
    TwoPathGraph plain = build_two_path_graph(batch, probe, &sup_mask, &unsup_mask, false);
    const Tensor& z = plain.graph.value(plain.z);
    const Tensor& zp = plain.graph.value(plain.z_prime);
    return supervised_loss(z, labels) + w * consistency_loss(z, zp);
  };

  auto tensors = tensor_list(params);
  double worst = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const Tensor& analytic = fwd.graph.grad(fwd.param_vars[t]);
    for (int probe_i = 0; probe_i < 2; ++probe_i) {
      const std::size_t entry = rng.below(tensors[t]->size());
      Tensor& target = *tensors[t];
      const double saved = target[entry];
      target[entry] = saved + opts.step;
      const double hi = loss_value(params);
      target[entry] = saved - opts.step;
      const double lo = loss_value(params);
      target[entry] = saved;
      const double numeric = (hi - lo) / (2.0 * opts.step);
      const double denom = std::max({std::fabs(analytic[entry]), std::fabs(numeric), 1e-4});
      worst = std::max(worst, std::fabs(analytic[entry] - numeric) / denom);
    }
  }
  return GradcheckResult{"eq1_total_loss", worst, worst <= opts.tolerance,
                         "full two-path loss on L=8 D=8, sampled filter/bias/head entries"};
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opts, std::span<const GradcheckComponent> extra) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;

  report.results.push_back(run_repeats("conv2d", "3x3 same-padding convolution", opts, opts.repeats, [](Rng& rng) {
    ScalarizedCheck c;
    const std::size_t b = 1 + rng.below(2), cin = 1 + rng.below(3), cout = 1 + rng.below(3);
    const std::size_t h = 1 + rng.below(5), w = 1 + rng.below(5);
    c.inputs = {random_tensor({b, cin, h, w}, rng), random_tensor({cout, cin, 3, 3}, rng),
                random_tensor({cout}, rng)};
    c.weights = random_tensor({b, cout, h, w}, rng);
    c.apply = [](DiffGraph& g, const std::vector<Var>& v) { return conv2d(g, v[0], v[1], v[2]); };
    return c;
  }));

  report.results.push_back(
      run_repeats("maxpool2", "2x2/2 pooling; random inputs are tie-free", opts, opts.repeats, [](Rng& rng) {
        ScalarizedCheck c;
        const std::size_t b = 1 + rng.below(2), ch = 1 + rng.below(3);
        const std::size_t h = 2 + rng.below(5), w = 2 + rng.below(5);
        c.inputs = {random_tensor({b, ch, h, w}, rng)};
        c.weights = random_tensor({b, ch, h / 2, w / 2}, rng);
        c.apply = [](DiffGraph& g, const std::vector<Var>& v) { return maxpool2(g, v[0]); };
        return c;
      }));

  report.results.push_back(
      run_repeats("relu", "inputs kept |x| >= 1e-3 away from the kink", opts, opts.repeats, [](Rng& rng) {
        ScalarizedCheck c;
        Tensor x({2 + rng.below(8)});
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          x[i] = sign * rng.uniform(1e-3, 1.0);
        }
        c.inputs = {std::move(x)};
        c.weights = random_tensor(c.inputs[0].shape(), rng);
        c.apply = [](DiffGraph& g, const std::vector<Var>& v) { return relu(g, v[0]); };
        return c;
      }));

  report.results.push_back(
      run_repeats("dropout", "mask fixed per evaluation (a leaf input)", opts, opts.repeats, [](Rng& rng) {
        ScalarizedCheck c;
        const Shape shape{2 + rng.below(3), 3 + rng.below(5)};
        c.inputs = {random_tensor(shape, rng)};
        c.weights = random_tensor(shape, rng);
        Rng mask_rng(rng.next_u64());
        Tensor mask = dropout_mask(shape, 0.5, mask_rng);
        c.apply = [mask](DiffGraph& g, const std::vector<Var>& v) { return apply_mask(g, v[0], mask); };
        return c;
      }));

  report.results.push_back(run_repeats("dense", "affine map", opts, opts.repeats, [](Rng& rng) {
    ScalarizedCheck c;
    const std::size_t b = 1 + rng.below(3), in = 2 + rng.below(6), out = 1 + rng.below(4);
    c.inputs = {random_tensor({b, in}, rng), random_tensor({out, in}, rng), random_tensor({out}, rng)};
    c.weights = random_tensor({b, out}, rng);
    c.apply = [](DiffGraph& g, const std::vector<Var>& v) { return dense(g, v[0], v[1], v[2]); };
    return c;
  }));

  report.results.push_back(run_repeats("softmax", "row-wise softmax", opts, opts.repeats, [](Rng& rng) {
    ScalarizedCheck c;
    const Shape shape{1 + rng.below(3), 2 + rng.below(4)};
    c.inputs = {random_tensor(shape, rng)};
    c.weights = random_tensor(shape, rng);
    c.apply = [](DiffGraph& g, const std::vector<Var>& v) { return softmax(g, v[0]); };
    return c;
  }));

  report.results.push_back(
      run_repeats("supervised_loss", "masked cross-entropy over logits", opts, opts.repeats / 4 + 1, [](Rng& rng) {
        ScalarizedCheck c;
        const std::size_t b = 3, classes = 2 + rng.below(3);
        c.inputs = {random_tensor({b, classes}, rng)};
        c.weights = Tensor::scalar(1.0);
        BatchLabels labels(b);
        labels[0] = rng.below(classes);
        labels[2] = rng.below(classes);
        c.apply = [labels](DiffGraph& g, const std::vector<Var>& v) {
          return total_loss_graph(g, v[0], v[0], labels, 0.0, labels.size());
        };
        return c;
      }));

  report.results.push_back(
      run_repeats("consistency_loss", "mean squared logit difference", opts, opts.repeats / 4 + 1, [](Rng& rng) {
        ScalarizedCheck c;
        const std::size_t b = 1 + rng.below(3), classes = 2 + rng.below(3);
        c.inputs = {random_tensor({b, classes}, rng), random_tensor({b, classes}, rng)};
        c.weights = Tensor::scalar(1.0);
        const std::size_t bb = b;
        c.apply = [bb](DiffGraph& g, const std::vector<Var>& v) {
          return total_loss_graph(g, v[0], v[1], BatchLabels(bb), 0.7, bb);
        };
        return c;
      }));

  report.results.push_back(check_full_total_loss(opts));

  for (const GradcheckComponent& component : extra) {
    report.results.push_back(component.run(opts));
  }
  return report;
}

}  // namespace dtsl
