#include "dtsl/primitives.hpp"

#include <cmath>
#include <memory>

#include "dtsl/errors.hpp"

namespace dtsl {
namespace {

void require_same_shape(const DiffGraph& g, Var a, Var b, const char* op) {
  if (!g.value(a).same_shape(g.value(b))) {
    throw ShapeError(std::string(op) + ": operand shapes " + shape_to_string(g.value(a).shape()) + " and " +
                     shape_to_string(g.value(b).shape()) + " differ");
  }
}

}  // namespace

Var identity(DiffGraph& g, Var a) {
  return g.push("identity", g.value(a), {a}, [a](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(a)) return;
    Tensor& da = g.grad_accum(a);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
  });
}

Var add(DiffGraph& g, Var a, Var b) {
  require_same_shape(g, a, b, "add");
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return g.push("add", std::move(y), {a, b}, [a, b](DiffGraph& g, const Tensor&, const Tensor& dy) {
    for (Var v : {a, b}) {
      if (!g.wants_grad(v)) continue;
      Tensor& d = g.grad_accum(v);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  });
}

Var sub(DiffGraph& g, Var a, Var b) {
  require_same_shape(g, a, b, "sub");
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return g.push("sub", std::move(y), {a, b}, [a, b](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (g.wants_grad(a)) {
      Tensor& d = g.grad_accum(a);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
    if (g.wants_grad(b)) {
      Tensor& d = g.grad_accum(b);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] -= dy[i];
    }
  });
}

Var mul(DiffGraph& g, Var a, Var b) {
  require_same_shape(g, a, b, "mul");
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return g.push("mul", std::move(y), {a, b}, [a, b](DiffGraph& g, const Tensor&, const Tensor& dy) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    if (g.wants_grad(a)) {
      Tensor& d = g.grad_accum(a);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * bv[i];
    }
    if (g.wants_grad(b)) {
      Tensor& d = g.grad_accum(b);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * av[i];
    }
  });
}

Var scale(DiffGraph& g, Var a, double c) {
  const Tensor& av = g.value(a);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * av[i];
  return g.push("scale", std::move(y), {a}, [a, c](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(a)) return;
    Tensor& d = g.grad_accum(a);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += c * dy[i];
  });
}

Var sum(DiffGraph& g, Var a) {
  const Tensor& av = g.value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i];
  return g.push("sum", Tensor::scalar(acc), {a}, [a](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(a)) return;
    Tensor& d = g.grad_accum(a);
    const double s = dy[0];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s;
  });
}

Var log_shift(DiffGraph& g, Var a, double eps) {
  const Tensor& av = g.value(a);
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double shifted = av[i] + eps;
    if (!(shifted > 0.0)) {
      throw ValueError("log_shift: entry " + std::to_string(i) + " is " + std::to_string(av[i]) +
                       ", not positive after shift");
    }
    y[i] = std::log(shifted);
  }
  return g.push("log_shift", std::move(y), {a}, [a, eps](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(a)) return;
    const Tensor& av = g.value(a);
    Tensor& d = g.grad_accum(a);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] / (av[i] + eps);
  });
}

Var reshape(DiffGraph& g, Var a, Shape shape) {
  Tensor y = g.value(a).reshaped(std::move(shape));
  return g.push("reshape", std::move(y), {a}, [a](DiffGraph& g, const Tensor&, const Tensor& dy) {
    if (!g.wants_grad(a)) return;
    Tensor& d = g.grad_accum(a);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
  });
}

Var select_weighted_sum(DiffGraph& g, Var a, std::vector<WeightedEntry> entries) {
  const Tensor& av = g.value(a);
  if (av.rank() != 2) {
    throw ShapeError("select_weighted_sum: needs a matrix, got " + shape_to_string(av.shape()));
  }
  const std::size_t cols = av.dim(1);
  double acc = 0.0;
  for (const WeightedEntry& e : entries) {
    if (e.row >= av.dim(0) || e.col >= cols) {
      throw ShapeError("select_weighted_sum: entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                       ") outside " + shape_to_string(av.shape()));
    }
    acc += e.weight * av[e.row * cols + e.col];
  }
  auto shared = std::make_shared<std::vector<WeightedEntry>>(std::move(entries));
  return g.push("select_weighted_sum", Tensor::scalar(acc), {a},
                [a, shared, cols](DiffGraph& g, const Tensor&, const Tensor& dy) {
                  if (!g.wants_grad(a)) return;
                  Tensor& d = g.grad_accum(a);
                  for (const WeightedEntry& e : *shared) d[e.row * cols + e.col] += e.weight * dy[0];
                });
}

}  // namespace dtsl
