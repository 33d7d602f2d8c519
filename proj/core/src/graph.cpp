#include "dtsl/graph.hpp"

#include "dtsl/errors.hpp"

namespace dtsl {

const DiffGraph::Node& DiffGraph::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw Error("invalid graph handle");
  return nodes_[v.id];
}

DiffGraph::Node& DiffGraph::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw Error("invalid graph handle");
  return nodes_[v.id];
}

Var DiffGraph::leaf(Tensor value, bool requires_grad, std::string name) {
  Node n;
  n.value = std::move(value);
  n.op = std::move(name);
  n.requires_grad = requires_grad && recording_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var DiffGraph::push(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.op = std::move(op);
  for (Var p : parents) {
    if (!p.valid() || p.id >= nodes_.size()) {
      throw Error("operand of '" + n.op + "' is not a node of this graph");
    }
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  n.parents = std::move(parents);
  if (recording_ && n.requires_grad) n.rule = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var DiffGraph::push_opaque(std::string op, Tensor value, std::vector<Var> parents) {
  Node n;
  n.value = std::move(value);
  n.op = std::move(op);
  for (Var p : parents) {
    if (!p.valid() || p.id >= nodes_.size()) {
      throw Error("operand of '" + n.op + "' is not a node of this graph");
    }
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  n.parents = std::move(parents);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& DiffGraph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) throw Error("no gradient computed for node '" + n.op + "'; run backward() first");
  return n.grad;
}

Tensor& DiffGraph::grad_accum(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void DiffGraph::clear_grads() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void DiffGraph::backward(Var root) { backward(root, Tensor::scalar(1.0)); }

void DiffGraph::backward(Var root, const Tensor& seed) {
  if (!recording_) throw Error("backward() on a graph built without recording");
  const Node& r = node(root);
  if (seed.shape() != r.value.shape()) {
    throw ShapeError("backward seed shape " + shape_to_string(seed.shape()) + " does not match output shape " +
                     shape_to_string(r.value.shape()) + " of node #" + std::to_string(root.id) + " ('" + r.op + "')");
  }
  clear_grads();
  node(root).grad = seed;
  for (std::uint32_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;  // not on any path to the root
    if (n.parents.empty()) continue;  // leaf: gradient stays here
    if (!n.rule) {
      if (!n.requires_grad) continue;
      throw UnsupportedOperationError("node #" + std::to_string(i) + " ('" + n.op +
                                      "') has no backward rule but gradients flow through it");
    }
    n.rule(*this, n.value, n.grad);
  }
}

}  // namespace dtsl
