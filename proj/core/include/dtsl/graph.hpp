#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dtsl/tensor.hpp"

namespace dtsl {

// Handle into a DiffGraph. Only meaningful together with the graph that
// produced it.
struct Var {
  static constexpr std::uint32_t kInvalid = 0xffffffffu;
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

// Append-only record of primitive tensor operations. Nodes are stored in
// execution order, so the list itself is a topological order: every parent of
// node k has index < k. backward() walks the list in reverse from the
// requested root, accumulating gradients into each node's buffer.
//
// A graph and its tensors belong to one thread while recording or running
// backward. Constructed with recording=false the same calls produce identical
// values but keep no backward rules.
class DiffGraph {
 public:
  // A rule receives the node's forward value and accumulated output gradient
  // and adds each parent's contribution via grad_accum().
  using BackwardFn = std::function<void(DiffGraph&, const Tensor& value, const Tensor& out_grad)>;

  explicit DiffGraph(bool recording = true) : recording_(recording) {}

  DiffGraph(const DiffGraph&) = delete;
  DiffGraph& operator=(const DiffGraph&) = delete;
  DiffGraph(DiffGraph&&) = default;
  DiffGraph& operator=(DiffGraph&&) = default;

  Var leaf(Tensor value, bool requires_grad = false, std::string name = "leaf");

  // Register one primitive application. requires_grad of the result is
  // inherited from the parents; rules of nodes that cannot need gradients are
  // dropped.
  Var push(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward);

  // A node with no backward rule. Differentiating through it raises
  // UnsupportedOperationError.
  Var push_opaque(std::string op, Tensor value, std::vector<Var> parents);

  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }

  const Tensor& value(Var v) const { return node(v).value; }
  const std::string& op_name(Var v) const { return node(v).op; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  bool has_grad(Var v) const { return !node(v).grad.empty(); }
  const Tensor& grad(Var v) const;

  // True when a backward rule would use this parent's gradient; rules guard
  // expensive input-gradient computations with it.
  bool wants_grad(Var v) const { return node(v).requires_grad; }

  // Gradient buffer of v, zero-allocated on first touch during backward.
  Tensor& grad_accum(Var v);

  // Clears all gradients, seeds the root, and propagates in reverse
  // topological order. Gradients of a previous backward() call are discarded.
  void backward(Var root, const Tensor& seed);
  void backward(Var root);  // scalar root, seed = [1.0]

  void clear_grads();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn rule;
    std::vector<Var> parents;
    std::string op;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool recording_;
};

// Runs f with a fresh recording graph and keeps both the outputs and the
// graph, so gradients can be pulled afterwards.
template <typename F>
auto record(F&& f) {
  struct Recorded {
    DiffGraph graph{true};
    std::decay_t<std::invoke_result_t<F&, DiffGraph&>> outputs;
  };
  Recorded rec;
  rec.outputs = std::forward<F>(f)(rec.graph);
  return rec;
}

}  // namespace dtsl
