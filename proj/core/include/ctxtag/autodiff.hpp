#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ctxtag/matrix.hpp"

namespace ctxtag {

// Reverse-mode tape. Every op returns a shared node holding the value, a
// lazily-allocated gradient of the same shape, and a closure that pushes the
// node's gradient into its parents. backward() walks the graph in reverse
// topological order. Single-writer: one training thread per graph.
class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  Matrix value;
  Matrix grad;  // same shape as value once touched
  bool requires_grad = false;
  bool is_param = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;  // may be empty for leaves

  void ensure_grad() {
    if (!grad.same_shape(value)) grad = Matrix(value.rows(), value.cols());
  }
  real scalar() const { return value[0]; }
};

// Leaf with no gradient (inputs, frozen embeddings).
Var constant(Matrix value);

// Generic custom node; requires_grad is inherited from parents. Composite ops
// (CRF forward, softmax cross-entropy) are built through this.
Var make_node(Matrix value, std::vector<Var> parents,
              std::function<void(Node&)> backprop);

// A named trainable parameter. The node persists across training steps; its
// gradient accumulates over backward() calls until the optimizer zeroes it.
struct ParamNode {
  std::string name;
  Var node;

  Matrix& value() { return node->value; }
  const Matrix& value() const { return node->value; }
  Matrix& grad() { return node->grad; }

  void zero_grad() {
    node->ensure_grad();
    node->grad.fill(0);
  }
};

ParamNode make_param(std::string name, Matrix init);

// Tape ops.
Var mm(const Var& a, const Var& b);
Var vadd(const Var& a, const Var& b);
Var vsub(const Var& a, const Var& b);
Var vmul(const Var& a, const Var& b);  // elementwise
Var vscale(const Var& a, real c);
Var vsigmoid(const Var& a);
Var vtanh(const Var& a);
Var slice_rows(const Var& a, int r0, int r1);
Var concat_rows(const std::vector<Var>& parts);
Var sum_all(const Var& a);
Var pick(const Var& a, int r, int c);

// Negative log-likelihood of `target` under softmax of a logit column
// vector. Forward is computed with max-subtraction; backward is the usual
// softmax-minus-onehot.
Var softmax_nll(const Var& logits, int target);

// Populates grads of every reachable parameter with d(loss)/d(param).
// loss must be a 1x1 node produced by tape ops in this step.
void backward(const Var& loss);

}  // namespace ctxtag
