#include "ctxtag/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace ctxtag {

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var make_node(Matrix value, std::vector<Var> parents,
              std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  return n;
}

ParamNode make_param(std::string name, Matrix init) {
  auto n = std::make_shared<Node>();
  n->value = std::move(init);
  n->requires_grad = true;
  n->is_param = true;
  n->ensure_grad();
  return ParamNode{std::move(name), std::move(n)};
}

Var mm(const Var& a, const Var& b) {
  Matrix out = matmul(a->value, b->value);
  return make_node(std::move(out), {a, b}, [](Node& n) {
    Node& A = *n.parents[0];
    Node& B = *n.parents[1];
    // dA += dOut * B^T ; dB += A^T * dOut
    if (A.requires_grad) {
      A.ensure_grad();
      for (int i = 0; i < A.value.rows(); ++i)
        for (int k = 0; k < A.value.cols(); ++k) {
          real acc = 0;
          for (int j = 0; j < n.value.cols(); ++j)
            acc += n.grad.at(i, j) * B.value.at(k, j);
          A.grad.at(i, k) += acc;
        }
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (int k = 0; k < B.value.rows(); ++k)
        for (int j = 0; j < B.value.cols(); ++j) {
          real acc = 0;
          for (int i = 0; i < A.value.rows(); ++i)
            acc += A.value.at(i, k) * n.grad.at(i, j);
          B.grad.at(k, j) += acc;
        }
    }
  });
}

static void accumulate(Node& p, const Matrix& g) {
  if (!p.requires_grad) return;
  p.ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

Var vadd(const Var& a, const Var& b) {
  return make_node(add(a->value, b->value), {a, b}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], n.grad);
  });
}

Var vsub(const Var& a, const Var& b) {
  Matrix out = a->value;
  if (!out.same_shape(b->value)) throw DimensionError("vsub: shape mismatch");
  for (size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    Node& B = *n.parents[1];
    if (B.requires_grad) {
      B.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) B.grad[i] -= n.grad[i];
    }
  });
}

Var vmul(const Var& a, const Var& b) {
  return make_node(hadamard(a->value, b->value), {a, b}, [](Node& n) {
    Node& A = *n.parents[0];
    Node& B = *n.parents[1];
    if (A.requires_grad) {
      A.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i)
        A.grad[i] += n.grad[i] * B.value[i];
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i)
        B.grad[i] += n.grad[i] * A.value[i];
    }
  });
}

Var vscale(const Var& a, real c) {
  Matrix out = a->value;
  for (auto& v : out.data()) v *= c;
  return make_node(std::move(out), {a}, [c](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) A.grad[i] += c * n.grad[i];
  });
}

Var vsigmoid(const Var& a) {
  Matrix out = a->value;
  for (auto& v : out.data()) v = sigmoid(v);
  return make_node(std::move(out), {a}, [](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) {
      const real s = n.value[i];
      A.grad[i] += n.grad[i] * s * (1 - s);
    }
  });
}

Var vtanh(const Var& a) {
  Matrix out = a->value;
  for (auto& v : out.data()) v = std::tanh(v);
  return make_node(std::move(out), {a}, [](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) {
      const real t = n.value[i];
      A.grad[i] += n.grad[i] * (1 - t * t);
    }
  });
}

Var slice_rows(const Var& a, int r0, int r1) {
  if (r0 < 0 || r1 > a->value.rows() || r0 >= r1)
    throw DimensionError("slice_rows: bad range");
  const int cols = a->value.cols();
  Matrix out(r1 - r0, cols);
  for (int r = r0; r < r1; ++r)
    for (int c = 0; c < cols; ++c) out.at(r - r0, c) = a->value.at(r, c);
  return make_node(std::move(out), {a}, [r0](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    for (int r = 0; r < n.value.rows(); ++r)
      for (int c = 0; c < n.value.cols(); ++c)
        A.grad.at(r0 + r, c) += n.grad.at(r, c);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty");
  const int cols = parts[0]->value.cols();
  int rows = 0;
  for (const auto& p : parts) {
    if (p->value.cols() != cols) throw DimensionError("concat_rows: col mismatch");
    rows += p->value.rows();
  }
  Matrix out(rows, cols);
  int r = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p->value.rows(); ++i, ++r)
      for (int c = 0; c < cols; ++c) out.at(r, c) = p->value.at(i, c);
  }
  return make_node(std::move(out), parts, [](Node& n) {
    int r = 0;
    for (auto& pv : n.parents) {
      Node& p = *pv;
      const int pr = p.value.rows();
      if (p.requires_grad) {
        p.ensure_grad();
        for (int i = 0; i < pr; ++i)
          for (int c = 0; c < p.value.cols(); ++c)
            p.grad.at(i, c) += n.grad.at(r + i, c);
      }
      r += pr;
    }
  });
}

Var sum_all(const Var& a) {
  real s = 0;
  for (real v : a->value.data()) s += v;
  return make_node(Matrix(1, 1, {s}), {a}, [](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    const real g = n.grad[0];
    for (auto& v : A.grad.data()) v += g;
  });
}

Var pick(const Var& a, int r, int c) {
  return make_node(Matrix(1, 1, {a->value.at(r, c)}), {a}, [r, c](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    A.grad.at(r, c) += n.grad[0];
  });
}

Var softmax_nll(const Var& logits, int target) {
  const Matrix& x = logits->value;
  if (x.cols() != 1) throw DimensionError("softmax_nll: expected column vector");
  if (target < 0 || target >= x.rows())
    throw DimensionError("softmax_nll: target out of range");
  real mx = x[0];
  for (int r = 1; r < x.rows(); ++r) mx = std::max(mx, x.at(r, 0));
  real sum = 0;
  for (int r = 0; r < x.rows(); ++r) sum += std::exp(x.at(r, 0) - mx);
  const real log_z = std::log(sum) + mx;
  const real loss = log_z - x.at(target, 0);
  return make_node(Matrix(1, 1, {loss}), {logits}, [target, log_z](Node& n) {
    Node& A = *n.parents[0];
    if (!A.requires_grad) return;
    A.ensure_grad();
    const real g = n.grad[0];
    for (int r = 0; r < A.value.rows(); ++r) {
      const real p = std::exp(A.value.at(r, 0) - log_z);
      A.grad.at(r, 0) += g * (p - (r == target ? 1 : 0));
    }
  });
}

void backward(const Var& loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1)
    throw GraphError("backward: loss must be scalar");
  if (loss->parents.empty() && !loss->is_param)
    throw GraphError("backward: value is detached from the tape");

  // Iterative post-order DFS; order is reversed for the backward sweep.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Intermediate grads are scratch per sweep; only parameter grads persist
  // (they accumulate until the optimizer zeroes them).
  for (Node* n : order) {
    if (!n->is_param) {
      n->ensure_grad();
      n->grad.fill(0);
    }
  }
  loss->ensure_grad();
  loss->grad[0] += 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
}

}  // namespace ctxtag
