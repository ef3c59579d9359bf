#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "latentnav/core/tensor.hpp"

namespace latentnav::core {

struct Node;
using Var = Node*;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  int id = 0;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

// Reverse-mode tape. Values are computed eagerly when an op is applied;
// backward() walks the tape in reverse creation order. One Graph per
// optimization step; parameters live outside the graph (see nn.hpp).
class Graph {
 public:
  Var leaf(Tensor v, bool requires_grad = false) {
    return make(std::move(v), {}, nullptr, requires_grad);
  }

  Var constant(Tensor v) { return leaf(std::move(v), false); }

  Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw,
           bool force_requires = false) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.value = std::move(value);
    n.id = static_cast<int>(nodes_.size()) - 1;
    n.parents = std::move(parents);
    bool req = force_requires;
    for (Var p : n.parents) req = req || p->requires_grad;
    n.requires_grad = req;
    if (req) n.backward_fn = std::move(bw);
    return &n;
  }

  // Backpropagates from a scalar loss node.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// ---- elementwise ----
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, Real c);
Var add_const(Graph& g, Var a, Real c);
Var silu(Graph& g, Var x);
Var tanh_v(Graph& g, Var x);
Var sigmoid_v(Graph& g, Var x);
Var softplus_v(Graph& g, Var x);
Var detach(Graph& g, Var x);

// ---- shape / linalg ----
Var reshape(Graph& g, Var x, std::vector<int> shape);
Var concat_cols(Graph& g, const std::vector<Var>& xs);       // (N, Di) -> (N, sum Di)
Var slice_cols(Graph& g, Var x, int begin, int len);         // (N, D) -> (N, len)
Var linear(Graph& g, Var x, Var W, Var b);                   // (N,in) x (out,in)^T + b
Var bmm(Graph& g, Var a, Var b, bool trans_b = false);       // (B,M,K) @ (B,K,N)
Var permute_0213(Graph& g, Var x);                           // (A,B,C,D) -> (A,C,B,D)
Var softmax_rows(Graph& g, Var x);                           // softmax over last dim of (N,D)
Var layer_norm(Graph& g, Var x, Var gamma, Var beta, Real eps = 1e-5);
Var masked_rowmax(Graph& g, Var x, const std::vector<uint8_t>& mask);  // (B,N,D), mask (B*N)

// ---- conv / image ----
Var conv2d(Graph& g, Var x, Var W, Var b, int stride, int pad);  // x (B,C,H,W), W (Co,Ci,kh,kw)
Var upsample2(Graph& g, Var x);                                  // nearest neighbor x2
Var channel_affine(Graph& g, Var x, Var s, Var t);               // y = x*(1+s)+t, s/t (B,C)

// ---- reductions / losses ----
Var sum_all(Graph& g, Var x);
Var mean_all(Graph& g, Var x);
Var l1_loss(Graph& g, Var pred, const Tensor& target);
Var mse_loss(Graph& g, Var pred, const Tensor& target);
// logits (B,C,H,W) against class-id labels (B*H*W), mean over pixels.
Var cross_entropy_logits(Graph& g, Var logits, const std::vector<uint8_t>& labels);
// Closed-form KL( N(mu1, sig1^2) || N(mu2, sig2^2) ), diagonal, summed over the
// last dim and averaged over rows. All inputs (N, D).
Var gaussian_kl(Graph& g, Var mu1, Var sigma1, Var mu2, Var sigma2);
Var weighted_sum(Graph& g, const std::vector<std::pair<Real, Var>>& terms);  // scalars

}  // namespace latentnav::core
