#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "latentnav/core/graph.hpp"
#include "latentnav/core/rng.hpp"

namespace latentnav::core {

struct Init {
  enum Kind { kZero, kOne, kFanInUniform, kNormal } kind = kZero;
  Real arg = 0;  // fan_in for kFanInUniform, std for kNormal
  static Init zero() { return {kZero, 0}; }
  static Init one() { return {kOne, 0}; }
  static Init fan_in(int fan) { return {kFanInUniform, static_cast<Real>(fan)}; }
  static Init normal(Real std) { return {kNormal, std}; }
};

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m, adam_v;  // allocated by the optimizer on first use
  bool trainable = true;
};

// Owns all parameters of a model, keyed by module path. Initialization is
// derived from (store seed, parameter name) so it does not depend on
// construction order.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  Param* create(const std::string& name, std::vector<int> shape, Init init);
  Param* find(const std::string& name) const;

  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  int64_t total_elements(const std::string& prefix = "") const;
  uint64_t values_hash(const std::string& prefix = "") const;
  void zero_grads();
  void set_trainable(const std::string& prefix, bool trainable);
  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param*> index_;
};

// Per-graph binding of parameters to leaf nodes. harvest() moves accumulated
// node gradients into the Param grad buffers after backward().
class Binding {
 public:
  explicit Binding(Graph& g) : g_(&g) {}

  Var operator()(Param* p) {
    auto it = bound_.find(p);
    if (it != bound_.end()) return it->second;
    Var v = g_->leaf(p->value, p->trainable);  // shares storage, no copy
    bound_.emplace(p, v);
    return v;
  }

  void harvest() {
    for (auto& [p, v] : bound_) {
      if (!v->grad.defined()) continue;
      if (!p->grad.defined()) p->grad = Tensor::zeros(p->value.shape());
      p->grad.add_(v->grad);
    }
  }

 private:
  Graph* g_;
  std::unordered_map<Param*, Var> bound_;
};

struct Linear {
  Param* W = nullptr;
  Param* b = nullptr;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, bool bias = true);
  Var apply(Graph& g, Binding& bind, Var x) const {
    return linear(g, x, bind(W), b ? bind(b) : nullptr);
  }
};

// Fully connected stack with SiLU between layers (smooth everywhere, which
// keeps finite-difference gradient probes clean).
struct MLP {
  std::vector<Linear> layers;
  bool final_activation = false;
  MLP() = default;
  MLP(ParamStore& ps, const std::string& name, const std::vector<int>& dims,
      bool final_act = false);
  Var apply(Graph& g, Binding& bind, Var x) const;
};

struct Conv {
  Param* W = nullptr;
  Param* b = nullptr;
  int stride = 1, pad = 0;
  Conv() = default;
  Conv(ParamStore& ps, const std::string& name, int ci, int co, int k, int stride, int pad);
  Var apply(Graph& g, Binding& bind, Var x) const {
    return conv2d(g, x, bind(W), bind(b), stride, pad);
  }
};

struct GRUCell {
  Linear xr, xz, xn;                    // input-to-hidden, with bias
  Param *Whr = nullptr, *Whz = nullptr, *Whn = nullptr;  // hidden-to-hidden
  int hidden = 0;
  GRUCell() = default;
  GRUCell(ParamStore& ps, const std::string& name, int input, int hidden);
  Var step(Graph& g, Binding& bind, Var h, Var x) const;
};

struct LayerNormLayer {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  LayerNormLayer() = default;
  LayerNormLayer(ParamStore& ps, const std::string& name, int dim);
  Var apply(Graph& g, Binding& bind, Var x) const {
    return layer_norm(g, x, bind(gamma), bind(beta));
  }
};

}  // namespace latentnav::core
