#include "latentnav/core/nn.hpp"

#include <cmath>

#include "latentnav/util/crc32.hpp"

namespace latentnav::core {

Param* ParamStore::create(const std::string& name, std::vector<int> shape, Init init) {
  LN_CHECK(index_.find(name) == index_.end(), "duplicate parameter name: ", name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor(std::move(shape));
  Rng rng(Rng::mix(seed_, Rng::hash_str(name)));
  Real* d = p->value.data();
  const int64_t m = p->value.numel();
  switch (init.kind) {
    case Init::kZero:
      break;
    case Init::kOne:
      for (int64_t i = 0; i < m; ++i) d[i] = Real(1);
      break;
    case Init::kFanInUniform: {
      Real limit = std::sqrt(Real(6) / init.arg);
      for (int64_t i = 0; i < m; ++i) d[i] = rng.uniform(-limit, limit);
      break;
    }
    case Init::kNormal:
      for (int64_t i = 0; i < m; ++i) d[i] = rng.normal(0, init.arg);
      break;
  }
  Param* raw = p.get();
  index_.emplace(name, raw);
  params_.push_back(std::move(p));
  return raw;
}

Param* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

int64_t ParamStore::total_elements(const std::string& prefix) const {
  int64_t n = 0;
  for (const auto& p : params_) {
    if (p->name.rfind(prefix, 0) == 0) n += p->value.numel();
  }
  return n;
}

uint64_t ParamStore::values_hash(const std::string& prefix) const {
  // index_ is ordered by name, so the hash is independent of creation order
  uint32_t lo = 0, hi = 0x9E3779B9u;
  for (const auto& [name, p] : index_) {
    if (name.rfind(prefix, 0) != 0) continue;
    lo = crc32(name.data(), name.size(), lo);
    lo = crc32(p->value.data(), sizeof(Real) * p->value.numel(), lo);
    hi = crc32(p->value.data(), sizeof(Real) * p->value.numel(), hi);
  }
  return (static_cast<uint64_t>(hi) << 32) | lo;
}

void ParamStore::zero_grads() {
  for (const auto& p : params_) {
    if (p->grad.defined()) p->grad.fill(0);
  }
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (const auto& p : params_) {
    if (p->name.rfind(prefix, 0) == 0) p->trainable = trainable;
  }
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out, bool bias) {
  W = ps.create(name + ".W", {out, in}, Init::fan_in(in));
  if (bias) b = ps.create(name + ".b", {out}, Init::zero());
}

MLP::MLP(ParamStore& ps, const std::string& name, const std::vector<int>& dims, bool final_act)
    : final_activation(final_act) {
  LN_CHECK(dims.size() >= 2, "MLP needs at least input and output dims");
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    layers.emplace_back(ps, name + ".fc" + std::to_string(i), dims[i], dims[i + 1]);
  }
}

Var MLP::apply(Graph& g, Binding& bind, Var x) const {
  for (size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].apply(g, bind, x);
    if (i + 1 < layers.size() || final_activation) x = silu(g, x);
  }
  return x;
}

Conv::Conv(ParamStore& ps, const std::string& name, int ci, int co, int k, int stride_, int pad_)
    : stride(stride_), pad(pad_) {
  W = ps.create(name + ".W", {co, ci, k, k}, Init::fan_in(ci * k * k));
  b = ps.create(name + ".b", {co}, Init::zero());
}

GRUCell::GRUCell(ParamStore& ps, const std::string& name, int input, int hidden_) : hidden(hidden_) {
  xr = Linear(ps, name + ".xr", input, hidden);
  xz = Linear(ps, name + ".xz", input, hidden);
  xn = Linear(ps, name + ".xn", input, hidden);
  Whr = ps.create(name + ".Whr", {hidden, hidden}, Init::fan_in(hidden));
  Whz = ps.create(name + ".Whz", {hidden, hidden}, Init::fan_in(hidden));
  Whn = ps.create(name + ".Whn", {hidden, hidden}, Init::fan_in(hidden));
}

Var GRUCell::step(Graph& g, Binding& bind, Var h, Var x) const {
  Var r = sigmoid_v(g, add(g, xr.apply(g, bind, x), linear(g, h, bind(Whr), nullptr)));
  Var z = sigmoid_v(g, add(g, xz.apply(g, bind, x), linear(g, h, bind(Whz), nullptr)));
  Var n = tanh_v(g, add(g, xn.apply(g, bind, x), mul(g, r, linear(g, h, bind(Whn), nullptr))));
  // h' = z*h + (1-z)*n
  Var one_minus_z = add_const(g, scale(g, z, Real(-1)), Real(1));
  return add(g, mul(g, z, h), mul(g, one_minus_z, n));
}

LayerNormLayer::LayerNormLayer(ParamStore& ps, const std::string& name, int dim) {
  gamma = ps.create(name + ".gamma", {dim}, Init::one());
  beta = ps.create(name + ".beta", {dim}, Init::zero());
}

}  // namespace latentnav::core
