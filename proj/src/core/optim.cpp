#include "latentnav/core/optim.hpp"

#include <cmath>

namespace latentnav::core {

void AdamW::step(ParamStore& ps, Real lr) {
  ++t;
  const Real bc1 = Real(1) - std::pow(beta1, static_cast<Real>(t));
  const Real bc2 = Real(1) - std::pow(beta2, static_cast<Real>(t));
  for (const auto& p : ps.all()) {
    if (!p->trainable || !p->grad.defined()) continue;
    if (!p->adam_m.defined()) {
      p->adam_m = Tensor::zeros(p->value.shape());
      p->adam_v = Tensor::zeros(p->value.shape());
    }
    Real* w = p->value.data();
    const Real* g = p->grad.data();
    Real* m = p->adam_m.data();
    Real* v = p->adam_v.data();
    const int64_t n = p->value.numel();
    for (int64_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (Real(1) - beta1) * g[i];
      v[i] = beta2 * v[i] + (Real(1) - beta2) * g[i] * g[i];
      Real mhat = m[i] / bc1;
      Real vhat = v[i] / bc2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
    }
  }
}

}  // namespace latentnav::core
