#include <cmath>

#include "latentnav/core/graph.hpp"

namespace latentnav::core {

Var sum_all(Graph& g, Var x) {
  Real s = 0;
  const Real* u = x->value.data();
  for (int64_t i = 0; i < x->value.numel(); ++i) s += u[i];
  return g.make(Tensor::scalar(s), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Real go = n.grad[0];
    Real* gx = x->ensure_grad().data();
    for (int64_t i = 0; i < x->value.numel(); ++i) gx[i] += go;
  });
}

Var mean_all(Graph& g, Var x) { return scale(g, sum_all(g, x), Real(1) / x->value.numel()); }

Var l1_loss(Graph& g, Var pred, const Tensor& target) {
  LN_CHECK(pred->value.numel() == target.numel(), "l1_loss: size mismatch");
  const int64_t m = pred->value.numel();
  Real s = 0;
  {
    const Real* p = pred->value.data();
    const Real* t = target.data();
    for (int64_t i = 0; i < m; ++i) s += std::abs(p[i] - t[i]);
  }
  return g.make(Tensor::scalar(s / m), {pred}, [pred, target, m](Node& n) {
    if (!pred->requires_grad) return;
    Real go = n.grad[0] / m;
    Real* gp = pred->ensure_grad().data();
    const Real* p = pred->value.data();
    const Real* t = target.data();
    for (int64_t i = 0; i < m; ++i) {
      Real d = p[i] - t[i];
      gp[i] += go * (d > 0 ? Real(1) : (d < 0 ? Real(-1) : Real(0)));
    }
  });
}

Var mse_loss(Graph& g, Var pred, const Tensor& target) {
  LN_CHECK(pred->value.numel() == target.numel(), "mse_loss: size mismatch");
  const int64_t m = pred->value.numel();
  Real s = 0;
  {
    const Real* p = pred->value.data();
    const Real* t = target.data();
    for (int64_t i = 0; i < m; ++i) {
      Real d = p[i] - t[i];
      s += d * d;
    }
  }
  return g.make(Tensor::scalar(s / m), {pred}, [pred, target, m](Node& n) {
    if (!pred->requires_grad) return;
    Real go = Real(2) * n.grad[0] / m;
    Real* gp = pred->ensure_grad().data();
    const Real* p = pred->value.data();
    const Real* t = target.data();
    for (int64_t i = 0; i < m; ++i) gp[i] += go * (p[i] - t[i]);
  });
}

Var cross_entropy_logits(Graph& g, Var logits, const std::vector<uint8_t>& labels) {
  LN_CHECK(logits->value.ndim() == 4, "cross_entropy_logits: need (B,C,H,W)");
  const int B = logits->value.dim(0), C = logits->value.dim(1);
  const int64_t hw = static_cast<int64_t>(logits->value.dim(2)) * logits->value.dim(3);
  const int64_t npix = static_cast<int64_t>(B) * hw;
  LN_CHECK(static_cast<int64_t>(labels.size()) == npix, "cross_entropy_logits: label count mismatch");

  Tensor probs(logits->value.shape());
  Real loss = 0;
  {
    const Real* u = logits->value.data();
    Real* pr = probs.data();
    for (int b = 0; b < B; ++b) {
      const Real* base = u + static_cast<int64_t>(b) * C * hw;
      Real* pbase = pr + static_cast<int64_t>(b) * C * hw;
      for (int64_t j = 0; j < hw; ++j) {
        int y = labels[static_cast<size_t>(b) * hw + j];
        LN_CHECK(y >= 0 && y < C, "cross_entropy_logits: label ", y, " out of range [0,", C, ")");
        Real mx = base[j];
        for (int c = 1; c < C; ++c) mx = std::max(mx, base[static_cast<int64_t>(c) * hw + j]);
        Real sum = 0;
        for (int c = 0; c < C; ++c) {
          Real e = std::exp(base[static_cast<int64_t>(c) * hw + j] - mx);
          pbase[static_cast<int64_t>(c) * hw + j] = e;
          sum += e;
        }
        for (int c = 0; c < C; ++c) pbase[static_cast<int64_t>(c) * hw + j] /= sum;
        loss += std::log(sum) + mx - base[static_cast<int64_t>(y) * hw + j];
      }
    }
  }
  auto labels_copy = std::make_shared<std::vector<uint8_t>>(labels);
  return g.make(Tensor::scalar(loss / npix), {logits},
                [logits, probs, labels_copy, B, C, hw, npix](Node& n) {
    if (!logits->requires_grad) return;
    Real go = n.grad[0] / npix;
    Real* gl = logits->ensure_grad().data();
    const Real* pr = probs.data();
    for (int b = 0; b < B; ++b) {
      Real* gbase = gl + static_cast<int64_t>(b) * C * hw;
      const Real* pbase = pr + static_cast<int64_t>(b) * C * hw;
      for (int64_t j = 0; j < hw; ++j) {
        int y = (*labels_copy)[static_cast<size_t>(b) * hw + j];
        for (int c = 0; c < C; ++c) {
          Real t = pbase[static_cast<int64_t>(c) * hw + j] - (c == y ? Real(1) : Real(0));
          gbase[static_cast<int64_t>(c) * hw + j] += go * t;
        }
      }
    }
  });
}

Var gaussian_kl(Graph& g, Var mu1, Var sigma1, Var mu2, Var sigma2) {
  LN_CHECK(mu1->value.ndim() == 2, "gaussian_kl: need (N,D) inputs");
  LN_CHECK(mu1->value.same_shape(sigma1->value) && mu1->value.same_shape(mu2->value) &&
               mu1->value.same_shape(sigma2->value),
           "gaussian_kl: shape mismatch");
  const int n = mu1->value.dim(0);
  const int64_t m = mu1->value.numel();
  Real acc = 0;
  {
    const Real* m1 = mu1->value.data();
    const Real* s1 = sigma1->value.data();
    const Real* m2 = mu2->value.data();
    const Real* s2 = sigma2->value.data();
    for (int64_t i = 0; i < m; ++i) {
      LN_CHECK(s1[i] > 0 && s2[i] > 0, "gaussian_kl: sigma must be positive");
      Real dm = m1[i] - m2[i];
      acc += std::log(s2[i] / s1[i]) + (s1[i] * s1[i] + dm * dm) / (2 * s2[i] * s2[i]) - Real(0.5);
    }
  }
  return g.make(Tensor::scalar(acc / n), {mu1, sigma1, mu2, sigma2},
                [mu1, sigma1, mu2, sigma2, n, m](Node& nd) {
    Real go = nd.grad[0] / n;
    const Real* m1 = mu1->value.data();
    const Real* s1 = sigma1->value.data();
    const Real* m2 = mu2->value.data();
    const Real* s2 = sigma2->value.data();
    Real* g1 = mu1->requires_grad ? mu1->ensure_grad().data() : nullptr;
    Real* gs1 = sigma1->requires_grad ? sigma1->ensure_grad().data() : nullptr;
    Real* g2 = mu2->requires_grad ? mu2->ensure_grad().data() : nullptr;
    Real* gs2 = sigma2->requires_grad ? sigma2->ensure_grad().data() : nullptr;
    for (int64_t i = 0; i < m; ++i) {
      Real dm = m1[i] - m2[i];
      Real inv2 = Real(1) / (s2[i] * s2[i]);
      if (g1) g1[i] += go * dm * inv2;
      if (g2) g2[i] -= go * dm * inv2;
      if (gs1) gs1[i] += go * (s1[i] * inv2 - Real(1) / s1[i]);
      if (gs2) gs2[i] += go * (Real(1) / s2[i] - (s1[i] * s1[i] + dm * dm) * inv2 / s2[i]);
    }
  });
}

Var weighted_sum(Graph& g, const std::vector<std::pair<Real, Var>>& terms) {
  LN_CHECK(!terms.empty(), "weighted_sum: no terms");
  Real acc = 0;
  std::vector<Var> parents;
  parents.reserve(terms.size());
  for (const auto& [w, v] : terms) {
    LN_CHECK(v->value.numel() == 1, "weighted_sum: terms must be scalars");
    acc += w * v->value[0];
    parents.push_back(v);
  }
  auto weights = std::make_shared<std::vector<Real>>();
  for (const auto& [w, v] : terms) weights->push_back(w);
  return g.make(Tensor::scalar(acc), std::move(parents), [weights](Node& n) {
    Real go = n.grad[0];
    for (size_t i = 0; i < n.parents.size(); ++i) {
      Var p = n.parents[i];
      if (p->requires_grad) p->ensure_grad()[0] += go * (*weights)[i];
    }
  });
}

}  // namespace latentnav::core
