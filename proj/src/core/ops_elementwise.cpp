#include <cmath>

#include "latentnav/core/graph.hpp"

namespace latentnav::core {

namespace {

inline void check_same_shape(Var a, Var b, const char* op) {
  LN_CHECK(a->value.same_shape(b->value),
           op, ": shape mismatch ", a->value.shape_str(), " vs ", b->value.shape_str());
}

}  // namespace

Var add(Graph& g, Var a, Var b) {
  check_same_shape(a, b, "add");
  Tensor y = a->value.clone();
  y.add_(b->value);
  return g.make(std::move(y), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->ensure_grad().add_(n.grad);
    if (b->requires_grad) b->ensure_grad().add_(n.grad);
  });
}

Var sub(Graph& g, Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tensor y = a->value.clone();
  {
    Real* p = y.data();
    const Real* q = b->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) p[i] -= q[i];
  }
  return g.make(std::move(y), {a, b}, [a, b](Node& n) {
    const Real* go = n.grad.data();
    int64_t m = n.grad.numel();
    if (a->requires_grad) a->ensure_grad().add_(n.grad);
    if (b->requires_grad) {
      Real* gb = b->ensure_grad().data();
      for (int64_t i = 0; i < m; ++i) gb[i] -= go[i];
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tensor y(a->value.shape());
  {
    Real* p = y.data();
    const Real* u = a->value.data();
    const Real* v = b->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) p[i] = u[i] * v[i];
  }
  return g.make(std::move(y), {a, b}, [a, b](Node& n) {
    const Real* go = n.grad.data();
    int64_t m = n.grad.numel();
    if (a->requires_grad) {
      Real* ga = a->ensure_grad().data();
      const Real* v = b->value.data();
      for (int64_t i = 0; i < m; ++i) ga[i] += go[i] * v[i];
    }
    if (b->requires_grad) {
      Real* gb = b->ensure_grad().data();
      const Real* u = a->value.data();
      for (int64_t i = 0; i < m; ++i) gb[i] += go[i] * u[i];
    }
  });
}

Var scale(Graph& g, Var a, Real c) {
  Tensor y(a->value.shape());
  {
    Real* p = y.data();
    const Real* u = a->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) p[i] = c * u[i];
  }
  return g.make(std::move(y), {a}, [a, c](Node& n) {
    if (!a->requires_grad) return;
    Real* ga = a->ensure_grad().data();
    const Real* go = n.grad.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) ga[i] += c * go[i];
  });
}

Var add_const(Graph& g, Var a, Real c) {
  Tensor y(a->value.shape());
  {
    Real* p = y.data();
    const Real* u = a->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) p[i] = u[i] + c;
  }
  return g.make(std::move(y), {a}, [a](Node& n) {
    if (a->requires_grad) a->ensure_grad().add_(n.grad);
  });
}

Var silu(Graph& g, Var x) {
  Tensor y(x->value.shape());
  {
    Real* p = y.data();
    const Real* u = x->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) {
      Real s = Real(1) / (Real(1) + std::exp(-u[i]));
      p[i] = u[i] * s;
    }
  }
  return g.make(std::move(y), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    const Real* u = x->value.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      Real s = Real(1) / (Real(1) + std::exp(-u[i]));
      gx[i] += go[i] * s * (Real(1) + u[i] * (Real(1) - s));
    }
  });
}

Var tanh_v(Graph& g, Var x) {
  Tensor y(x->value.shape());
  {
    Real* p = y.data();
    const Real* u = x->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) p[i] = std::tanh(u[i]);
  }
  return g.make(std::move(y), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    const Real* yv = n.value.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) gx[i] += go[i] * (Real(1) - yv[i] * yv[i]);
  });
}

Var sigmoid_v(Graph& g, Var x) {
  Tensor y(x->value.shape());
  {
    Real* p = y.data();
    const Real* u = x->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) p[i] = Real(1) / (Real(1) + std::exp(-u[i]));
  }
  return g.make(std::move(y), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    const Real* yv = n.value.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) gx[i] += go[i] * yv[i] * (Real(1) - yv[i]);
  });
}

Var softplus_v(Graph& g, Var x) {
  Tensor y(x->value.shape());
  {
    Real* p = y.data();
    const Real* u = x->value.data();
    for (int64_t i = 0; i < y.numel(); ++i) {
      // log(1+exp(u)), stable on both tails
      p[i] = u[i] > Real(30) ? u[i] : std::log1p(std::exp(u[i]));
    }
  }
  return g.make(std::move(y), {x}, [x](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    const Real* u = x->value.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      gx[i] += go[i] / (Real(1) + std::exp(-u[i]));
    }
  });
}

Var detach(Graph& g, Var x) {
  // Shares storage with the input value but cuts the tape.
  return g.leaf(x->value, false);
}

}  // namespace latentnav::core
