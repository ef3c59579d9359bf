#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "latentnav/core/graph.hpp"

namespace latentnav::core {

using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

Var reshape(Graph& g, Var x, std::vector<int> shape) {
  Tensor y = x->value.view(std::move(shape));
  return g.make(std::move(y), {x}, [x](Node& n) {
    if (x->requires_grad) x->ensure_grad().add_(n.grad);
  });
}

Var concat_cols(Graph& g, const std::vector<Var>& xs) {
  LN_CHECK(!xs.empty(), "concat_cols: empty input");
  int rows = xs[0]->value.dim(0);
  int total = 0;
  for (Var x : xs) {
    LN_CHECK(x->value.ndim() == 2 && x->value.dim(0) == rows, "concat_cols: need (N,Di) inputs");
    total += x->value.dim(1);
  }
  Tensor y({rows, total});
  {
    Real* p = y.data();
    int off = 0;
    for (Var x : xs) {
      int d = x->value.dim(1);
      const Real* u = x->value.data();
      for (int r = 0; r < rows; ++r) {
        std::copy(u + static_cast<int64_t>(r) * d, u + static_cast<int64_t>(r + 1) * d,
                  p + static_cast<int64_t>(r) * total + off);
      }
      off += d;
    }
  }
  std::vector<Var> parents(xs);
  return g.make(std::move(y), std::move(parents), [xs, rows, total](Node& n) {
    const Real* go = n.grad.data();
    int off = 0;
    for (Var x : xs) {
      int d = x->value.dim(1);
      if (x->requires_grad) {
        Real* gx = x->ensure_grad().data();
        for (int r = 0; r < rows; ++r) {
          const Real* src = go + static_cast<int64_t>(r) * total + off;
          Real* dst = gx + static_cast<int64_t>(r) * d;
          for (int c = 0; c < d; ++c) dst[c] += src[c];
        }
      }
      off += d;
    }
  });
}

Var slice_cols(Graph& g, Var x, int begin, int len) {
  LN_CHECK(x->value.ndim() == 2, "slice_cols: need (N,D)");
  int rows = x->value.dim(0), cols = x->value.dim(1);
  LN_CHECK(begin >= 0 && begin + len <= cols, "slice_cols: range out of bounds");
  Tensor y({rows, len});
  {
    Real* p = y.data();
    const Real* u = x->value.data();
    for (int r = 0; r < rows; ++r) {
      std::copy(u + static_cast<int64_t>(r) * cols + begin,
                u + static_cast<int64_t>(r) * cols + begin + len,
                p + static_cast<int64_t>(r) * len);
    }
  }
  return g.make(std::move(y), {x}, [x, begin, len, rows, cols](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < len; ++c) {
        gx[static_cast<int64_t>(r) * cols + begin + c] += go[static_cast<int64_t>(r) * len + c];
      }
    }
  });
}

Var linear(Graph& g, Var x, Var W, Var b) {
  LN_CHECK(x->value.ndim() == 2 && W->value.ndim() == 2, "linear: need (N,in) and (out,in)");
  int n = x->value.dim(0), in = x->value.dim(1), out = W->value.dim(0);
  LN_CHECK(W->value.dim(1) == in, "linear: in-dim mismatch, x ", x->value.shape_str(), " W ",
           W->value.shape_str());
  Tensor y({n, out});
  {
    CMapM X(x->value.data(), n, in);
    CMapM Wm(W->value.data(), out, in);
    MapM Y(y.data(), n, out);
    Y.noalias() = X * Wm.transpose();
    if (b) {
      LN_CHECK(b->value.numel() == out, "linear: bias size mismatch");
      const Real* bv = b->value.data();
      Real* p = y.data();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < out; ++c) p[static_cast<int64_t>(r) * out + c] += bv[c];
      }
    }
  }
  std::vector<Var> parents = b ? std::vector<Var>{x, W, b} : std::vector<Var>{x, W};
  return g.make(std::move(y), std::move(parents), [x, W, b, n, in, out](Node& nd) {
    CMapM GO(nd.grad.data(), n, out);
    if (x->requires_grad) {
      MapM GX(x->ensure_grad().data(), n, in);
      CMapM Wm(W->value.data(), out, in);
      GX.noalias() += GO * Wm;
    }
    if (W->requires_grad) {
      MapM GW(W->ensure_grad().data(), out, in);
      CMapM X(x->value.data(), n, in);
      GW.noalias() += GO.transpose() * X;
    }
    if (b && b->requires_grad) {
      Real* gb = b->ensure_grad().data();
      const Real* go = nd.grad.data();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < out; ++c) gb[c] += go[static_cast<int64_t>(r) * out + c];
      }
    }
  });
}

Var bmm(Graph& g, Var a, Var b, bool trans_b) {
  LN_CHECK(a->value.ndim() == 3 && b->value.ndim() == 3, "bmm: need 3-D inputs");
  int B = a->value.dim(0), M = a->value.dim(1), K = a->value.dim(2);
  LN_CHECK(b->value.dim(0) == B, "bmm: batch mismatch");
  int N = trans_b ? b->value.dim(1) : b->value.dim(2);
  int Kb = trans_b ? b->value.dim(2) : b->value.dim(1);
  LN_CHECK(Kb == K, "bmm: inner-dim mismatch");
  Tensor y({B, M, N});
  for (int i = 0; i < B; ++i) {
    CMapM A(a->value.data() + static_cast<int64_t>(i) * M * K, M, K);
    MapM Y(y.data() + static_cast<int64_t>(i) * M * N, M, N);
    if (trans_b) {
      CMapM Bm(b->value.data() + static_cast<int64_t>(i) * N * K, N, K);
      Y.noalias() = A * Bm.transpose();
    } else {
      CMapM Bm(b->value.data() + static_cast<int64_t>(i) * K * N, K, N);
      Y.noalias() = A * Bm;
    }
  }
  return g.make(std::move(y), {a, b}, [a, b, trans_b, B, M, K, N](Node& nd) {
    for (int i = 0; i < B; ++i) {
      CMapM GO(nd.grad.data() + static_cast<int64_t>(i) * M * N, M, N);
      CMapM A(a->value.data() + static_cast<int64_t>(i) * M * K, M, K);
      if (trans_b) {
        CMapM Bm(b->value.data() + static_cast<int64_t>(i) * N * K, N, K);
        if (a->requires_grad) {
          MapM GA(a->ensure_grad().data() + static_cast<int64_t>(i) * M * K, M, K);
          GA.noalias() += GO * Bm;
        }
        if (b->requires_grad) {
          MapM GB(b->ensure_grad().data() + static_cast<int64_t>(i) * N * K, N, K);
          GB.noalias() += GO.transpose() * A;
        }
      } else {
        CMapM Bm(b->value.data() + static_cast<int64_t>(i) * K * N, K, N);
        if (a->requires_grad) {
          MapM GA(a->ensure_grad().data() + static_cast<int64_t>(i) * M * K, M, K);
          GA.noalias() += GO * Bm.transpose();
        }
        if (b->requires_grad) {
          MapM GB(b->ensure_grad().data() + static_cast<int64_t>(i) * K * N, K, N);
          GB.noalias() += A.transpose() * GO;
        }
      }
    }
  });
}

namespace {
inline void permute_0213_copy(const Real* src, Real* dst, int A, int B, int C, int D) {
  for (int a = 0; a < A; ++a) {
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        const Real* s = src + (((static_cast<int64_t>(a) * B + b) * C + c) * D);
        Real* d = dst + (((static_cast<int64_t>(a) * C + c) * B + b) * D);
        std::copy(s, s + D, d);
      }
    }
  }
}
inline void permute_0213_add(const Real* src, Real* dst, int A, int B, int C, int D) {
  // src has layout (A,C,B,D); adds into dst with layout (A,B,C,D)
  for (int a = 0; a < A; ++a) {
    for (int c = 0; c < C; ++c) {
      for (int b = 0; b < B; ++b) {
        const Real* s = src + (((static_cast<int64_t>(a) * C + c) * B + b) * D);
        Real* d = dst + (((static_cast<int64_t>(a) * B + b) * C + c) * D);
        for (int i = 0; i < D; ++i) d[i] += s[i];
      }
    }
  }
}
}  // namespace

Var permute_0213(Graph& g, Var x) {
  LN_CHECK(x->value.ndim() == 4, "permute_0213: need 4-D input");
  int A = x->value.dim(0), B = x->value.dim(1), C = x->value.dim(2), D = x->value.dim(3);
  Tensor y({A, C, B, D});
  permute_0213_copy(x->value.data(), y.data(), A, B, C, D);
  return g.make(std::move(y), {x}, [x, A, B, C, D](Node& n) {
    if (!x->requires_grad) return;
    permute_0213_add(n.grad.data(), x->ensure_grad().data(), A, B, C, D);
  });
}

Var softmax_rows(Graph& g, Var x) {
  LN_CHECK(x->value.ndim() == 2, "softmax_rows: need (N,D)");
  int n = x->value.dim(0), d = x->value.dim(1);
  Tensor y({n, d});
  {
    const Real* u = x->value.data();
    Real* p = y.data();
    for (int r = 0; r < n; ++r) {
      const Real* row = u + static_cast<int64_t>(r) * d;
      Real* out = p + static_cast<int64_t>(r) * d;
      Real mx = row[0];
      for (int c = 1; c < d; ++c) mx = std::max(mx, row[c]);
      Real sum = 0;
      for (int c = 0; c < d; ++c) {
        out[c] = std::exp(row[c] - mx);
        sum += out[c];
      }
      for (int c = 0; c < d; ++c) out[c] /= sum;
    }
  }
  return g.make(std::move(y), {x}, [x, n, d](Node& nd) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = nd.grad.data();
    const Real* yv = nd.value.data();
    for (int r = 0; r < n; ++r) {
      const Real* gr = go + static_cast<int64_t>(r) * d;
      const Real* yr = yv + static_cast<int64_t>(r) * d;
      Real dot = 0;
      for (int c = 0; c < d; ++c) dot += gr[c] * yr[c];
      Real* gxr = gx + static_cast<int64_t>(r) * d;
      for (int c = 0; c < d; ++c) gxr[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var layer_norm(Graph& g, Var x, Var gamma, Var beta, Real eps) {
  LN_CHECK(x->value.ndim() == 2, "layer_norm: need (N,D)");
  int n = x->value.dim(0), d = x->value.dim(1);
  LN_CHECK(gamma->value.numel() == d && beta->value.numel() == d, "layer_norm: affine size mismatch");
  Tensor y({n, d});
  Tensor xhat({n, d});
  Tensor inv_std({n});
  {
    const Real* u = x->value.data();
    const Real* gm = gamma->value.data();
    const Real* bt = beta->value.data();
    for (int r = 0; r < n; ++r) {
      const Real* row = u + static_cast<int64_t>(r) * d;
      Real mean = 0;
      for (int c = 0; c < d; ++c) mean += row[c];
      mean /= d;
      Real var = 0;
      for (int c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
      var /= d;
      Real is = Real(1) / std::sqrt(var + eps);
      inv_std.data()[r] = is;
      Real* xh = xhat.data() + static_cast<int64_t>(r) * d;
      Real* out = y.data() + static_cast<int64_t>(r) * d;
      for (int c = 0; c < d; ++c) {
        xh[c] = (row[c] - mean) * is;
        out[c] = gm[c] * xh[c] + bt[c];
      }
    }
  }
  return g.make(std::move(y), {x, gamma, beta},
                [x, gamma, beta, n, d, xhat, inv_std](Node& nd) {
    const Real* go = nd.grad.data();
    const Real* xh = xhat.data();
    const Real* gm = gamma->value.data();
    if (gamma->requires_grad) {
      Real* gg = gamma->ensure_grad().data();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) {
          gg[c] += go[static_cast<int64_t>(r) * d + c] * xh[static_cast<int64_t>(r) * d + c];
        }
      }
    }
    if (beta->requires_grad) {
      Real* gb = beta->ensure_grad().data();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) gb[c] += go[static_cast<int64_t>(r) * d + c];
      }
    }
    if (x->requires_grad) {
      Real* gx = x->ensure_grad().data();
      for (int r = 0; r < n; ++r) {
        const Real* gr = go + static_cast<int64_t>(r) * d;
        const Real* xr = xh + static_cast<int64_t>(r) * d;
        Real is = inv_std.data()[r];
        Real sum_g = 0, sum_gx = 0;
        for (int c = 0; c < d; ++c) {
          Real dxh = gr[c] * gm[c];
          sum_g += dxh;
          sum_gx += dxh * xr[c];
        }
        Real* gxr = gx + static_cast<int64_t>(r) * d;
        for (int c = 0; c < d; ++c) {
          Real dxh = gr[c] * gm[c];
          gxr[c] += is * (dxh - sum_g / d - xr[c] * sum_gx / d);
        }
      }
    }
  });
}

Var masked_rowmax(Graph& g, Var x, const std::vector<uint8_t>& mask) {
  LN_CHECK(x->value.ndim() == 3, "masked_rowmax: need (B,N,D)");
  int B = x->value.dim(0), N = x->value.dim(1), D = x->value.dim(2);
  LN_CHECK(static_cast<int>(mask.size()) == B * N, "masked_rowmax: mask size mismatch");
  Tensor y({B, D});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(B) * D, -1);
  {
    const Real* u = x->value.data();
    Real* p = y.data();
    for (int b = 0; b < B; ++b) {
      bool any = false;
      for (int i = 0; i < N; ++i) any = any || (mask[static_cast<size_t>(b) * N + i] != 0);
      LN_CHECK(any, "masked_rowmax: batch item ", b, " has no valid rows");
      for (int c = 0; c < D; ++c) {
        Real best = -std::numeric_limits<Real>::infinity();
        int bi = -1;
        for (int i = 0; i < N; ++i) {
          if (!mask[static_cast<size_t>(b) * N + i]) continue;
          Real v = u[(static_cast<int64_t>(b) * N + i) * D + c];
          if (v > best) {
            best = v;
            bi = i;
          }
        }
        p[static_cast<int64_t>(b) * D + c] = best;
        (*argmax)[static_cast<size_t>(b) * D + c] = bi;
      }
    }
  }
  return g.make(std::move(y), {x}, [x, argmax, B, N, D](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < D; ++c) {
        int i = (*argmax)[static_cast<size_t>(b) * D + c];
        gx[(static_cast<int64_t>(b) * N + i) * D + c] += go[static_cast<int64_t>(b) * D + c];
      }
    }
  });
}

}  // namespace latentnav::core
