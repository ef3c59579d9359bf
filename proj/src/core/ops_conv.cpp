#include <Eigen/Core>

#include "latentnav/core/graph.hpp"

namespace latentnav::core {

using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

namespace {

// col is (Ci*kh*kw, Ho*Wo) row-major for one batch item.
void im2col(const Real* x, int Ci, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, Real* col) {
  const int64_t hw = static_cast<int64_t>(Ho) * Wo;
  for (int ci = 0; ci < Ci; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        Real* dst = col + ((static_cast<int64_t>(ci) * kh + ky) * kw + kx) * hw;
        for (int oh = 0; oh < Ho; ++oh) {
          int ih = oh * stride - pad + ky;
          if (ih < 0 || ih >= H) {
            for (int ow = 0; ow < Wo; ++ow) dst[static_cast<int64_t>(oh) * Wo + ow] = 0;
            continue;
          }
          const Real* src = x + (static_cast<int64_t>(ci) * H + ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            int iw = ow * stride - pad + kx;
            dst[static_cast<int64_t>(oh) * Wo + ow] = (iw >= 0 && iw < W) ? src[iw] : 0;
          }
        }
      }
    }
  }
}

void col2im_add(const Real* col, int Ci, int H, int W, int kh, int kw, int stride, int pad, int Ho,
                int Wo, Real* gx) {
  const int64_t hw = static_cast<int64_t>(Ho) * Wo;
  for (int ci = 0; ci < Ci; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const Real* src = col + ((static_cast<int64_t>(ci) * kh + ky) * kw + kx) * hw;
        for (int oh = 0; oh < Ho; ++oh) {
          int ih = oh * stride - pad + ky;
          if (ih < 0 || ih >= H) continue;
          Real* dst = gx + (static_cast<int64_t>(ci) * H + ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            int iw = ow * stride - pad + kx;
            if (iw >= 0 && iw < W) dst[iw] += src[static_cast<int64_t>(oh) * Wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Graph& g, Var x, Var W, Var b, int stride, int pad) {
  LN_CHECK(x->value.ndim() == 4 && W->value.ndim() == 4, "conv2d: need (B,C,H,W) and (Co,Ci,kh,kw)");
  const int B = x->value.dim(0), Ci = x->value.dim(1), H = x->value.dim(2), Wd = x->value.dim(3);
  const int Co = W->value.dim(0), kh = W->value.dim(2), kw = W->value.dim(3);
  LN_CHECK(W->value.dim(1) == Ci, "conv2d: channel mismatch");
  LN_CHECK((H + 2 * pad - kh) % stride == 0 && (Wd + 2 * pad - kw) % stride == 0,
           "conv2d: geometry does not tile, H=", H, " W=", Wd, " k=", kh, " s=", stride, " p=", pad);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (Wd + 2 * pad - kw) / stride + 1;
  const int K = Ci * kh * kw;
  const int64_t hw = static_cast<int64_t>(Ho) * Wo;

  Tensor y({B, Co, Ho, Wo});
  {
    std::vector<Real> col(static_cast<size_t>(K) * hw);
    CMapM Wm(W->value.data(), Co, K);
    for (int i = 0; i < B; ++i) {
      im2col(x->value.data() + static_cast<int64_t>(i) * Ci * H * Wd, Ci, H, Wd, kh, kw, stride,
             pad, Ho, Wo, col.data());
      CMapM C(col.data(), K, hw);
      MapM Y(y.data() + static_cast<int64_t>(i) * Co * hw, Co, hw);
      Y.noalias() = Wm * C;
    }
    if (b) {
      LN_CHECK(b->value.numel() == Co, "conv2d: bias size mismatch");
      const Real* bv = b->value.data();
      Real* p = y.data();
      for (int i = 0; i < B; ++i) {
        for (int co = 0; co < Co; ++co) {
          Real* row = p + (static_cast<int64_t>(i) * Co + co) * hw;
          for (int64_t j = 0; j < hw; ++j) row[j] += bv[co];
        }
      }
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, W, b} : std::vector<Var>{x, W};
  return g.make(std::move(y), std::move(parents),
                [x, W, b, B, Ci, H, Wd, Co, kh, kw, stride, pad, Ho, Wo, K, hw](Node& nd) {
    std::vector<Real> col(static_cast<size_t>(K) * hw);
    std::vector<Real> dcol(static_cast<size_t>(K) * hw);
    CMapM Wm(W->value.data(), Co, K);
    const bool need_x = x->requires_grad;
    const bool need_w = W->requires_grad;
    Real* gx = need_x ? x->ensure_grad().data() : nullptr;
    for (int i = 0; i < B; ++i) {
      CMapM GO(nd.grad.data() + static_cast<int64_t>(i) * Co * hw, Co, hw);
      if (need_w) {
        im2col(x->value.data() + static_cast<int64_t>(i) * Ci * H * Wd, Ci, H, Wd, kh, kw, stride,
               pad, Ho, Wo, col.data());
        CMapM C(col.data(), K, hw);
        MapM GW(W->ensure_grad().data(), Co, K);
        GW.noalias() += GO * C.transpose();
      }
      if (need_x) {
        MapM DC(dcol.data(), K, hw);
        DC.noalias() = Wm.transpose() * GO;
        col2im_add(dcol.data(), Ci, H, Wd, kh, kw, stride, pad, Ho, Wo,
                   gx + static_cast<int64_t>(i) * Ci * H * Wd);
      }
    }
    if (b && b->requires_grad) {
      Real* gb = b->ensure_grad().data();
      const Real* go = nd.grad.data();
      for (int i = 0; i < B; ++i) {
        for (int co = 0; co < Co; ++co) {
          const Real* row = go + (static_cast<int64_t>(i) * Co + co) * hw;
          Real s = 0;
          for (int64_t j = 0; j < hw; ++j) s += row[j];
          gb[co] += s;
        }
      }
    }
  });
}

Var upsample2(Graph& g, Var x) {
  LN_CHECK(x->value.ndim() == 4, "upsample2: need (B,C,H,W)");
  const int B = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
  Tensor y({B, C, 2 * H, 2 * W});
  {
    const Real* u = x->value.data();
    Real* p = y.data();
    for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
      const Real* src = u + bc * H * W;
      Real* dst = p + bc * 4 * H * W;
      for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
          Real v = src[static_cast<int64_t>(h) * W + w];
          Real* d0 = dst + (static_cast<int64_t>(2 * h) * 2 * W + 2 * w);
          d0[0] = v;
          d0[1] = v;
          d0[2 * W] = v;
          d0[2 * W + 1] = v;
        }
      }
    }
  }
  return g.make(std::move(y), {x}, [x, B, C, H, W](Node& n) {
    if (!x->requires_grad) return;
    Real* gx = x->ensure_grad().data();
    const Real* go = n.grad.data();
    for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
      Real* dst = gx + bc * H * W;
      const Real* src = go + bc * 4 * H * W;
      for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
          const Real* s0 = src + (static_cast<int64_t>(2 * h) * 2 * W + 2 * w);
          dst[static_cast<int64_t>(h) * W + w] += s0[0] + s0[1] + s0[2 * W] + s0[2 * W + 1];
        }
      }
    }
  });
}

Var channel_affine(Graph& g, Var x, Var s, Var t) {
  LN_CHECK(x->value.ndim() == 4 && s->value.ndim() == 2 && t->value.ndim() == 2,
           "channel_affine: need x (B,C,H,W), s/t (B,C)");
  const int B = x->value.dim(0), C = x->value.dim(1);
  const int64_t hw = static_cast<int64_t>(x->value.dim(2)) * x->value.dim(3);
  LN_CHECK(s->value.dim(0) == B && s->value.dim(1) == C && t->value.same_shape(s->value),
           "channel_affine: scale/shift shape mismatch");
  Tensor y(x->value.shape());
  {
    const Real* u = x->value.data();
    const Real* sv = s->value.data();
    const Real* tv = t->value.data();
    Real* p = y.data();
    for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
      Real a = Real(1) + sv[bc], o = tv[bc];
      const Real* src = u + bc * hw;
      Real* dst = p + bc * hw;
      for (int64_t j = 0; j < hw; ++j) dst[j] = a * src[j] + o;
    }
  }
  return g.make(std::move(y), {x, s, t}, [x, s, t, B, C, hw](Node& n) {
    const Real* go = n.grad.data();
    if (x->requires_grad) {
      Real* gx = x->ensure_grad().data();
      const Real* sv = s->value.data();
      for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
        Real a = Real(1) + sv[bc];
        const Real* src = go + bc * hw;
        Real* dst = gx + bc * hw;
        for (int64_t j = 0; j < hw; ++j) dst[j] += a * src[j];
      }
    }
    if (s->requires_grad) {
      Real* gs = s->ensure_grad().data();
      const Real* u = x->value.data();
      for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
        const Real* gr = go + bc * hw;
        const Real* xr = u + bc * hw;
        Real acc = 0;
        for (int64_t j = 0; j < hw; ++j) acc += gr[j] * xr[j];
        gs[bc] += acc;
      }
    }
    if (t->requires_grad) {
      Real* gt = t->ensure_grad().data();
      for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
        const Real* gr = go + bc * hw;
        Real acc = 0;
        for (int64_t j = 0; j < hw; ++j) acc += gr[j];
        gt[bc] += acc;
      }
    }
  });
}

}  // namespace latentnav::core
