#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "latentnav/core/checkpoint.hpp"
#include "latentnav/core/gradcheck.hpp"
#include "latentnav/core/graph.hpp"
#include "latentnav/core/nn.hpp"
#include "latentnav/core/optim.hpp"
#include "latentnav/core/rng.hpp"

using namespace latentnav;
using namespace latentnav::core;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, Real scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0, scale);
  return t;
}

// Finite-difference check of a scalar graph function w.r.t. one leaf tensor.
void fd_check_leaf(const std::function<Var(Graph&, Var)>& fn, Tensor x0, Real tol = 1e-7) {
  // analytic
  Tensor analytic;
  {
    Graph g;
    Var x = g.leaf(x0, true);
    Var y = fn(g, x);
    REQUIRE(y->value.numel() == 1);
    g.backward(y);
    REQUIRE(x->grad.defined());
    analytic = x->grad.clone();
  }
  const Real h = 1e-5;
  for (int64_t i = 0; i < x0.numel(); ++i) {
    Real saved = x0[i];
    auto eval = [&](Real v) {
      x0[i] = v;
      Graph g;
      Var x = g.leaf(x0, true);
      return fn(g, x)->value.value();
    };
    Real fp = eval(saved + h);
    Real fm = eval(saved - h);
    x0[i] = saved;
    Real fd = (fp - fm) / (2 * h);
    Real rel = std::abs(fd - analytic[i]) / std::max({1e-6, std::abs(fd), std::abs(analytic[i])});
    CAPTURE(i);
    CHECK(rel < tol);
  }
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  t.fill(2.5);
  CHECK(t[5] == 2.5);
  Tensor v = t.view({3, 2});
  v[0] = -1;
  CHECK(t[0] == -1);  // shared storage
  Tensor c = t.clone();
  c[0] = 7;
  CHECK(t[0] == -1);
  CHECK_THROWS_AS(t.view({4, 2}), Error);
}

TEST_CASE("rng determinism and moments") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng r(7);
  double sum = 0, sum2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
  Rng ri(3);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 5000; ++i) counts[ri.uniform_int(0, 4)]++;
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("autodiff: elementwise ops") {
  Rng rng(1);
  fd_check_leaf([](Graph& g, Var x) { return sum_all(g, silu(g, x)); }, random_tensor({3, 4}, rng));
  fd_check_leaf([](Graph& g, Var x) { return sum_all(g, tanh_v(g, x)); }, random_tensor({2, 5}, rng));
  fd_check_leaf([](Graph& g, Var x) { return sum_all(g, sigmoid_v(g, x)); },
                random_tensor({4}, rng).view({1, 4}));
  fd_check_leaf([](Graph& g, Var x) { return sum_all(g, softplus_v(g, x)); },
                random_tensor({3, 3}, rng));
  fd_check_leaf([](Graph& g, Var x) { return mean_all(g, mul(g, x, x)); }, random_tensor({6}, rng));
  fd_check_leaf(
      [](Graph& g, Var x) {
        Var y = add_const(g, scale(g, x, -2.0), 0.5);
        return sum_all(g, mul(g, y, y));
      },
      random_tensor({2, 3}, rng));
}

TEST_CASE("autodiff: linear / concat / slice / softmax / layernorm") {
  Rng rng(2);
  Tensor W = random_tensor({3, 4}, rng, 0.5);
  Tensor b = random_tensor({3}, rng, 0.5);
  fd_check_leaf(
      [&](Graph& g, Var x) {
        Var y = linear(g, x, g.constant(W), g.constant(b));
        return sum_all(g, mul(g, y, y));
      },
      random_tensor({5, 4}, rng));
  // gradient w.r.t. W and b too
  {
    Tensor x0 = random_tensor({5, 4}, rng);
    fd_check_leaf(
        [&](Graph& g, Var w) {
          Var y = linear(g, g.constant(x0), w, g.constant(b));
          return sum_all(g, silu(g, y));
        },
        W.clone());
    fd_check_leaf(
        [&](Graph& g, Var bb) {
          Var y = linear(g, g.constant(x0), g.constant(W), bb);
          return sum_all(g, silu(g, y));
        },
        b.clone());
  }
  fd_check_leaf(
      [](Graph& g, Var x) {
        Var a = slice_cols(g, x, 0, 2);
        Var c = slice_cols(g, x, 2, 3);
        Var y = concat_cols(g, {c, a});
        return sum_all(g, mul(g, y, y));
      },
      random_tensor({4, 5}, rng));
  fd_check_leaf(
      [](Graph& g, Var x) {
        Var s = softmax_rows(g, x);
        Var w = g.constant(Tensor::from({3, 4}, {1, -2, 0.5, 3, 0, 1, -1, 2, 2, 0.1, 0.2, 0.3}));
        return sum_all(g, mul(g, s, w));
      },
      random_tensor({3, 4}, rng));
  {
    Tensor gamma = random_tensor({6}, rng, 0.3);
    Tensor beta = random_tensor({6}, rng, 0.3);
    for (int64_t i = 0; i < gamma.numel(); ++i) gamma[i] += 1.0;
    fd_check_leaf(
        [&](Graph& g, Var x) {
          Var y = layer_norm(g, x, g.constant(gamma), g.constant(beta));
          return sum_all(g, silu(g, y));
        },
        random_tensor({3, 6}, rng), 1e-5);
    Tensor x0 = random_tensor({3, 6}, rng);
    fd_check_leaf(
        [&](Graph& g, Var gm) {
          Var y = layer_norm(g, g.constant(x0), gm, g.constant(beta));
          return sum_all(g, mul(g, y, y));
        },
        gamma.clone(), 1e-5);
  }
}

TEST_CASE("autodiff: bmm and permute") {
  Rng rng(3);
  Tensor b = random_tensor({2, 4, 3}, rng);
  fd_check_leaf(
      [&](Graph& g, Var a) {
        Var y = bmm(g, a, g.constant(b), false);
        return sum_all(g, mul(g, y, y));
      },
      random_tensor({2, 3, 4}, rng));
  fd_check_leaf(
      [&](Graph& g, Var a) {
        Var y = bmm(g, a, g.constant(b), true);  // b as (B,N,K)
        return sum_all(g, silu(g, y));
      },
      random_tensor({2, 5, 3}, rng));
  {
    Tensor a0 = random_tensor({2, 3, 4}, rng);
    fd_check_leaf(
        [&](Graph& g, Var bb) {
          Var y = bmm(g, g.constant(a0), bb, false);
          return sum_all(g, mul(g, y, y));
        },
        b.clone());
  }
  fd_check_leaf(
      [](Graph& g, Var x) {
        Var y = permute_0213(g, x);
        Var w = g.constant(Tensor::full({2, 4, 3, 2}, 0.7));
        return sum_all(g, mul(g, y, mul(g, y, w)));
      },
      random_tensor({2, 3, 4, 2}, rng));
}

TEST_CASE("autodiff: conv2d, upsample, channel_affine") {
  Rng rng(4);
  Tensor W = random_tensor({4, 3, 3, 3}, rng, 0.4);
  Tensor b = random_tensor({4}, rng, 0.2);
  for (int stride : {1, 2}) {
    fd_check_leaf(
        [&](Graph& g, Var x) {
          Var y = conv2d(g, x, g.constant(W), g.constant(b), stride, 1);
          return sum_all(g, silu(g, y));
        },
        random_tensor({2, 3, 5 + stride - 1, 7 + stride - 1}, rng), 2e-6);
  }
  {
    Tensor x0 = random_tensor({2, 3, 6, 8}, rng);
    fd_check_leaf(
        [&](Graph& g, Var w) {
          Var y = conv2d(g, x0.defined() ? g.constant(x0) : nullptr, w, g.constant(b), 2, 1);
          return sum_all(g, mul(g, y, y));
        },
        W.clone(), 2e-6);
    fd_check_leaf(
        [&](Graph& g, Var bb) {
          Var y = conv2d(g, g.constant(x0), g.constant(W), bb, 1, 1);
          return sum_all(g, mul(g, y, y));
        },
        b.clone());
  }
  fd_check_leaf(
      [](Graph& g, Var x) {
        Var y = upsample2(g, x);
        return sum_all(g, mul(g, y, y));
      },
      random_tensor({2, 2, 3, 4}, rng));
  {
    Tensor s = random_tensor({2, 3}, rng, 0.3);
    Tensor t = random_tensor({2, 3}, rng, 0.3);
    Tensor x0 = random_tensor({2, 3, 4, 5}, rng);
    fd_check_leaf(
        [&](Graph& g, Var x) {
          Var y = channel_affine(g, x, g.constant(s), g.constant(t));
          return sum_all(g, silu(g, y));
        },
        x0.clone());
    fd_check_leaf(
        [&](Graph& g, Var sv) {
          Var y = channel_affine(g, g.constant(x0), sv, g.constant(t));
          return sum_all(g, mul(g, y, y));
        },
        s.clone());
    fd_check_leaf(
        [&](Graph& g, Var tv) {
          Var y = channel_affine(g, g.constant(x0), g.constant(s), tv);
          return sum_all(g, mul(g, y, y));
        },
        t.clone());
  }
}

TEST_CASE("autodiff: losses") {
  Rng rng(5);
  Tensor target = random_tensor({3, 4}, rng);
  fd_check_leaf([&](Graph& g, Var x) { return l1_loss(g, x, target); }, random_tensor({3, 4}, rng));
  fd_check_leaf([&](Graph& g, Var x) { return mse_loss(g, x, target); },
                random_tensor({3, 4}, rng));
  {
    std::vector<uint8_t> labels = {0, 2, 1, 2, 0, 1};
    fd_check_leaf([&](Graph& g, Var x) { return cross_entropy_logits(g, x, labels); },
                  random_tensor({1, 3, 2, 3}, rng), 1e-6);
  }
  {
    Tensor mu2 = random_tensor({2, 3}, rng);
    Tensor s2 = random_tensor({2, 3}, rng, 0.2);
    for (int64_t i = 0; i < s2.numel(); ++i) s2[i] = 0.5 + std::abs(s2[i]);
    fd_check_leaf(
        [&](Graph& g, Var m1) {
          Var s1 = g.constant(Tensor::full({2, 3}, 0.8));
          return gaussian_kl(g, m1, s1, g.constant(mu2), g.constant(s2));
        },
        random_tensor({2, 3}, rng));
    fd_check_leaf(
        [&](Graph& g, Var s1raw) {
          Var s1 = add_const(g, softplus_v(g, s1raw), 0.01);
          return gaussian_kl(g, g.constant(mu2), s1, g.constant(mu2), g.constant(s2));
        },
        random_tensor({2, 3}, rng));
    fd_check_leaf(
        [&](Graph& g, Var m2) {
          Var s1 = g.constant(Tensor::full({2, 3}, 0.8));
          return gaussian_kl(g, g.constant(mu2), s1, m2, g.constant(s2));
        },
        random_tensor({2, 3}, rng));
    fd_check_leaf(
        [&](Graph& g, Var s2raw) {
          Var s2v = add_const(g, softplus_v(g, s2raw), 0.01);
          Var s1 = g.constant(Tensor::full({2, 3}, 0.8));
          return gaussian_kl(g, g.constant(mu2), s1, g.constant(mu2), s2v);
        },
        random_tensor({2, 3}, rng));
  }
}

TEST_CASE("autodiff: masked_rowmax excludes masked rows and routes gradients") {
  Tensor x = Tensor::from({1, 3, 2}, {1, 10, 5, -3, 2, 99});
  std::vector<uint8_t> mask = {1, 1, 0};
  Graph g;
  Var xv = g.leaf(x, true);
  Var y = masked_rowmax(g, xv, mask);
  CHECK(y->value[0] == 5);   // max over rows 0,1 in col 0
  CHECK(y->value[1] == 10);  // row 2 (value 99) is masked out
  g.backward(sum_all(g, y));
  CHECK(xv->grad[2 * 2 + 0] == 0);  // masked row gets exactly zero gradient
  CHECK(xv->grad[2 * 2 + 1] == 0);
  CHECK(xv->grad[1 * 2 + 0] == 1);
  CHECK(xv->grad[0 * 2 + 1] == 1);
  std::vector<uint8_t> none = {0, 0, 0};
  CHECK_THROWS_AS(masked_rowmax(g, xv, none), Error);
}

TEST_CASE("autodiff: detach cuts the tape") {
  Tensor x = Tensor::from({1, 2}, {1.0, 2.0});
  Graph g;
  Var xv = g.leaf(x, true);
  Var d = detach(g, xv);
  CHECK_FALSE(d->requires_grad);
  Var y = sum_all(g, mul(g, xv, add(g, d, d)));  // y = sum(x * 2*sg(x))
  g.backward(y);
  // d/dx of x*2c with c = x held constant = 2c = 2x
  CHECK(xv->grad[0] == doctest::Approx(2.0));
  CHECK(xv->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("gru cell: zero-weight fixed point h' = (1 - gate(0)) style halving") {
  ParamStore ps(11);
  GRUCell cell(ps, "gru", 3, 4);
  for (const auto& p : ps.all()) p->value.fill(0);
  Graph g;
  Binding bind(g);
  Tensor h0 = Tensor::from({2, 4}, {1, -2, 3, 0.5, 0, 1, 2, -1});
  Var h = g.constant(h0);
  Var x = g.constant(Tensor::from({2, 3}, {1, 1, 1, -1, 0, 2}));
  Var h1 = cell.step(g, bind, h, x);
  for (int64_t i = 0; i < 8; ++i) CHECK(h1->value[i] == doctest::Approx(0.5 * h0[i]));
}

TEST_CASE("gru cell: gradient check") {
  ParamStore ps(12);
  GRUCell cell(ps, "gru", 3, 4);
  Rng rng(13);
  Tensor h0 = random_tensor({2, 4}, rng);
  Tensor x0 = random_tensor({2, 3}, rng);

  auto loss_value = [&]() {
    Graph g;
    Binding bind(g);
    Var h1 = cell.step(g, bind, g.constant(h0), g.constant(x0));
    return sum_all(g, mul(g, h1, h1))->value.value();
  };
  std::unordered_map<Param*, Tensor> analytic;
  std::vector<Param*> params;
  {
    Graph g;
    Binding bind(g);
    Var h1 = cell.step(g, bind, g.constant(h0), g.constant(x0));
    g.backward(sum_all(g, mul(g, h1, h1)));
    ps.zero_grads();
    bind.harvest();
    for (const auto& p : ps.all()) {
      params.push_back(p.get());
      analytic[p.get()] = p->grad.defined() ? p->grad.clone() : Tensor::zeros(p->value.shape());
    }
  }
  Rng probe_rng(99);
  auto rep = check_gradients(params, loss_value, analytic, 6, 1e-5, probe_rng);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("adamw converges on a quadratic and respects trainable flag") {
  ParamStore ps(21);
  Param* w = ps.create("w", {4}, Init::normal(1.0));
  Param* frozen = ps.create("frozen", {2}, Init::normal(1.0));
  frozen->trainable = false;
  Tensor frozen_before = frozen->value.clone();
  AdamW opt;
  opt.weight_decay = 0;
  for (int iter = 0; iter < 400; ++iter) {
    ps.zero_grads();
    Graph g;
    Binding bind(g);
    Var wv = bind(w);
    Var target = g.constant(Tensor::from({4}, {1, -1, 2, 0.5}).view({1, 4}));
    Var diff = sub(g, reshape(g, wv, {1, 4}), target);
    Var loss = sum_all(g, mul(g, diff, diff));
    g.backward(loss);
    bind.harvest();
    opt.step(ps, 0.05);
  }
  CHECK(w->value[0] == doctest::Approx(1).epsilon(0.01));
  CHECK(w->value[2] == doctest::Approx(2).epsilon(0.01));
  for (int i = 0; i < 2; ++i) CHECK(frozen->value[i] == frozen_before[i]);
}

TEST_CASE("checkpoint round-trip with corruption detection") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "latentnav_ckpt_test";
  fs::create_directories(dir);
  std::string path = (dir / "model.ckpt").string();

  ParamStore ps(31);
  ps.create("a.W", {3, 2}, Init::normal(1.0));
  Param* b = ps.create("b", {4}, Init::normal(1.0));
  b->adam_m = Tensor::full({4}, 0.25);
  b->adam_v = Tensor::full({4}, 0.5);
  save_checkpoint(ps, "{\"k\":1}", 17, path);

  ParamStore ps2(32);
  ps2.create("a.W", {3, 2}, Init::zero());
  ps2.create("b", {4}, Init::zero());
  std::string cfg;
  int64_t t = load_checkpoint(ps2, &cfg, path);
  CHECK(t == 17);
  CHECK(cfg == "{\"k\":1}");
  CHECK(ps2.values_hash() == ps.values_hash());
  CHECK(ps2.find("b")->adam_m[3] == 0.25);

  // dim mismatch is a hard error
  ParamStore ps3(33);
  ps3.create("a.W", {2, 3}, Init::zero());
  ps3.create("b", {4}, Init::zero());
  CHECK_THROWS_AS(load_checkpoint(ps3, nullptr, path), Error);

  // flip one byte -> checksum failure
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    char c;
    f.seekg(40);
    f.read(&c, 1);
    c ^= 0x5A;
    f.seekp(40);
    f.write(&c, 1);
  }
  ParamStore ps4(34);
  ps4.create("a.W", {3, 2}, Init::zero());
  ps4.create("b", {4}, Init::zero());
  CHECK_THROWS_AS(load_checkpoint(ps4, nullptr, path), Error);
  fs::remove_all(dir);
}

TEST_CASE("values_hash is prefix-scoped") {
  ParamStore ps(41);
  ps.create("policy.head.W", {2, 2}, Init::normal(1.0));
  ps.create("wm.enc.W", {2, 2}, Init::normal(1.0));
  uint64_t h1 = ps.values_hash("policy.");
  ps.find("wm.enc.W")->value[0] += 1.0;
  CHECK(ps.values_hash("policy.") == h1);
  ps.find("policy.head.W")->value[0] += 1.0;
  CHECK(ps.values_hash("policy.") != h1);
}
