#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>

#include "eager/nn/graph.hpp"
#include "eager/nn/kernels.hpp"
#include "eager/nn/layers.hpp"
#include "eager/nn/serialize.hpp"
#include "eager/util/rng.hpp"

using namespace eager;
using namespace eager::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.d) v = scale * rng.normal();
  return t;
}

// Compares analytic gradients against central differences over every
// element of every parameter.
struct FdChecker {
  ParamSet& ps;
  // builds graph, returns loss node; FD re-evaluates forward only
  std::function<Node*(Graph&)> build;

  double max_rel_err(double eps = 1e-6) {
    ps.zero_grad();
    {
      Graph g;
      Node* loss = build(g);
      g.backward(loss);
    }
    double worst = 0.0;
    for (auto& p : ps.all()) {
      for (int64_t i = 0; i < p->v.numel(); ++i) {
        const double old = p->v.d[i];
        p->v.d[i] = old + eps;
        double fp;
        {
          Graph g;
          fp = build(g)->scalar();
        }
        p->v.d[i] = old - eps;
        double fm;
        {
          Graph g;
          fm = build(g)->scalar();
        }
        p->v.d[i] = old;
        const double fd = (fp - fm) / (2 * eps);
        const double an = p->g.d[i];
        const double diff = std::fabs(fd - an);
        if (diff < 1e-9) continue;  // FD noise floor on zero gradients
        const double rel = diff / std::max({std::fabs(fd), std::fabs(an)});
        if (rel > worst) worst = rel;
      }
    }
    return worst;
  }
};

}  // namespace

TEST_CASE("matmul serial and parallel kernels agree bit for bit") {
  Rng rng(42);
  for (auto [m, k, n] : {std::tuple{3, 5, 7}, {16, 33, 9}, {64, 64, 64}}) {
    Tensor a = random_tensor({m, k}, rng);
    Tensor at = random_tensor({k, m}, rng);
    Tensor b = random_tensor({k, n}, rng);
    Tensor bt = random_tensor({n, k}, rng);
    for (int ta = 0; ta < 2; ++ta)
      for (int tb = 0; tb < 2; ++tb) {
        const double* ap = ta ? at.data() : a.data();
        const double* bp = tb ? bt.data() : b.data();
        Tensor c1({m, n}), c2({m, n});
        kernels::parallel_enabled() = false;
        kernels::matmul(ap, ta, bp, tb, c1.data(), m, k, n, false);
        kernels::parallel_enabled() = true;
        kernels::matmul(ap, ta, bp, tb, c2.data(), m, k, n, false);
        for (int64_t i = 0; i < c1.numel(); ++i) CHECK(c1.d[i] == c2.d[i]);
      }
  }
}

TEST_CASE("row kernels serial/parallel parity") {
  Rng rng(7);
  const int rows = 37, cols = 19;
  Tensor x = random_tensor({rows, cols}, rng);
  Tensor gain = random_tensor({1, cols}, rng, 0.3);
  Tensor bias = random_tensor({1, cols}, rng, 0.3);
  for (auto par : {false, true}) {
    kernels::parallel_enabled() = par;
    Tensor sm({rows, cols}), y({rows, cols}), mean({rows, 1}),
        rstd({rows, 1});
    kernels::softmax_rows(x.data(), sm.data(), rows, cols);
    kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), y.data(),
                             mean.data(), rstd.data(), rows, cols, 1e-5);
    static Tensor sm_ref, y_ref;
    if (!par) {
      sm_ref = sm;
      y_ref = y;
    } else {
      for (int64_t i = 0; i < sm.numel(); ++i) CHECK(sm.d[i] == sm_ref.d[i]);
      for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.d[i] == y_ref.d[i]);
    }
  }
  kernels::parallel_enabled() = true;
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  Tensor x = random_tensor({11, 13}, rng, 4.0);
  Tensor y({11, 13});
  kernels::softmax_rows(x.data(), y.data(), 11, 13);
  for (int r = 0; r < 11; ++r) {
    double s = 0.0;
    for (int c = 0; c < 13; ++c) s += y.at2(r, c);
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("gradients of core ops match finite differences") {
  Rng rng(11);
  ParamSet ps;
  Parameter& a = ps.add("a", random_tensor({4, 5}, rng, 0.7));
  Parameter& b = ps.add("b", random_tensor({5, 3}, rng, 0.7));
  Parameter& bias = ps.add("bias", random_tensor({1, 3}, rng, 0.5));
  Parameter& gain = ps.add("gain", random_tensor({1, 3}, rng, 0.2));

  FdChecker chk{ps, [&](Graph& g) -> Node* {
                  Node* x = g.matmul(g.param(a), g.param(b));
                  x = g.add_bias(x, g.param(bias));
                  Node* gn = g.affine(g.param(gain), 1.0, 1.0);
                  x = g.layer_norm(x, gn, g.param(bias));
                  x = g.tanh_(x);
                  Node* s = g.softmax_rows(x);
                  x = g.mul(x, s);
                  return g.mean_all(x);
                }};
  CHECK(chk.max_rel_err() < 1e-6);
}

TEST_CASE("gradients of matmul transpose variants") {
  Rng rng(12);
  ParamSet ps;
  Parameter& a = ps.add("a", random_tensor({4, 6}, rng));
  Parameter& b = ps.add("b", random_tensor({4, 6}, rng));
  Parameter& c = ps.add("c", random_tensor({3, 4}, rng));
  // NT: [4,6] x [4,6]^T -> [4,4]; TN: [4,6]^T x ... exercise all paths.
  FdChecker nt{ps, [&](Graph& g) -> Node* {
                 return g.mean_all(g.matmul(g.param(a), g.param(b), false,
                                            true));
               }};
  CHECK(nt.max_rel_err() < 1e-6);
  FdChecker tn{ps, [&](Graph& g) -> Node* {
                 return g.mean_all(g.matmul(g.param(a), g.param(b), true,
                                            false));
               }};
  CHECK(tn.max_rel_err() < 1e-6);
  FdChecker tt{ps, [&](Graph& g) -> Node* {
                 // A^T [6,4] x C^T [4,3]
                 Node* sq = g.matmul(g.param(a), g.param(c), true, true);
                 return g.mean_all(sq);
               }};
  CHECK(tt.max_rel_err() < 1e-6);
}

TEST_CASE("gradients of shaping ops: slices, concat, film, pools") {
  Rng rng(13);
  ParamSet ps;
  Parameter& x = ps.add("x", random_tensor({8, 6}, rng));
  Parameter& gm = ps.add("gm", random_tensor({2, 6}, rng, 0.3));
  Parameter& bt = ps.add("bt", random_tensor({2, 6}, rng, 0.3));
  Parameter& m = ps.add("m", random_tensor({8, 1}, rng));

  FdChecker chk{ps, [&](Graph& g) -> Node* {
                  Node* xs = g.param(x);
                  Node* f = g.film(xs, g.param(gm), g.param(bt), 4);
                  Node* top = g.slice_rows(f, 0, 4);
                  Node* bot = g.slice_rows(f, 4, 8);
                  Node* cat = g.concat_cols({top, bot});
                  Node* sl = g.slice_cols(cat, 2, 9);
                  Node* mm = g.mul_colvec(g.concat_rows({sl, sl}),
                                          g.concat_rows({g.param(m)}));
                  Node* pooled = g.mean_rows_grouped(mm, 2);
                  return g.mean_all(g.relu(pooled));
                }};
  CHECK(chk.max_rel_err() < 1e-6);
}

TEST_CASE("gradients of losses: cross entropy, entropy, log softmax, min") {
  Rng rng(14);
  ParamSet ps;
  Parameter& logits = ps.add("logits", random_tensor({5, 7}, rng));
  Parameter& other = ps.add("other", random_tensor({5, 1}, rng));
  std::vector<int> targets = {0, 3, 6, 2, 2};
  std::vector<int> acts = {1, 2, 0, 4, 5};

  FdChecker chk{ps, [&](Graph& g) -> Node* {
                  Node* lg = g.param(logits);
                  Node* ce = g.cross_entropy_rows(lg, targets);
                  Node* ent = g.entropy_rows(lg);
                  Node* lsm = g.log_softmax_rows(lg);
                  Node* lp = g.gather_cols(lsm, acts);
                  Node* ratio = g.exp_(g.sub(lp, g.param(other)));
                  Node* clipped = g.clamp(ratio, 0.8, 1.2);
                  Node* mn = g.min_(ratio, clipped);
                  Node* total = g.add(g.add(ce, ent), mn);
                  return g.mean_all(total);
                }};
  CHECK(chk.max_rel_err(1e-6) < 1e-6);
}

TEST_CASE("gradients of conv and embeddings") {
  Rng rng(15);
  ParamSet ps;
  const int n = 2, h = 5, w = 5, cin = 3, cout = 4;
  Parameter& x = ps.add("x", random_tensor({n * h * w, cin}, rng));
  Tensor wt({cout, 9 * cin});
  wt.init_xavier(rng, 9 * cin, cout);
  Parameter& conv_w = ps.add("conv.w", std::move(wt));
  Parameter& conv_b = ps.add("conv.b", random_tensor({1, cout}, rng, 0.2));
  Parameter& table = ps.add("emb", random_tensor({6, 4}, rng, 0.5));
  std::vector<int> ids = {0, 5, 2, 2, 1};

  FdChecker chk{ps, [&](Graph& g) -> Node* {
                  Node* y = g.conv2d_nhwc(g.param(x), g.param(conv_w),
                                          g.param(conv_b), n, h, w, 3, 3, 2,
                                          1);
                  Node* e = g.embed(g.param(table), ids);
                  return g.add(g.mean_all(g.tanh_(y)), g.mean_all(e));
                }};
  CHECK(chk.max_rel_err() < 1e-6);
}

TEST_CASE("gradients of grid embedding") {
  Rng rng(16);
  ParamSet ps;
  Parameter& st = ps.add("shape", random_tensor({8, 5}, rng, 0.4));
  Parameter& ct = ps.add("color", random_tensor({6, 5}, rng, 0.4));
  Parameter& dt = ps.add("door", random_tensor({3, 5}, rng, 0.4));
  std::vector<uint8_t> ids = {1, 0, 0, 4, 1, 1, 7, 5, 0, 2, 0, 0};
  FdChecker chk{ps, [&](Graph& g) -> Node* {
                  Node* e = g.grid_embed(g.param(st), g.param(ct),
                                         g.param(dt), ids.data(), 4);
                  return g.mean_all(g.tanh_(e));
                }};
  CHECK(chk.max_rel_err() < 1e-6);
}

TEST_CASE("gradients of composite layers: gru, transformer block") {
  Rng rng(17);
  ParamSet ps;
  GruCell gru(ps, "gru", 3, 4, rng);
  TransformerBlock blk(ps, "blk", 6, 2, 8, "tanh", rng);
  Parameter& x0 = ps.add("x0", random_tensor({2, 3}, rng, 0.5));
  Parameter& h0 = ps.add("h0", random_tensor({2, 4}, rng, 0.5));
  Parameter& seq = ps.add("seq", random_tensor({5, 6}, rng, 0.5));

  FdChecker chk{ps, [&](Graph& g) -> Node* {
                  Node* h = gru.step(g, g.param(x0), g.param(h0));
                  h = gru.step(g, g.param(x0), h);
                  Node* t = blk(g, g.param(seq));
                  return g.add(g.mean_all(h), g.mean_all(t));
                }};
  CHECK(chk.max_rel_err() < 1e-6);
}

TEST_CASE("adam reduces a quadratic") {
  ParamSet ps;
  Rng rng(19);
  Parameter& w = ps.add("w", random_tensor({4, 4}, rng));
  Adam adam;
  adam.lr = 0.05;
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 200; ++it) {
    ps.zero_grad();
    Graph g;
    Node* loss = g.mean_all(g.square(g.param(w)));
    g.backward(loss);
    if (it == 0) first = loss->scalar();
    last = loss->scalar();
    adam.step(ps);
  }
  CHECK(last < 1e-3 * first);
}

TEST_CASE("checkpoint round trip is bit identical") {
  Rng rng(21);
  ParamSet ps;
  ps.add("a.w", random_tensor({7, 3}, rng));
  ps.add("b", random_tensor({1, 9}, rng));
  nlohmann::json meta = {{"kind", "test"}, {"dim", 3}};
  const std::string path = "/tmp/eager_test_ckpt.bin";
  save_checkpoint(path, ps, meta);

  ParamSet ps2;
  Rng rng2(99);
  ps2.add("a.w", random_tensor({7, 3}, rng2));
  ps2.add("b", random_tensor({1, 9}, rng2));
  auto meta2 = load_checkpoint(path, ps2);
  CHECK(meta2.at("kind") == "test");
  for (size_t i = 0; i < ps.all().size(); ++i) {
    const auto& p = ps.all()[i];
    const auto& q = ps2.all()[i];
    REQUIRE(p->v.numel() == q->v.numel());
    for (int64_t j = 0; j < p->v.numel(); ++j)
      CHECK(std::memcmp(&p->v.d[j], &q->v.d[j], sizeof(double)) == 0);
  }
  std::remove(path.c_str());
}

TEST_CASE("corrupted checkpoint version raises a data error") {
  Rng rng(23);
  ParamSet ps;
  ps.add("w", random_tensor({2, 2}, rng));
  const std::string path = "/tmp/eager_test_ckpt_bad.bin";
  save_checkpoint(path, ps, {});
  {
    std::fstream f(path,
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    uint32_t v = 999;
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  CHECK_THROWS_AS(load_checkpoint(path, ps), DataError);
  std::remove(path.c_str());
}
