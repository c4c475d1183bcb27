#include "eager/nn/layers.hpp"

#include <cmath>

namespace eager::nn {

Node* activate(Graph& g, Node* x, const std::string& kind) {
  if (kind == "relu") return g.relu(x);
  if (kind == "tanh") return g.tanh_(x);
  throw ConfigError("unknown activation: " + kind);
}

Linear::Linear(ParamSet& ps, const std::string& name, int in, int out,
               Rng& rng) {
  Tensor wt({in, out});
  wt.init_xavier(rng, in, out);
  w = &ps.add(name + ".w", std::move(wt));
  b = &ps.add(name + ".b", Tensor({1, out}));
}

Node* Linear::operator()(Graph& g, Node* x) const {
  return g.add_bias(g.matmul(x, g.param(*w)), g.param(*b));
}

LayerNormP::LayerNormP(ParamSet& ps, const std::string& name, int dim) {
  Tensor gt({1, dim});
  gt.fill(1.0);
  gain = &ps.add(name + ".gain", std::move(gt));
  bias = &ps.add(name + ".bias", Tensor({1, dim}));
}

Node* LayerNormP::operator()(Graph& g, Node* x) const {
  return g.layer_norm(x, g.param(*gain), g.param(*bias));
}

GruCell::GruCell(ParamSet& ps, const std::string& name, int in, int hid,
                 Rng& rng)
    : zgate(ps, name + ".z", in + hid, hid, rng),
      rgate(ps, name + ".r", in + hid, hid, rng),
      cand_x(ps, name + ".nx", in, hid, rng),
      hidden(hid) {
  Tensor wh({hid, hid});
  wh.init_xavier(rng, hid, hid);
  cand_h = &ps.add(name + ".nh", std::move(wh));
}

Node* GruCell::step(Graph& g, Node* x, Node* h) const {
  Node* xh = g.concat_cols({x, h});
  Node* z = g.sigmoid(zgate(g, xh));
  Node* r = g.sigmoid(rgate(g, xh));
  Node* rh = g.mul(r, h);
  Node* cand =
      g.tanh_(g.add(cand_x(g, x), g.matmul(rh, g.param(*cand_h))));
  // h' = (1-z)*cand + z*h
  Node* one_minus_z = g.affine(z, -1.0, 1.0);
  return g.add(g.mul(one_minus_z, cand), g.mul(z, h));
}

TransformerBlock::TransformerBlock(ParamSet& ps, const std::string& name,
                                   int dim, int nheads, int ffn,
                                   const std::string& activation, Rng& rng)
    : ln1(ps, name + ".ln1", dim),
      ln2(ps, name + ".ln2", dim),
      wq(ps, name + ".q", dim, dim, rng),
      wk(ps, name + ".k", dim, dim, rng),
      wv(ps, name + ".v", dim, dim, rng),
      wo(ps, name + ".o", dim, dim, rng),
      ff1(ps, name + ".ff1", dim, ffn, rng),
      ff2(ps, name + ".ff2", ffn, dim, rng),
      heads(nheads),
      act(activation) {
  if (dim % nheads != 0) throw ConfigError("dim not divisible by heads");
}

Node* TransformerBlock::operator()(Graph& g, Node* x) const {
  const int dim = x->cols();
  const int dh = dim / heads;
  Node* xn = ln1(g, x);
  Node* q = wq(g, xn);
  Node* k = wk(g, xn);
  Node* v = wv(g, xn);
  std::vector<Node*> outs;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Node* qh = g.slice_cols(q, h * dh, (h + 1) * dh);
    Node* kh = g.slice_cols(k, h * dh, (h + 1) * dh);
    Node* vh = g.slice_cols(v, h * dh, (h + 1) * dh);
    Node* scores = g.affine(g.matmul(qh, kh, false, true), scale, 0.0);
    Node* attn = g.softmax_rows(scores);
    outs.push_back(g.matmul(attn, vh));
  }
  Node* merged = heads == 1 ? outs[0] : g.concat_cols(outs);
  x = g.add(x, wo(g, merged));
  Node* ff = ff2(g, activate(g, ff1(g, ln2(g, x)), act));
  return g.add(x, ff);
}

Conv3x3::Conv3x3(ParamSet& ps, const std::string& name, int in, int out,
                 int s, Rng& rng)
    : cin(in), cout(out), stride(s) {
  Tensor wt({out, 9 * in});
  wt.init_xavier(rng, 9 * in, out);
  w = &ps.add(name + ".w", std::move(wt));
  b = &ps.add(name + ".b", Tensor({1, out}));
}

Node* Conv3x3::operator()(Graph& g, Node* x, int n, int h, int wdim) const {
  return g.conv2d_nhwc(x, g.param(*w), g.param(*b), n, h, wdim, 3, 3, stride,
                       1);
}

Parameter& add_embedding(ParamSet& ps, const std::string& name, int count,
                         int dim, Rng& rng) {
  Tensor t({count, dim});
  t.init_normal(rng, 0.1);
  return ps.add(name, std::move(t));
}

}  // namespace eager::nn
