#pragma once

#include <string>

#include "eager/nn/graph.hpp"
#include "eager/util/rng.hpp"

namespace eager::nn {

Node* activate(Graph& g, Node* x, const std::string& kind);

struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;

  Linear() = default;
  Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng);
  Node* operator()(Graph& g, Node* x) const;
  int out_dim() const { return w->v.cols(); }
};

struct LayerNormP {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  LayerNormP() = default;
  LayerNormP(ParamSet& ps, const std::string& name, int dim);
  Node* operator()(Graph& g, Node* x) const;
};

// Gated recurrent cell over [x, h].
struct GruCell {
  Linear zgate, rgate, cand_x;
  Parameter* cand_h = nullptr;  // [hidden, hidden], no bias
  int hidden = 0;

  GruCell() = default;
  GruCell(ParamSet& ps, const std::string& name, int in, int hidden, Rng& rng);
  Node* step(Graph& g, Node* x, Node* h) const;
};

// Pre-norm transformer block with multi-head self attention and a
// position-wise feed-forward.
struct TransformerBlock {
  LayerNormP ln1, ln2;
  Linear wq, wk, wv, wo, ff1, ff2;
  int heads = 1;
  std::string act = "relu";

  TransformerBlock() = default;
  TransformerBlock(ParamSet& ps, const std::string& name, int dim, int heads,
                   int ffn, const std::string& act, Rng& rng);
  Node* operator()(Graph& g, Node* x) const;
};

// 3x3 convolution over NHWC rows.
struct Conv3x3 {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  int cin = 0, cout = 0, stride = 1;

  Conv3x3() = default;
  Conv3x3(ParamSet& ps, const std::string& name, int cin, int cout, int stride,
          Rng& rng);
  // x [n*h*w, cin] -> [n*oh*ow, cout]
  Node* operator()(Graph& g, Node* x, int n, int h, int w) const;
};

Parameter& add_embedding(ParamSet& ps, const std::string& name, int count,
                         int dim, Rng& rng);

}  // namespace eager::nn
