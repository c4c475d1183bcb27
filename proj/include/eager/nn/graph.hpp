#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eager/nn/optim.hpp"
#include "eager/nn/tensor.hpp"

namespace eager::nn {

struct Node {
  Tensor v;
  Tensor g;  // allocated during backward
  std::vector<Node*> in;
  std::function<void(Node*)> back;
  bool needs_grad = false;
  Parameter* param = nullptr;

  int rows() const { return v.rows(); }
  int cols() const { return v.cols(); }
  double scalar() const { return v.d[0]; }
};

// Define-by-run reverse-mode graph. Creation order is a topological order,
// so backward() is a reverse sweep over the node arena. Parameter leaves
// accumulate their node gradient into Parameter::g.
class Graph {
 public:
  Node* param(Parameter& p);
  Node* constant(Tensor t);

  // matmul with optional transposes; shapes inferred from flags.
  Node* matmul(Node* a, Node* b, bool trans_a = false, bool trans_b = false);
  Node* add(Node* a, Node* b);
  Node* sub(Node* a, Node* b);
  Node* mul(Node* a, Node* b);
  Node* affine(Node* x, double scale, double shift);
  Node* add_bias(Node* x, Node* bias);     // bias [1,C] broadcast over rows
  Node* mul_colvec(Node* x, Node* m);      // m [R,1] broadcast over cols
  Node* relu(Node* x);
  Node* tanh_(Node* x);
  Node* sigmoid(Node* x);
  Node* exp_(Node* x);
  Node* clamp(Node* x, double lo, double hi);
  Node* min_(Node* a, Node* b);
  Node* square(Node* x) { return mul(x, x); }

  Node* reshape(Node* x, int rows, int cols);  // same numel, row-major
  Node* concat_rows(const std::vector<Node*>& parts);
  Node* concat_cols(const std::vector<Node*>& parts);
  Node* slice_rows(Node* x, int r0, int r1);
  Node* slice_cols(Node* x, int c0, int c1);
  Node* row(Node* x, int r) { return slice_rows(x, r, r + 1); }

  Node* softmax_rows(Node* x);
  Node* log_softmax_rows(Node* x);
  Node* layer_norm(Node* x, Node* gain, Node* bias, double eps = 1e-5);

  // table [V,d], ids in [0,V) -> [n,d]
  Node* embed(Node* table, std::vector<int> ids);
  // Summed lookup of the three per-cell ids; ids layout [n_cells, 3].
  Node* grid_embed(Node* shape_tab, Node* color_tab, Node* state_tab,
                   const uint8_t* ids, int n_cells);

  // x rows are NHWC pixels: [n*h*w, c]; w [cout, kh*kw*c]; b [1, cout].
  Node* conv2d_nhwc(Node* x, Node* w, Node* b, int n, int h, int wdt, int kh,
                    int kw, int stride, int pad);

  // x [N*P, C] with gamma/beta [N, C]: y = x*(1+gamma) + beta per channel.
  Node* film(Node* x, Node* gamma, Node* beta, int rows_per_group);
  Node* mean_rows_grouped(Node* x, int rows_per_group);  // [N*P,C] -> [N,C]
  Node* mean_rows(Node* x);                              // [R,C] -> [1,C]
  Node* sum_all(Node* x);                                // -> [1,1]
  Node* mean_all(Node* x);

  Node* gather_cols(Node* x, std::vector<int> ids);  // [B,C] -> [B,1]
  // Per-row cross entropy from logits: [B,C] -> [B,1] losses.
  Node* cross_entropy_rows(Node* logits, std::vector<int> targets);
  Node* entropy_rows(Node* logits);  // [B,C] -> [B,1]

  // accumulate_params=false leaves gradients on the parameter leaf nodes
  // (collect with param_grads) instead of adding into Parameter::g; used
  // for deterministic cross-thread batch accumulation.
  void backward(Node* root, bool accumulate_params = true);
  std::vector<std::pair<Parameter*, const Tensor*>> param_grads() const;

  size_t size() const { return nodes_.size(); }

 private:
  Node* make(Tensor v, std::vector<Node*> in,
             std::function<void(Node*)> back);

  std::deque<Node> nodes_;
};

}  // namespace eager::nn
