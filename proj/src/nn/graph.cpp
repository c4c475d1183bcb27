#include "eager/nn/graph.hpp"

#include <cmath>

#include "eager/nn/kernels.hpp"

namespace eager::nn {

namespace {

bool any_needs_grad(const std::vector<Node*>& in) {
  for (auto* n : in)
    if (n && n->needs_grad) return true;
  return false;
}

void ensure_grad(Node* n) {
  if (n->g.d.empty()) n->g = Tensor(n->v.shape);
}

}  // namespace

Node* Graph::make(Tensor v, std::vector<Node*> in,
                  std::function<void(Node*)> back) {
  nodes_.emplace_back();
  Node* n = &nodes_.back();
  n->v = std::move(v);
  n->in = std::move(in);
  n->needs_grad = any_needs_grad(n->in);
  if (n->needs_grad) n->back = std::move(back);
  return n;
}

Node* Graph::param(Parameter& p) {
  nodes_.emplace_back();
  Node* n = &nodes_.back();
  n->v = p.v;
  n->needs_grad = true;
  n->param = &p;
  return n;
}

Node* Graph::constant(Tensor t) {
  nodes_.emplace_back();
  Node* n = &nodes_.back();
  n->v = std::move(t);
  return n;
}

Node* Graph::matmul(Node* a, Node* b, bool trans_a, bool trans_b) {
  const int m = trans_a ? a->cols() : a->rows();
  const int k = trans_a ? a->rows() : a->cols();
  const int kb = trans_b ? b->cols() : b->rows();
  const int n = trans_b ? b->rows() : b->cols();
  if (k != kb) throw UsageError("matmul inner dim mismatch");
  Tensor out({m, n});
  kernels::matmul(a->v.data(), trans_a, b->v.data(), trans_b, out.data(), m, k,
                  n, false);
  return make(std::move(out), {a, b}, [m, k, n, trans_a, trans_b](Node* self) {
    Node* a = self->in[0];
    Node* b = self->in[1];
    const double* gc = self->g.data();
    if (a->needs_grad) {
      ensure_grad(a);
      if (!trans_a) {
        // gA += trans_b ? gC*B : gC*B^T
        kernels::matmul(gc, false, b->v.data(), !trans_b, a->g.data(), m, n, k,
                        true);
      } else if (!trans_b) {
        // gA_stored [k,m] += B * gC^T
        kernels::matmul(b->v.data(), false, gc, true, a->g.data(), k, n, m,
                        true);
      } else {
        // gA_stored [k,m] += B^T * gC^T
        kernels::matmul(b->v.data(), true, gc, true, a->g.data(), k, n, m,
                        true);
      }
    }
    if (b->needs_grad) {
      ensure_grad(b);
      if (!trans_b) {
        // gB [k,n] += A_eff^T * gC
        kernels::matmul(a->v.data(), !trans_a, gc, false, b->g.data(), k, m, n,
                        true);
      } else if (!trans_a) {
        // gB_stored [n,k] += gC^T * A
        kernels::matmul(gc, true, a->v.data(), false, b->g.data(), n, m, k,
                        true);
      } else {
        // gB_stored [n,k] += gC^T * A^T
        kernels::matmul(gc, true, a->v.data(), true, b->g.data(), n, m, k,
                        true);
      }
    }
  });
}

Node* Graph::add(Node* a, Node* b) {
  if (!a->v.same_shape(b->v)) throw UsageError("add shape mismatch");
  Tensor out = a->v;
  for (int64_t i = 0; i < out.numel(); ++i) out.d[i] += b->v.d[i];
  return make(std::move(out), {a, b}, [](Node* self) {
    for (Node* x : self->in) {
      if (!x->needs_grad) continue;
      ensure_grad(x);
      for (int64_t i = 0; i < x->g.numel(); ++i) x->g.d[i] += self->g.d[i];
    }
  });
}

Node* Graph::sub(Node* a, Node* b) {
  if (!a->v.same_shape(b->v)) throw UsageError("sub shape mismatch");
  Tensor out = a->v;
  for (int64_t i = 0; i < out.numel(); ++i) out.d[i] -= b->v.d[i];
  return make(std::move(out), {a, b}, [](Node* self) {
    Node* a = self->in[0];
    Node* b = self->in[1];
    if (a->needs_grad) {
      ensure_grad(a);
      for (int64_t i = 0; i < a->g.numel(); ++i) a->g.d[i] += self->g.d[i];
    }
    if (b->needs_grad) {
      ensure_grad(b);
      for (int64_t i = 0; i < b->g.numel(); ++i) b->g.d[i] -= self->g.d[i];
    }
  });
}

Node* Graph::mul(Node* a, Node* b) {
  if (!a->v.same_shape(b->v)) throw UsageError("mul shape mismatch");
  Tensor out = a->v;
  for (int64_t i = 0; i < out.numel(); ++i) out.d[i] *= b->v.d[i];
  return make(std::move(out), {a, b}, [](Node* self) {
    Node* a = self->in[0];
    Node* b = self->in[1];
    if (a->needs_grad) {
      ensure_grad(a);
      for (int64_t i = 0; i < a->g.numel(); ++i)
        a->g.d[i] += self->g.d[i] * b->v.d[i];
    }
    if (b->needs_grad) {
      ensure_grad(b);
      for (int64_t i = 0; i < b->g.numel(); ++i)
        b->g.d[i] += self->g.d[i] * a->v.d[i];
    }
  });
}

Node* Graph::affine(Node* x, double scale, double shift) {
  Tensor out = x->v;
  for (auto& v : out.d) v = scale * v + shift;
  return make(std::move(out), {x}, [scale](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int64_t i = 0; i < x->g.numel(); ++i)
      x->g.d[i] += scale * self->g.d[i];
  });
}

Node* Graph::add_bias(Node* x, Node* bias) {
  if (bias->rows() != 1 || bias->cols() != x->cols())
    throw UsageError("add_bias shape mismatch");
  Tensor out = x->v;
  kernels::add_bias_rows(out.data(), x->rows(), x->cols(), bias->v.data());
  return make(std::move(out), {x, bias}, [](Node* self) {
    Node* x = self->in[0];
    Node* b = self->in[1];
    if (x->needs_grad) {
      ensure_grad(x);
      for (int64_t i = 0; i < x->g.numel(); ++i) x->g.d[i] += self->g.d[i];
    }
    if (b->needs_grad) {
      ensure_grad(b);
      kernels::bias_grad_rows(self->g.data(), self->rows(), self->cols(),
                              b->g.data());
    }
  });
}

Node* Graph::mul_colvec(Node* x, Node* m) {
  if (m->rows() != x->rows() || m->cols() != 1)
    throw UsageError("mul_colvec shape mismatch");
  const int rows = x->rows(), cols = x->cols();
  Tensor out = x->v;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at2(r, c) *= m->v.at(r);
  return make(std::move(out), {x, m}, [rows, cols](Node* self) {
    Node* x = self->in[0];
    Node* m = self->in[1];
    if (x->needs_grad) {
      ensure_grad(x);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          x->g.at2(r, c) += self->g.at2(r, c) * m->v.at(r);
    }
    if (m->needs_grad) {
      ensure_grad(m);
      for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c)
          acc += self->g.at2(r, c) * x->v.at2(r, c);
        m->g.at(r) += acc;
      }
    }
  });
}

Node* Graph::relu(Node* x) {
  Tensor out(x->v.shape);
  kernels::relu(x->v.data(), out.data(), x->v.numel());
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    kernels::relu_grad(x->v.data(), self->g.data(), x->g.data(),
                       x->v.numel());
  });
}

Node* Graph::tanh_(Node* x) {
  Tensor out(x->v.shape);
  kernels::tanh_fwd(x->v.data(), out.data(), x->v.numel());
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    kernels::tanh_grad(self->v.data(), self->g.data(), x->g.data(),
                       x->v.numel());
  });
}

Node* Graph::sigmoid(Node* x) {
  Tensor out(x->v.shape);
  kernels::sigmoid(x->v.data(), out.data(), x->v.numel());
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    kernels::sigmoid_grad(self->v.data(), self->g.data(), x->g.data(),
                          x->v.numel());
  });
}

Node* Graph::exp_(Node* x) {
  Tensor out(x->v.shape);
  for (int64_t i = 0; i < x->v.numel(); ++i) out.d[i] = std::exp(x->v.d[i]);
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int64_t i = 0; i < x->g.numel(); ++i)
      x->g.d[i] += self->g.d[i] * self->v.d[i];
  });
}

Node* Graph::clamp(Node* x, double lo, double hi) {
  Tensor out = x->v;
  for (auto& v : out.d) v = v < lo ? lo : (v > hi ? hi : v);
  return make(std::move(out), {x}, [lo, hi](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int64_t i = 0; i < x->g.numel(); ++i) {
      const double v = x->v.d[i];
      if (v >= lo && v <= hi) x->g.d[i] += self->g.d[i];
    }
  });
}

Node* Graph::min_(Node* a, Node* b) {
  if (!a->v.same_shape(b->v)) throw UsageError("min shape mismatch");
  Tensor out = a->v;
  for (int64_t i = 0; i < out.numel(); ++i)
    out.d[i] = a->v.d[i] <= b->v.d[i] ? a->v.d[i] : b->v.d[i];
  return make(std::move(out), {a, b}, [](Node* self) {
    Node* a = self->in[0];
    Node* b = self->in[1];
    for (int64_t i = 0; i < self->g.numel(); ++i) {
      Node* dst = a->v.d[i] <= b->v.d[i] ? a : b;
      if (!dst->needs_grad) continue;
      ensure_grad(dst);
      dst->g.d[i] += self->g.d[i];
    }
  });
}

Node* Graph::reshape(Node* x, int rows, int cols) {
  if (static_cast<int64_t>(rows) * cols != x->v.numel())
    throw UsageError("reshape numel mismatch");
  Tensor out({rows, cols});
  out.d = x->v.d;
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int64_t i = 0; i < x->g.numel(); ++i) x->g.d[i] += self->g.d[i];
  });
}

Node* Graph::concat_rows(const std::vector<Node*>& parts) {
  const int cols = parts.at(0)->cols();
  int rows = 0;
  for (auto* p : parts) {
    if (p->cols() != cols) throw UsageError("concat_rows col mismatch");
    rows += p->rows();
  }
  Tensor out({rows, cols});
  int64_t off = 0;
  for (auto* p : parts) {
    std::copy(p->v.d.begin(), p->v.d.end(), out.d.begin() + off);
    off += p->v.numel();
  }
  return make(std::move(out), parts, [](Node* self) {
    int64_t off = 0;
    for (Node* p : self->in) {
      if (p->needs_grad) {
        ensure_grad(p);
        for (int64_t i = 0; i < p->g.numel(); ++i)
          p->g.d[i] += self->g.d[off + i];
      }
      off += p->v.numel();
    }
  });
}

Node* Graph::concat_cols(const std::vector<Node*>& parts) {
  const int rows = parts.at(0)->rows();
  int cols = 0;
  for (auto* p : parts) {
    if (p->rows() != rows) throw UsageError("concat_cols row mismatch");
    cols += p->cols();
  }
  Tensor out({rows, cols});
  int c0 = 0;
  for (auto* p : parts) {
    const int pc = p->cols();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < pc; ++c) out.at2(r, c0 + c) = p->v.at2(r, c);
    c0 += pc;
  }
  return make(std::move(out), parts, [rows](Node* self) {
    int c0 = 0;
    for (Node* p : self->in) {
      const int pc = p->cols();
      if (p->needs_grad) {
        ensure_grad(p);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < pc; ++c)
            p->g.at2(r, c) += self->g.at2(r, c0 + c);
      }
      c0 += pc;
    }
  });
}

Node* Graph::slice_rows(Node* x, int r0, int r1) {
  const int cols = x->cols();
  Tensor out({r1 - r0, cols});
  std::copy(x->v.d.begin() + static_cast<int64_t>(r0) * cols,
            x->v.d.begin() + static_cast<int64_t>(r1) * cols, out.d.begin());
  return make(std::move(out), {x}, [r0, cols](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    const int64_t off = static_cast<int64_t>(r0) * cols;
    for (int64_t i = 0; i < self->g.numel(); ++i)
      x->g.d[off + i] += self->g.d[i];
  });
}

Node* Graph::slice_cols(Node* x, int c0, int c1) {
  const int rows = x->rows(), cols = x->cols(), w = c1 - c0;
  Tensor out({rows, w});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < w; ++c) out.at2(r, c) = x->v.at2(r, c0 + c);
  return make(std::move(out), {x}, [rows, w, c0](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < w; ++c)
        x->g.at2(r, c0 + c) += self->g.at2(r, c);
  });
}

Node* Graph::softmax_rows(Node* x) {
  Tensor out(x->v.shape);
  kernels::softmax_rows(x->v.data(), out.data(), x->rows(), x->cols());
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    kernels::softmax_grad_rows(self->v.data(), self->g.data(), x->g.data(),
                               x->rows(), x->cols());
  });
}

Node* Graph::log_softmax_rows(Node* x) {
  const int rows = x->rows(), cols = x->cols();
  Tensor out(x->v.shape);
  for (int r = 0; r < rows; ++r) {
    const double* xr = x->v.data() + static_cast<int64_t>(r) * cols;
    double* yr = out.data() + static_cast<int64_t>(r) * cols;
    double mx = xr[0];
    for (int c = 1; c < cols; ++c) mx = xr[c] > mx ? xr[c] : mx;
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) sum += std::exp(xr[c] - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
  }
  return make(std::move(out), {x}, [rows, cols](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int r = 0; r < rows; ++r) {
      const double* yr = self->v.data() + static_cast<int64_t>(r) * cols;
      const double* gyr = self->g.data() + static_cast<int64_t>(r) * cols;
      double* gxr = x->g.data() + static_cast<int64_t>(r) * cols;
      double gsum = 0.0;
      for (int c = 0; c < cols; ++c) gsum += gyr[c];
      for (int c = 0; c < cols; ++c)
        gxr[c] += gyr[c] - std::exp(yr[c]) * gsum;
    }
  });
}

Node* Graph::layer_norm(Node* x, Node* gain, Node* bias, double eps) {
  const int rows = x->rows(), cols = x->cols();
  Tensor out(x->v.shape);
  auto mean = std::make_shared<Tensor>(Tensor({rows, 1}));
  auto rstd = std::make_shared<Tensor>(Tensor({rows, 1}));
  kernels::layer_norm_rows(x->v.data(), gain->v.data(), bias->v.data(),
                           out.data(), mean->data(), rstd->data(), rows, cols,
                           eps);
  return make(std::move(out), {x, gain, bias},
              [rows, cols, mean, rstd](Node* self) {
                Node* x = self->in[0];
                Node* gain = self->in[1];
                Node* bias = self->in[2];
                ensure_grad(x);
                ensure_grad(gain);
                ensure_grad(bias);
                kernels::layer_norm_grad_rows(
                    x->v.data(), gain->v.data(), mean->data(), rstd->data(),
                    self->g.data(), x->g.data(), gain->g.data(),
                    bias->g.data(), rows, cols);
              });
}

Node* Graph::embed(Node* table, std::vector<int> ids) {
  const int d = table->cols();
  const int n = static_cast<int>(ids.size());
  Tensor out({n, d});
  for (int i = 0; i < n; ++i)
    std::copy_n(table->v.data() + static_cast<int64_t>(ids[i]) * d, d,
                out.data() + static_cast<int64_t>(i) * d);
  return make(std::move(out), {table}, [ids = std::move(ids), d](Node* self) {
    Node* table = self->in[0];
    ensure_grad(table);
    for (size_t i = 0; i < ids.size(); ++i) {
      double* dst = table->g.data() + static_cast<int64_t>(ids[i]) * d;
      const double* src = self->g.data() + static_cast<int64_t>(i) * d;
      for (int c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Node* Graph::grid_embed(Node* shape_tab, Node* color_tab, Node* state_tab,
                        const uint8_t* ids, int n_cells) {
  const int d = shape_tab->cols();
  Tensor out({n_cells, d});
  for (int i = 0; i < n_cells; ++i) {
    const double* s =
        shape_tab->v.data() + static_cast<int64_t>(ids[3 * i]) * d;
    const double* c =
        color_tab->v.data() + static_cast<int64_t>(ids[3 * i + 1]) * d;
    const double* st =
        state_tab->v.data() + static_cast<int64_t>(ids[3 * i + 2]) * d;
    double* o = out.data() + static_cast<int64_t>(i) * d;
    for (int j = 0; j < d; ++j) o[j] = s[j] + c[j] + st[j];
  }
  std::vector<uint8_t> ids_copy(ids, ids + 3 * n_cells);
  return make(std::move(out), {shape_tab, color_tab, state_tab},
              [ids = std::move(ids_copy), d, n_cells](Node* self) {
                Node* tabs[3] = {self->in[0], self->in[1], self->in[2]};
                for (auto* t : tabs) ensure_grad(t);
                for (int i = 0; i < n_cells; ++i) {
                  const double* src =
                      self->g.data() + static_cast<int64_t>(i) * d;
                  for (int k = 0; k < 3; ++k) {
                    double* dst = tabs[k]->g.data() +
                                  static_cast<int64_t>(ids[3 * i + k]) * d;
                    for (int j = 0; j < d; ++j) dst[j] += src[j];
                  }
                }
              });
}

Node* Graph::conv2d_nhwc(Node* x, Node* w, Node* b, int n, int h, int wdt,
                         int kh, int kw, int stride, int pad) {
  const int c = x->cols();
  if (x->rows() != n * h * wdt) throw UsageError("conv2d input shape");
  const int oh = kernels::conv_out_dim(h, kh, stride, pad);
  const int ow = kernels::conv_out_dim(wdt, kw, stride, pad);
  const int cout = w->rows();
  const int patch = kh * kw * c;
  if (w->cols() != patch) throw UsageError("conv2d weight shape");
  auto cols = std::make_shared<Tensor>(
      Tensor({n * oh * ow, patch}));
  kernels::im2col_nhwc(x->v.data(), n, h, wdt, c, kh, kw, stride, pad,
                       cols->data(), oh, ow);
  Tensor out({n * oh * ow, cout});
  kernels::matmul(cols->data(), false, w->v.data(), true, out.data(),
                  n * oh * ow, patch, cout, false);
  kernels::add_bias_rows(out.data(), n * oh * ow, cout, b->v.data());
  return make(
      std::move(out), {x, w, b},
      [cols, n, h, wdt, c, kh, kw, stride, pad, oh, ow, patch,
       cout](Node* self) {
        Node* x = self->in[0];
        Node* w = self->in[1];
        Node* b = self->in[2];
        const int rows = n * oh * ow;
        if (b->needs_grad) {
          ensure_grad(b);
          kernels::bias_grad_rows(self->g.data(), rows, cout, b->g.data());
        }
        if (w->needs_grad) {
          ensure_grad(w);
          // gW [cout, patch] += gY^T * cols
          kernels::matmul(self->g.data(), true, cols->data(), false,
                          w->g.data(), cout, rows, patch, true);
        }
        if (x->needs_grad) {
          ensure_grad(x);
          Tensor gcols({rows, patch});
          kernels::matmul(self->g.data(), false, w->v.data(), false,
                          gcols.data(), rows, cout, patch, false);
          kernels::col2im_nhwc(gcols.data(), n, h, wdt, c, kh, kw, stride,
                               pad, x->g.data(), oh, ow);
        }
      });
}

Node* Graph::film(Node* x, Node* gamma, Node* beta, int rows_per_group) {
  const int rows = x->rows(), cols = x->cols();
  if (gamma->cols() != cols || beta->cols() != cols ||
      gamma->rows() * rows_per_group != rows)
    throw UsageError("film shape mismatch");
  Tensor out(x->v.shape);
  for (int r = 0; r < rows; ++r) {
    const int gidx = r / rows_per_group;
    for (int c = 0; c < cols; ++c)
      out.at2(r, c) = x->v.at2(r, c) * (1.0 + gamma->v.at2(gidx, c)) +
                      beta->v.at2(gidx, c);
  }
  return make(std::move(out), {x, gamma, beta},
              [rows, cols, rows_per_group](Node* self) {
                Node* x = self->in[0];
                Node* gamma = self->in[1];
                Node* beta = self->in[2];
                if (x->needs_grad) {
                  ensure_grad(x);
                  for (int r = 0; r < rows; ++r) {
                    const int gi = r / rows_per_group;
                    for (int c = 0; c < cols; ++c)
                      x->g.at2(r, c) += self->g.at2(r, c) *
                                        (1.0 + gamma->v.at2(gi, c));
                  }
                }
                if (gamma->needs_grad) {
                  ensure_grad(gamma);
                  for (int r = 0; r < rows; ++r) {
                    const int gi = r / rows_per_group;
                    for (int c = 0; c < cols; ++c)
                      gamma->g.at2(gi, c) +=
                          self->g.at2(r, c) * x->v.at2(r, c);
                  }
                }
                if (beta->needs_grad) {
                  ensure_grad(beta);
                  for (int r = 0; r < rows; ++r) {
                    const int gi = r / rows_per_group;
                    for (int c = 0; c < cols; ++c)
                      beta->g.at2(gi, c) += self->g.at2(r, c);
                  }
                }
              });
}

Node* Graph::mean_rows_grouped(Node* x, int rows_per_group) {
  const int rows = x->rows(), cols = x->cols();
  if (rows % rows_per_group != 0) throw UsageError("mean group mismatch");
  const int groups = rows / rows_per_group;
  Tensor out({groups, cols});
  for (int gidx = 0; gidx < groups; ++gidx)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < rows_per_group; ++r)
        acc += x->v.at2(gidx * rows_per_group + r, c);
      out.at2(gidx, c) = acc / rows_per_group;
    }
  return make(std::move(out), {x}, [rows_per_group, cols](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    const double inv = 1.0 / rows_per_group;
    const int groups = self->rows();
    for (int gidx = 0; gidx < groups; ++gidx)
      for (int r = 0; r < rows_per_group; ++r)
        for (int c = 0; c < cols; ++c)
          x->g.at2(gidx * rows_per_group + r, c) +=
              self->g.at2(gidx, c) * inv;
  });
}

Node* Graph::mean_rows(Node* x) { return mean_rows_grouped(x, x->rows()); }

Node* Graph::sum_all(Node* x) {
  Tensor out({1, 1});
  double acc = 0.0;
  for (double v : x->v.d) acc += v;
  out.d[0] = acc;
  return make(std::move(out), {x}, [](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int64_t i = 0; i < x->g.numel(); ++i) x->g.d[i] += self->g.d[0];
  });
}

Node* Graph::mean_all(Node* x) {
  const double inv = 1.0 / static_cast<double>(x->v.numel());
  return affine(sum_all(x), inv, 0.0);
}

Node* Graph::gather_cols(Node* x, std::vector<int> ids) {
  const int rows = x->rows();
  if (static_cast<int>(ids.size()) != rows)
    throw UsageError("gather_cols size mismatch");
  Tensor out({rows, 1});
  for (int r = 0; r < rows; ++r) out.at(r) = x->v.at2(r, ids[r]);
  return make(std::move(out), {x}, [ids = std::move(ids)](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int r = 0; r < self->rows(); ++r)
      x->g.at2(r, ids[r]) += self->g.at(r);
  });
}

Node* Graph::cross_entropy_rows(Node* logits, std::vector<int> targets) {
  const int rows = logits->rows(), cols = logits->cols();
  if (static_cast<int>(targets.size()) != rows)
    throw UsageError("cross_entropy targets size");
  auto probs = std::make_shared<Tensor>(Tensor({rows, cols}));
  kernels::softmax_rows(logits->v.data(), probs->data(), rows, cols);
  Tensor out({rows, 1});
  for (int r = 0; r < rows; ++r) {
    const double p = probs->at2(r, targets[r]);
    out.at(r) = -std::log(p > 1e-300 ? p : 1e-300);
  }
  return make(std::move(out), {logits},
              [probs, targets = std::move(targets), cols](Node* self) {
                Node* x = self->in[0];
                ensure_grad(x);
                for (int r = 0; r < self->rows(); ++r) {
                  const double gy = self->g.at(r);
                  for (int c = 0; c < cols; ++c) {
                    const double onehot = c == targets[r] ? 1.0 : 0.0;
                    x->g.at2(r, c) += gy * (probs->at2(r, c) - onehot);
                  }
                }
              });
}

Node* Graph::entropy_rows(Node* logits) {
  const int rows = logits->rows(), cols = logits->cols();
  auto probs = std::make_shared<Tensor>(Tensor({rows, cols}));
  kernels::softmax_rows(logits->v.data(), probs->data(), rows, cols);
  Tensor out({rows, 1});
  for (int r = 0; r < rows; ++r) {
    double h = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double p = probs->at2(r, c);
      if (p > 0.0) h -= p * std::log(p);
    }
    out.at(r) = h;
  }
  return make(std::move(out), {logits}, [probs, cols](Node* self) {
    Node* x = self->in[0];
    ensure_grad(x);
    for (int r = 0; r < self->rows(); ++r) {
      const double gy = self->g.at(r);
      const double h = self->v.at(r);
      for (int c = 0; c < cols; ++c) {
        const double p = probs->at2(r, c);
        if (p > 0.0) x->g.at2(r, c) += gy * (-p * (std::log(p) + h));
      }
    }
  });
}

void Graph::backward(Node* root, bool accumulate_params) {
  if (root->v.numel() != 1) throw UsageError("backward root must be scalar");
  for (auto& n : nodes_)
    if (n.needs_grad && n.g.d.empty()) n.g = Tensor(n.v.shape);
  root->g.d[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (!n.needs_grad) continue;
    if (n.back) n.back(&n);
    if (n.param && accumulate_params) {
      for (int64_t i = 0; i < n.g.numel(); ++i) n.param->g.d[i] += n.g.d[i];
    }
  }
}

std::vector<std::pair<Parameter*, const Tensor*>> Graph::param_grads() const {
  std::vector<std::pair<Parameter*, const Tensor*>> out;
  for (const auto& n : nodes_)
    if (n.param && !n.g.d.empty()) out.push_back({n.param, &n.g});
  return out;
}

}  // namespace eager::nn
