#pragma once

#include <cstdint>

namespace eager::nn::kernels {

// Global switch between the serial reference kernels and the OpenMP ones.
// Both variants accumulate every output element in the same order, so they
// produce bit-identical results; the tests assert exactly that.
bool& parallel_enabled();

// C[m,n] = op(A) * op(B) (+= when accumulate). A is [m,k] (or [k,m] when
// trans_a), B is [k,n] (or [n,k] when trans_b).
void matmul(const double* a, bool trans_a, const double* b, bool trans_b,
            double* c, int m, int k, int n, bool accumulate);

void add_bias_rows(double* x, int rows, int cols, const double* bias);
// gb[c] (+)= sum over rows of g[r,c]
void bias_grad_rows(const double* g, int rows, int cols, double* gb);

void relu(const double* x, double* y, int64_t n);
void relu_grad(const double* x, const double* gy, double* gx, int64_t n);
void tanh_fwd(const double* x, double* y, int64_t n);
void tanh_grad(const double* y, const double* gy, double* gx, int64_t n);
void sigmoid(const double* x, double* y, int64_t n);
void sigmoid_grad(const double* y, const double* gy, double* gx, int64_t n);

void softmax_rows(const double* x, double* y, int rows, int cols);
// gx += y .* (gy - rowsum(gy .* y))
void softmax_grad_rows(const double* y, const double* gy, double* gx, int rows,
                       int cols);

void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, double* mean, double* rstd, int rows, int cols,
                     double eps);
void layer_norm_grad_rows(const double* x, const double* gain,
                          const double* mean, const double* rstd,
                          const double* gy, double* gx, double* ggain,
                          double* gbias, int rows, int cols);

// NHWC im2col: x is [n, h, w, c] row-major; cols is
// [n*oh*ow, kh*kw*c]. Out-of-bounds taps read zero.
void im2col_nhwc(const double* x, int n, int h, int w, int c, int kh, int kw,
                 int stride, int pad, double* cols, int oh, int ow);
void col2im_nhwc(const double* cols, int n, int h, int w, int c, int kh,
                 int kw, int stride, int pad, double* gx, int oh, int ow);

void adam_step(double* w, const double* g, double* m, double* v, int64_t n,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2);

int conv_out_dim(int in, int k, int stride, int pad);

}  // namespace eager::nn::kernels
