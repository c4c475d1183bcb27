#include "eager/nn/kernels.hpp"

#include <omp.h>

#include <cmath>

namespace eager::nn::kernels {

bool& parallel_enabled() {
  static bool enabled = true;
  return enabled;
}

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// Serial reference kernels. The OpenMP variants below parallelise over
// independent output elements only, keeping the per-element accumulation
// order identical to these.
// ---------------------------------------------------------------------------
namespace ref {

inline void matmul_row(const double* a, const double* b, bool tb, double* crow,
                       int i, int k, int n, bool accumulate) {
  if (!accumulate)
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
  if (!tb) {
    // C[i,:] += sum_p A[i,p] * B[p,:]
    for (int p = 0; p < k; ++p) {
      const double aip = a[static_cast<int64_t>(i) * k + p];
      const double* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  } else {
    // C[i,j] += dot(A[i,:], B[j,:])
    const double* arow = a + static_cast<int64_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<int64_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void matmul(const double* a, bool ta, const double* b, bool tb, double* c,
            int m, int k, int n, bool accumulate) {
  if (!ta && !tb) {
    for (int i = 0; i < m; ++i)
      matmul_row(a, b, false, c + static_cast<int64_t>(i) * n, i, k, n,
                 accumulate);
  } else if (!ta && tb) {
    for (int i = 0; i < m; ++i)
      matmul_row(a, b, true, c + static_cast<int64_t>(i) * n, i, k, n,
                 accumulate);
  } else if (ta && !tb) {
    // A [k,m], B [k,n]
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<int64_t>(i) * n;
      if (!accumulate)
        for (int j = 0; j < n; ++j) crow[j] = 0.0;
      for (int p = 0; p < k; ++p) {
        const double api = a[static_cast<int64_t>(p) * m + i];
        const double* brow = b + static_cast<int64_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else {
    // A [k,m], B [n,k]
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<int64_t>(i) * n;
      if (!accumulate)
        for (int j = 0; j < n; ++j) crow[j] = 0.0;
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p)
          acc += a[static_cast<int64_t>(p) * m + i] *
                 b[static_cast<int64_t>(j) * k + p];
        crow[j] += acc;
      }
    }
  }
}

}  // namespace ref

namespace par {

void matmul(const double* a, bool ta, const double* b, bool tb, double* c,
            int m, int k, int n, bool accumulate) {
  if (!ta && !tb) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<int64_t>(i) * n;
      if (!accumulate)
        for (int j = 0; j < n; ++j) crow[j] = 0.0;
      for (int p = 0; p < k; ++p) {
        const double aip = a[static_cast<int64_t>(i) * k + p];
        const double* brow = b + static_cast<int64_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else if (!ta && tb) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<int64_t>(i) * n;
      const double* arow = a + static_cast<int64_t>(i) * k;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<int64_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] = accumulate ? crow[j] + acc : acc;
      }
    }
  } else if (ta && !tb) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<int64_t>(i) * n;
      if (!accumulate)
        for (int j = 0; j < n; ++j) crow[j] = 0.0;
      for (int p = 0; p < k; ++p) {
        const double api = a[static_cast<int64_t>(p) * m + i];
        const double* brow = b + static_cast<int64_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p)
          acc += a[static_cast<int64_t>(p) * m + i] *
                 b[static_cast<int64_t>(j) * k + p];
        crow[j] = accumulate ? crow[j] + acc : acc;
      }
    }
  }
}

}  // namespace par

void matmul(const double* a, bool ta, const double* b, bool tb, double* c,
            int m, int k, int n, bool accumulate) {
  if (parallel_enabled())
    par::matmul(a, ta, b, tb, c, m, k, n, accumulate);
  else
    ref::matmul(a, ta, b, tb, c, m, k, n, accumulate);
}

// ---------------------------------------------------------------------------
// Row/elementwise kernels. Shared loop bodies; OMP over rows or chunks.
// ---------------------------------------------------------------------------

void add_bias_rows(double* x, int rows, int cols, const double* bias) {
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      double* row = x + static_cast<int64_t>(r) * cols;
      for (int c = 0; c < cols; ++c) row[c] += bias[c];
    }
  } else {
    for (int r = 0; r < rows; ++r) {
      double* row = x + static_cast<int64_t>(r) * cols;
      for (int c = 0; c < cols; ++c) row[c] += bias[c];
    }
  }
}

void bias_grad_rows(const double* g, int rows, int cols, double* gb) {
  // One output element per column; fixed row order.
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < rows; ++r)
        acc += g[static_cast<int64_t>(r) * cols + c];
      gb[c] += acc;
    }
  } else {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < rows; ++r)
        acc += g[static_cast<int64_t>(r) * cols + c];
      gb[c] += acc;
    }
  }
}

#define EAGER_ELEMENTWISE(body)                      \
  if (parallel_enabled()) {                          \
    _Pragma("omp parallel for schedule(static)")     \
    for (int64_t i = 0; i < n; ++i) { body }         \
  } else {                                           \
    for (int64_t i = 0; i < n; ++i) { body }         \
  }

void relu(const double* x, double* y, int64_t n) {
  EAGER_ELEMENTWISE(y[i] = x[i] > 0.0 ? x[i] : 0.0;)
}
void relu_grad(const double* x, const double* gy, double* gx, int64_t n) {
  EAGER_ELEMENTWISE(gx[i] += x[i] > 0.0 ? gy[i] : 0.0;)
}
void tanh_fwd(const double* x, double* y, int64_t n) {
  EAGER_ELEMENTWISE(y[i] = std::tanh(x[i]);)
}
void tanh_grad(const double* y, const double* gy, double* gx, int64_t n) {
  EAGER_ELEMENTWISE(gx[i] += (1.0 - y[i] * y[i]) * gy[i];)
}
void sigmoid(const double* x, double* y, int64_t n) {
  EAGER_ELEMENTWISE(y[i] = 1.0 / (1.0 + std::exp(-x[i]));)
}
void sigmoid_grad(const double* y, const double* gy, double* gx, int64_t n) {
  EAGER_ELEMENTWISE(gx[i] += y[i] * (1.0 - y[i]) * gy[i];)
}

#undef EAGER_ELEMENTWISE

static inline void softmax_row(const double* x, double* y, int cols) {
  double mx = x[0];
  for (int c = 1; c < cols; ++c) mx = x[c] > mx ? x[c] : mx;
  double sum = 0.0;
  for (int c = 0; c < cols; ++c) {
    y[c] = std::exp(x[c] - mx);
    sum += y[c];
  }
  const double inv = 1.0 / sum;
  for (int c = 0; c < cols; ++c) y[c] *= inv;
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r)
      softmax_row(x + static_cast<int64_t>(r) * cols,
                  y + static_cast<int64_t>(r) * cols, cols);
  } else {
    for (int r = 0; r < rows; ++r)
      softmax_row(x + static_cast<int64_t>(r) * cols,
                  y + static_cast<int64_t>(r) * cols, cols);
  }
}

static inline void softmax_grad_row(const double* y, const double* gy,
                                    double* gx, int cols) {
  double dot = 0.0;
  for (int c = 0; c < cols; ++c) dot += gy[c] * y[c];
  for (int c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
}

void softmax_grad_rows(const double* y, const double* gy, double* gx, int rows,
                       int cols) {
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r)
      softmax_grad_row(y + static_cast<int64_t>(r) * cols,
                       gy + static_cast<int64_t>(r) * cols,
                       gx + static_cast<int64_t>(r) * cols, cols);
  } else {
    for (int r = 0; r < rows; ++r)
      softmax_grad_row(y + static_cast<int64_t>(r) * cols,
                       gy + static_cast<int64_t>(r) * cols,
                       gx + static_cast<int64_t>(r) * cols, cols);
  }
}

static inline void layer_norm_row(const double* x, const double* gain,
                                  const double* bias, double* y, double* mean,
                                  double* rstd, int cols, double eps) {
  double mu = 0.0;
  for (int c = 0; c < cols; ++c) mu += x[c];
  mu /= cols;
  double var = 0.0;
  for (int c = 0; c < cols; ++c) var += (x[c] - mu) * (x[c] - mu);
  var /= cols;
  const double rs = 1.0 / std::sqrt(var + eps);
  *mean = mu;
  *rstd = rs;
  for (int c = 0; c < cols; ++c) y[c] = (x[c] - mu) * rs * gain[c] + bias[c];
}

void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, double* mean, double* rstd, int rows, int cols,
                     double eps) {
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r)
      layer_norm_row(x + static_cast<int64_t>(r) * cols, gain, bias,
                     y + static_cast<int64_t>(r) * cols, mean + r, rstd + r,
                     cols, eps);
  } else {
    for (int r = 0; r < rows; ++r)
      layer_norm_row(x + static_cast<int64_t>(r) * cols, gain, bias,
                     y + static_cast<int64_t>(r) * cols, mean + r, rstd + r,
                     cols, eps);
  }
}

void layer_norm_grad_rows(const double* x, const double* gain,
                          const double* mean, const double* rstd,
                          const double* gy, double* gx, double* ggain,
                          double* gbias, int rows, int cols) {
  // gx rows are independent; parameter grads need fixed row order, so they
  // are accumulated serially afterwards.
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      const double* xr = x + static_cast<int64_t>(r) * cols;
      const double* gyr = gy + static_cast<int64_t>(r) * cols;
      double* gxr = gx + static_cast<int64_t>(r) * cols;
      const double mu = mean[r], rs = rstd[r];
      double sum_gg = 0.0, sum_ggx = 0.0;
      for (int c = 0; c < cols; ++c) {
        const double xhat = (xr[c] - mu) * rs;
        const double g = gyr[c] * gain[c];
        sum_gg += g;
        sum_ggx += g * xhat;
      }
      for (int c = 0; c < cols; ++c) {
        const double xhat = (xr[c] - mu) * rs;
        const double g = gyr[c] * gain[c];
        gxr[c] += rs * (g - (sum_gg + xhat * sum_ggx) / cols);
      }
    }
  } else {
    for (int r = 0; r < rows; ++r) {
      const double* xr = x + static_cast<int64_t>(r) * cols;
      const double* gyr = gy + static_cast<int64_t>(r) * cols;
      double* gxr = gx + static_cast<int64_t>(r) * cols;
      const double mu = mean[r], rs = rstd[r];
      double sum_gg = 0.0, sum_ggx = 0.0;
      for (int c = 0; c < cols; ++c) {
        const double xhat = (xr[c] - mu) * rs;
        const double g = gyr[c] * gain[c];
        sum_gg += g;
        sum_ggx += g * xhat;
      }
      for (int c = 0; c < cols; ++c) {
        const double xhat = (xr[c] - mu) * rs;
        const double g = gyr[c] * gain[c];
        gxr[c] += rs * (g - (sum_gg + xhat * sum_ggx) / cols);
      }
    }
  }
  for (int c = 0; c < cols; ++c) {
    double gg = 0.0, gb = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double xhat =
          (x[static_cast<int64_t>(r) * cols + c] - mean[r]) * rstd[r];
      gg += gy[static_cast<int64_t>(r) * cols + c] * xhat;
      gb += gy[static_cast<int64_t>(r) * cols + c];
    }
    ggain[c] += gg;
    gbias[c] += gb;
  }
}

void im2col_nhwc(const double* x, int n, int h, int w, int c, int kh, int kw,
                 int stride, int pad, double* cols, int oh, int ow) {
  const int64_t patch = static_cast<int64_t>(kh) * kw * c;
  const int64_t per_img = static_cast<int64_t>(oh) * ow;
  auto fill_row = [&](int img, int oy, int ox) {
    double* dst = cols + ((img * per_img) + oy * ow + ox) * patch;
    const double* src = x + static_cast<int64_t>(img) * h * w * c;
    int64_t q = 0;
    for (int ky = 0; ky < kh; ++ky) {
      const int iy = oy * stride - pad + ky;
      for (int kx = 0; kx < kw; ++kx) {
        const int ix = ox * stride - pad + kx;
        if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
          for (int ch = 0; ch < c; ++ch) dst[q++] = 0.0;
        } else {
          const double* cell = src + (static_cast<int64_t>(iy) * w + ix) * c;
          for (int ch = 0; ch < c; ++ch) dst[q++] = cell[ch];
        }
      }
    }
  };
  const int total = n * oh * ow;
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < total; ++t)
      fill_row(t / (oh * ow), (t / ow) % oh, t % ow);
  } else {
    for (int t = 0; t < total; ++t)
      fill_row(t / (oh * ow), (t / ow) % oh, t % ow);
  }
}

void col2im_nhwc(const double* cols, int n, int h, int w, int c, int kh,
                 int kw, int stride, int pad, double* gx, int oh, int ow) {
  // Scatter with overlapping taps: keep it serial for a fixed accumulation
  // order regardless of thread count.
  const int64_t patch = static_cast<int64_t>(kh) * kw * c;
  const int64_t per_img = static_cast<int64_t>(oh) * ow;
  for (int img = 0; img < n; ++img) {
    double* dst_img = gx + static_cast<int64_t>(img) * h * w * c;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const double* src =
            cols + ((img * per_img) + static_cast<int64_t>(oy) * ow + ox) *
                       patch;
        int64_t q = 0;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
              q += c;
            } else {
              double* cell = dst_img + (static_cast<int64_t>(iy) * w + ix) * c;
              for (int ch = 0; ch < c; ++ch) cell[ch] += src[q++];
            }
          }
        }
      }
  }
}

void adam_step(double* w, const double* g, double* m, double* v, int64_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  if (parallel_enabled()) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace eager::nn::kernels
