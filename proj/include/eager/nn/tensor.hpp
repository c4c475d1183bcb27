#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "eager/util/errors.hpp"
#include "eager/util/rng.hpp"

namespace eager::nn {

// Dense row-major tensor of doubles. Shapes are small (rank <= 4); all
// heavy math goes through the kernels layer.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> d;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    d.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> data)
      : shape(std::move(s)), d(std::move(data)) {
    if (static_cast<int64_t>(d.size()) != numel_of(shape))
      throw UsageError("tensor data/shape mismatch");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int v : s) n *= v;
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(d.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  double* data() { return d.data(); }
  const double* data() const { return d.data(); }

  double& at(int64_t i) { return d[i]; }
  double at(int64_t i) const { return d[i]; }
  double& at2(int r, int c) { return d[static_cast<int64_t>(r) * cols() + c]; }
  double at2(int r, int c) const {
    return d[static_cast<int64_t>(r) * cols() + c];
  }

  void fill(double v) { std::fill(d.begin(), d.end(), v); }

  void init_uniform(Rng& rng, double lo, double hi) {
    for (auto& v : d) v = lo + (hi - lo) * rng.real01();
  }
  void init_normal(Rng& rng, double stddev) {
    for (auto& v : d) v = stddev * rng.normal();
  }
  // Glorot/Xavier range from explicit fan sizes.
  void init_xavier(Rng& rng, int fan_in, int fan_out) {
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    init_uniform(rng, -a, a);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace eager::nn
