#pragma once

#include <memory>
#include <string>
#include <vector>

#include "eager/nn/tensor.hpp"

namespace eager::nn {

struct Parameter {
  std::string name;
  Tensor v;
  Tensor g;
  Tensor m, vv;  // Adam first/second moments, sized on first step

  explicit Parameter(std::string n, Tensor init)
      : name(std::move(n)), v(std::move(init)), g(v.shape) {}
};

class ParamSet {
 public:
  Parameter& add(const std::string& name, Tensor init);
  Parameter* find(const std::string& name);
  const std::vector<std::unique_ptr<Parameter>>& all() const { return items_; }
  void zero_grad();
  int64_t count() const;
  double grad_norm() const;
  void clip_grad_norm(double max_norm);
  // Copy values (not optimiser state) from another set with matching names.
  void copy_values_from(const ParamSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;

  void step(ParamSet& ps);
};

}  // namespace eager::nn
