#include "eager/nn/optim.hpp"

#include <cmath>

#include "eager/nn/kernels.hpp"
#include "eager/util/errors.hpp"

namespace eager::nn {

Parameter& ParamSet::add(const std::string& name, Tensor init) {
  if (find(name)) throw UsageError("duplicate parameter: " + name);
  items_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  return *items_.back();
}

Parameter* ParamSet::find(const std::string& name) {
  for (auto& p : items_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamSet::zero_grad() {
  for (auto& p : items_) p->g.fill(0.0);
}

int64_t ParamSet::count() const {
  int64_t n = 0;
  for (auto& p : items_) n += p->v.numel();
  return n;
}

double ParamSet::grad_norm() const {
  double s = 0.0;
  for (auto& p : items_)
    for (double g : p->g.d) s += g * g;
  return std::sqrt(s);
}

void ParamSet::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (auto& p : items_)
    for (double& g : p->g.d) g *= scale;
}

void ParamSet::copy_values_from(const ParamSet& other) {
  for (auto& p : other.all()) {
    Parameter* mine = find(p->name);
    if (!mine || !mine->v.same_shape(p->v))
      throw DataError("parameter mismatch: " + p->name);
    mine->v = p->v;
  }
}

void Adam::step(ParamSet& ps) {
  ++t;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (auto& p : ps.all()) {
    if (p->m.d.empty()) {
      p->m = Tensor(p->v.shape);
      p->vv = Tensor(p->v.shape);
    }
    kernels::adam_step(p->v.data(), p->g.data(), p->m.data(), p->vv.data(),
                       p->v.numel(), lr, beta1, beta2, eps, bias1, bias2);
  }
}

}  // namespace eager::nn
