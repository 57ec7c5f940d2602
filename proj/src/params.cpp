#include "lt/params.hpp"

#include <cmath>

#include "lt/error.hpp"

namespace lt {

Param& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (index_.contains(name)) throw Error("duplicate parameter: " + name);
  index_[name] = params_.size();
  Param& p = params_.emplace_back();
  p.name = name;
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  return p;
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return params_[it->second];
}

void ParamStore::zero_grad() {
  for (Param& p : params_) {
    std::fill(p.grad.values().begin(), p.grad.values().end(), 0.0);
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const Param& p : params_) {
    for (double g : p.grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

void ParamStore::init_uniform(Param& p, std::size_t fan_in, Rng& rng) {
  double limit = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& v : p.value.values()) v = rng.uniform(-limit, limit);
}

}  // namespace lt
