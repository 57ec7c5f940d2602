#include "lt/optimizer.hpp"

#include <cmath>

namespace lt {

double clip_grad_norm(ParamStore& params, double max_norm) {
  double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    double scale = max_norm / norm;
    for (Param& p : params.all()) {
      for (double& g : p.grad.values()) g *= scale;
    }
  }
  return norm;
}

void Adam::step(ParamStore& params) {
  if (m_.empty()) {
    for (const Param& p : params.all()) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  }

  clip_grad_norm(params, config_.clip_norm);

  ++steps_;
  double lr = config_.lr;
  if (config_.warmup_steps > 0 && steps_ < config_.warmup_steps) {
    lr *= static_cast<double>(steps_) / static_cast<double>(config_.warmup_steps);
  }
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));

  for (std::size_t i = 0; i < params.all().size(); ++i) {
    Param& p = params.all()[i];
    double* m = m_[i].data();
    double* v = v_[i].data();
    const double* g = p.grad.data();
    double* w = p.value.data();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      double m_hat = m[j] / bc1;
      double v_hat = v[j] / bc2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace lt
