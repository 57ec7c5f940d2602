#ifndef LT_OPTIMIZER_HPP
#define LT_OPTIMIZER_HPP

#include "lt/params.hpp"

namespace lt {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip; 0 disables
  std::size_t warmup_steps = 0;  // linear ramp to lr; 0 = constant
};

// Standard Adam with bias correction. Moment buffers are keyed by the
// parameter registration order and sized lazily on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Clips gradients to config.clip_norm, then applies one update.
  void step(ParamStore& params);

  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

  // Checkpoint access to the optimizer state.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(std::size_t s) { steps_ = s; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t steps_ = 0;
};

// Scales all gradient buffers so the global norm is at most max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace lt

#endif  // LT_OPTIMIZER_HPP
