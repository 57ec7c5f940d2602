#ifndef LT_PARAMS_HPP
#define LT_PARAMS_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "lt/rng.hpp"
#include "lt/tensor.hpp"

namespace lt {

// Named parameter tensor with a same-shape gradient buffer.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Insertion-ordered parameter set; iteration order is the registration
// order, which keeps optimizer and serialization traversals deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, std::vector<std::size_t> shape);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.contains(name); }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }
  std::size_t count() const { return params_.size(); }

  void zero_grad();
  double grad_norm() const;  // global L2 norm across every buffer

  // Uniform init in [-limit, limit]; limit = 1/sqrt(fan_in).
  void init_uniform(Param& p, std::size_t fan_in, Rng& rng);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lt

#endif  // LT_PARAMS_HPP
