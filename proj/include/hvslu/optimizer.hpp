#pragma once

#include "hvslu/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hvslu {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
  // Global-norm clipping threshold; <= 0 disables clipping.
  Scalar clip_norm = 5.0;
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Tensor> params);

  // Applies one update from the accumulated gradients, then zeroes them.
  // Throws if a parameter has no gradient or a non-finite one.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_count_ = 0;
};

// L2 norm of all gradients taken together.
Scalar global_grad_norm(const std::vector<Tensor>& params);

}  // namespace hvslu
