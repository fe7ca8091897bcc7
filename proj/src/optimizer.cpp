#include "hvslu/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace hvslu {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + text + "' (expected sgd or adam)");
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
  if (config_.kind == OptimizerKind::adam) {
    for (const Tensor& p : params_) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
}

Scalar global_grad_norm(const std::vector<Tensor>& params) {
  Scalar sq = 0.0;
  for (const Tensor& p : params) {
    if (p.has_grad()) sq += p.grad().squaredNorm();
  }
  return std::sqrt(sq);
}

void Optimizer::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Optimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& p = params_[i];
    if (!p.has_grad()) {
      throw std::logic_error("optimizer step: parameter " + std::to_string(i) + " of shape " +
                             shape_string(p.shape()) + " has no gradient");
    }
    if (!p.grad().allFinite()) {
      throw NumericError("optimizer step: non-finite gradient for parameter " + std::to_string(i));
    }
  }
  Scalar factor = 1.0;
  if (config_.clip_norm > 0.0) {
    Scalar norm = global_grad_norm(params_);
    if (norm > config_.clip_norm) factor = config_.clip_norm / norm;
  }
  ++step_count_;
  const Scalar lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (Tensor& p : params_) p.mutable_value() -= (lr * factor) * p.grad();
  } else {
    const Scalar t = static_cast<Scalar>(step_count_);
    const Scalar c1 = 1.0 - std::pow(config_.beta1, t);
    const Scalar c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      Matrix g = p.grad() * factor;
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
      p.mutable_value().array() -=
          lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
    }
  }
  zero_grad();
}

}  // namespace hvslu
