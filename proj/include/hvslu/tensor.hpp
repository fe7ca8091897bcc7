#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvslu {

using Scalar = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string shape_string(const Shape& shape);
Index shape_numel(const Shape& shape);

// Storage is a row-major matrix: the last axis maps to columns and all
// leading axes are flattened into rows. A rank-1 tensor [n] is one row.
struct TensorData {
  Shape shape;
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  bool known_finite = false;  // cleared on mutable access
  std::uint64_t id = 0;

  void accumulate_grad(const Matrix& g);
  template <typename Expr>
  void accumulate_grad_expr(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Matrix value, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, Scalar v, bool requires_grad = false);
  static Tensor from_values(Shape shape, const std::vector<Scalar>& values,
                            bool requires_grad = false);
  static Tensor from_matrix(Matrix m, bool requires_grad = false);
  static Tensor row(const RowVector& v, bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  Index rank() const { return static_cast<Index>(data_->shape.size()); }
  Index dim(Index axis) const;
  Index numel() const { return data_->value.size(); }
  Index rows() const { return data_->value.rows(); }
  Index cols() const { return data_->value.cols(); }

  const Matrix& value() const { return data_->value; }
  Matrix& mutable_value() {
    data_->known_finite = false;
    return data_->value;
  }
  Scalar item() const;
  std::vector<Scalar> values() const;

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }
  bool has_grad() const { return data_->grad.size() != 0; }
  const Matrix& grad() const { return data_->grad; }
  Matrix& mutable_grad() { return data_->grad; }
  void zero_grad();
  void clear_grad() { data_->grad.resize(0, 0); }

  // Constant copy: same values, no gradient history.
  Tensor detached() const;

  std::uint64_t id() const { return data_->id; }
  const std::shared_ptr<TensorData>& data() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

enum class OpKind {
  add,
  sub,
  mul,
  scale,
  matmul,
  concat_last_axis,
  sigmoid,
  tanh,
  relu_clipped,
  softmax_rows,
  log_softmax_rows,
  log,
  slice,
  slice_rows,
  stack_rows,
  broadcast_rows,
  transpose,
  gather_rows,
  sum,
  conv2d,
  ctc,
  bce_logits,
  nll_rows,
  batch_norm,
  reshape,
  lstm_sequence,
};

const char* op_name(OpKind kind);

struct TapeNode {
  OpKind kind;
  std::vector<std::shared_ptr<TensorData>> inputs;
  std::shared_ptr<TensorData> output;
  std::function<void()> backward;
};

// Records differentiable operations in execution order. Nodes are only
// recorded when at least one input requires a gradient and recording is on.
class Tape {
 public:
  Tape() { nodes_.reserve(4096); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // Returns true when `inputs` make the result differentiable.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  bool wants(const std::vector<Tensor>& inputs) const;

  void record(OpKind kind, std::vector<std::shared_ptr<TensorData>> inputs,
              const Tensor& output, std::function<void()> backward);

  // Reverse-mode sweep from a scalar loss. Gradients of intermediate
  // results are reset first; leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TapeNode> nodes_;
  bool recording_ = true;
};

inline void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

// Temporarily disables recording on a tape.
class NoGradScope {
 public:
  explicit NoGradScope(Tape& tape) : tape_(tape), previous_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoGradScope() { tape_.set_recording(previous_); }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

}  // namespace hvslu
