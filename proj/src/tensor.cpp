#include "hvslu/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

namespace hvslu {

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::pair<Index, Index> storage_dims(const Shape& shape) {
  if (shape.empty()) {
    throw ShapeError("tensor shape must have at least one axis");
  }
  for (Index d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }
  Index cols = shape.back();
  Index rows = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
  return {rows, cols};
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::concat_last_axis: return "concat_last_axis";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::relu_clipped: return "relu_clipped";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::log_softmax_rows: return "log_softmax_rows";
    case OpKind::log: return "log";
    case OpKind::slice: return "slice";
    case OpKind::slice_rows: return "slice_rows";
    case OpKind::stack_rows: return "stack_rows";
    case OpKind::broadcast_rows: return "broadcast_rows";
    case OpKind::transpose: return "transpose";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::sum: return "sum";
    case OpKind::conv2d: return "conv2d";
    case OpKind::ctc: return "ctc";
    case OpKind::bce_logits: return "bce_logits";
    case OpKind::nll_rows: return "nll_rows";
    case OpKind::batch_norm: return "batch_norm";
    case OpKind::reshape: return "reshape";
    case OpKind::lstm_sequence: return "lstm_sequence";
  }
  return "unknown";
}

void TensorData::accumulate_grad(const Matrix& g) { accumulate_grad_expr(g); }

Tensor::Tensor(Shape shape, Matrix value, bool requires_grad) {
  auto [rows, cols] = storage_dims(shape);
  if (value.rows() != rows || value.cols() != cols) {
    throw ShapeError("storage " + std::to_string(value.rows()) + "x" +
                     std::to_string(value.cols()) + " does not match shape " +
                     shape_string(shape));
  }
  data_ = std::make_shared<TensorData>();
  data_->shape = std::move(shape);
  data_->value = std::move(value);
  data_->requires_grad = requires_grad;
  data_->id = next_id();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return constant(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::constant(Shape shape, Scalar v, bool requires_grad) {
  auto [rows, cols] = storage_dims(shape);
  return Tensor(std::move(shape), Matrix::Constant(rows, cols, v), requires_grad);
}

Tensor Tensor::from_values(Shape shape, const std::vector<Scalar>& values, bool requires_grad) {
  auto [rows, cols] = storage_dims(shape);
  if (static_cast<Index>(values.size()) != rows * cols) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_string(shape));
  }
  Matrix m = Eigen::Map<const Matrix>(values.data(), rows, cols);
  return Tensor(std::move(shape), std::move(m), requires_grad);
}

Tensor Tensor::from_matrix(Matrix m, bool requires_grad) {
  Shape shape{m.rows(), m.cols()};
  return Tensor(std::move(shape), std::move(m), requires_grad);
}

Tensor Tensor::row(const RowVector& v, bool requires_grad) {
  Matrix m = v;
  return Tensor(Shape{v.size()}, std::move(m), requires_grad);
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  return Tensor(Shape{1}, Matrix::Constant(1, 1, v), requires_grad);
}

Index Tensor::dim(Index axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis out of range for shape " + shape_string(shape()));
  }
  return data_->shape[static_cast<std::size_t>(axis)];
}

Scalar Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape()));
  }
  return data_->value(0, 0);
}

std::vector<Scalar> Tensor::values() const {
  return std::vector<Scalar>(data_->value.data(), data_->value.data() + data_->value.size());
}

void Tensor::zero_grad() {
  data_->grad = Matrix::Zero(data_->value.rows(), data_->value.cols());
}

Tensor Tensor::detached() const { return Tensor(data_->shape, data_->value, false); }

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool Tape::wants(const std::vector<Tensor>& inputs) const {
  if (!recording_) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void Tape::record(OpKind kind, std::vector<std::shared_ptr<TensorData>> inputs,
                  const Tensor& output, std::function<void()> backward) {
  output.data()->requires_grad = true;
  nodes_.push_back(TapeNode{kind, std::move(inputs), output.data(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " +
                     (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  std::size_t end = nodes_.size();
  while (end > 0 && nodes_[end - 1].output.get() != loss.data().get()) --end;
  if (end == 0) {
    throw std::logic_error("backward: loss was not produced through this tape");
  }
  for (std::size_t i = 0; i < end; ++i) nodes_[i].output->grad.resize(0, 0);
  loss.data()->grad = Matrix::Ones(1, 1);
  for (std::size_t i = end; i-- > 0;) {
    if (nodes_[i].output->grad.size() == 0) continue;
    nodes_[i].backward();
  }
}

}  // namespace hvslu
