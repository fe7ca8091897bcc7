#include "hvslu/ops.hpp"

#include <cmath>
#include <string>

namespace hvslu::ops {

namespace {

using DataPtr = std::shared_ptr<TensorData>;

[[noreturn]] void shape_mismatch(OpKind kind, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + shape_string(a.shape()) +
                   " and " + shape_string(b.shape()));
}

enum class Broadcast { none, b_row, a_row };

bool is_single_row(const Tensor& t) { return t.rows() == 1 && t.rank() <= 2; }

Broadcast classify(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (is_single_row(b) && b.cols() == a.cols()) return Broadcast::b_row;
  if (is_single_row(a) && a.cols() == b.cols()) return Broadcast::a_row;
  shape_mismatch(kind, a, b);
}

Shape matrix_shape(const Tensor& t) {
  if (t.rank() > 2) {
    throw ShapeError("matmul operands must have rank <= 2, got " + shape_string(t.shape()));
  }
  return {t.rows(), t.cols()};
}

Tensor make(Shape shape, Matrix value) { return Tensor(std::move(shape), std::move(value)); }

}  // namespace

void require_finite(const Tensor& t, OpKind kind) {
  if (t.data()->known_finite) return;
  if (!t.value().allFinite()) {
    throw NumericError(std::string(op_name(kind)) + ": non-finite input of shape " +
                       shape_string(t.shape()));
  }
  t.data()->known_finite = true;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_finite(a, OpKind::add);
  require_finite(b, OpKind::add);
  Broadcast mode = classify(OpKind::add, a, b);
  Tensor out;
  switch (mode) {
    case Broadcast::none: out = make(a.shape(), a.value() + b.value()); break;
    case Broadcast::b_row: out = make(a.shape(), a.value().rowwise() + b.value().row(0)); break;
    case Broadcast::a_row: out = make(b.shape(), b.value().rowwise() + a.value().row(0)); break;
  }
  if (tape.wants({&a, &b})) {
    DataPtr ad = a.data(), bd = b.data(), od = out.data();
    tape.record(OpKind::add, {ad, bd}, out, [ad, bd, od, mode] {
      const Matrix& g = od->grad;
      if (ad->requires_grad) {
        if (mode == Broadcast::a_row) ad->accumulate_grad_expr(g.colwise().sum());
        else ad->accumulate_grad_expr(g);
      }
      if (bd->requires_grad) {
        if (mode == Broadcast::b_row) bd->accumulate_grad_expr(g.colwise().sum());
        else bd->accumulate_grad_expr(g);
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_finite(a, OpKind::sub);
  require_finite(b, OpKind::sub);
  Broadcast mode = classify(OpKind::sub, a, b);
  Tensor out;
  switch (mode) {
    case Broadcast::none: out = make(a.shape(), a.value() - b.value()); break;
    case Broadcast::b_row: out = make(a.shape(), a.value().rowwise() - b.value().row(0)); break;
    case Broadcast::a_row:
      out = make(b.shape(), (-b.value()).rowwise() + a.value().row(0));
      break;
  }
  if (tape.wants({&a, &b})) {
    DataPtr ad = a.data(), bd = b.data(), od = out.data();
    tape.record(OpKind::sub, {ad, bd}, out, [ad, bd, od, mode] {
      const Matrix& g = od->grad;
      if (ad->requires_grad) {
        if (mode == Broadcast::a_row) ad->accumulate_grad_expr(g.colwise().sum());
        else ad->accumulate_grad_expr(g);
      }
      if (bd->requires_grad) {
        if (mode == Broadcast::b_row) bd->accumulate_grad_expr(-g.colwise().sum());
        else bd->accumulate_grad_expr(-g);
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_finite(a, OpKind::mul);
  require_finite(b, OpKind::mul);
  Broadcast mode = classify(OpKind::mul, a, b);
  Tensor out;
  switch (mode) {
    case Broadcast::none:
      out = make(a.shape(), a.value().cwiseProduct(b.value()));
      break;
    case Broadcast::b_row:
      out = make(a.shape(), (a.value().array().rowwise() * b.value().row(0).array()).matrix());
      break;
    case Broadcast::a_row:
      out = make(b.shape(), (b.value().array().rowwise() * a.value().row(0).array()).matrix());
      break;
  }
  if (tape.wants({&a, &b})) {
    DataPtr ad = a.data(), bd = b.data(), od = out.data();
    tape.record(OpKind::mul, {ad, bd}, out, [ad, bd, od, mode] {
      const Matrix& g = od->grad;
      switch (mode) {
        case Broadcast::none:
          if (ad->requires_grad) ad->accumulate_grad_expr(g.cwiseProduct(bd->value));
          if (bd->requires_grad) bd->accumulate_grad_expr(g.cwiseProduct(ad->value));
          break;
        case Broadcast::b_row:
          if (ad->requires_grad) {
            ad->accumulate_grad_expr(
                (g.array().rowwise() * bd->value.row(0).array()).matrix());
          }
          if (bd->requires_grad) bd->accumulate_grad_expr(g.cwiseProduct(ad->value).colwise().sum());
          break;
        case Broadcast::a_row:
          if (ad->requires_grad) ad->accumulate_grad_expr(g.cwiseProduct(bd->value).colwise().sum());
          if (bd->requires_grad) {
            bd->accumulate_grad_expr(
                (g.array().rowwise() * ad->value.row(0).array()).matrix());
          }
          break;
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, Scalar factor) {
  require_finite(a, OpKind::scale);
  Tensor out = make(a.shape(), a.value() * factor);
  if (tape.wants({&a})) {
    DataPtr ad = a.data(), od = out.data();
    tape.record(OpKind::scale, {ad}, out,
                [ad, od, factor] { ad->accumulate_grad_expr(od->grad * factor); });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_finite(a, OpKind::matmul);
  require_finite(b, OpKind::matmul);
  Shape sa = matrix_shape(a), sb = matrix_shape(b);
  if (sa[1] != sb[0]) shape_mismatch(OpKind::matmul, a, b);
  Matrix value(sa[0], sb[1]);
  value.noalias() = a.value() * b.value();
  Tensor out = make({sa[0], sb[1]}, std::move(value));
  if (tape.wants({&a, &b})) {
    DataPtr ad = a.data(), bd = b.data(), od = out.data();
    tape.record(OpKind::matmul, {ad, bd}, out, [ad, bd, od] {
      const Matrix& g = od->grad;
      if (ad->requires_grad) {
        if (ad->grad.size() == 0) ad->grad = Matrix::Zero(ad->value.rows(), ad->value.cols());
        ad->grad.noalias() += g * bd->value.transpose();
      }
      if (bd->requires_grad) {
        if (bd->grad.size() == 0) bd->grad = Matrix::Zero(bd->value.rows(), bd->value.cols());
        bd->grad.noalias() += ad->value.transpose() * g;
      }
    });
  }
  return out;
}

Tensor concat_last_axis(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_last_axis: no inputs");
  const Tensor& first = parts.front();
  Index rows = first.rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    require_finite(p, OpKind::concat_last_axis);
    bool leading_ok = p.rank() == first.rank() &&
                      std::equal(p.shape().begin(), p.shape().end() - 1, first.shape().begin());
    if (!leading_ok || p.rows() != rows) shape_mismatch(OpKind::concat_last_axis, first, p);
    cols += p.cols();
  }
  Matrix value(rows, cols);
  std::vector<Index> offsets;
  Index offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    value.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  Shape shape = first.shape();
  shape.back() = cols;
  Tensor out = make(std::move(shape), std::move(value));
  if (tape.wants(parts)) {
    std::vector<DataPtr> inputs;
    for (const Tensor& p : parts) inputs.push_back(p.data());
    DataPtr od = out.data();
    tape.record(OpKind::concat_last_axis, inputs, out, [inputs, offsets, od] {
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i]->requires_grad) continue;
        inputs[i]->accumulate_grad_expr(od->grad.middleCols(offsets[i], inputs[i]->value.cols()));
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::sigmoid);
  Matrix y = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  Tensor out = make(x.shape(), std::move(y));
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::sigmoid, {xd}, out, [xd, od] {
      const auto& y = od->value.array();
      xd->accumulate_grad_expr((od->grad.array() * y * (1.0 - y)).matrix());
    });
  }
  return out;
}

Tensor tanh(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::tanh);
  Tensor out = make(x.shape(), x.value().array().tanh().matrix());
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::tanh, {xd}, out, [xd, od] {
      const auto& y = od->value.array();
      xd->accumulate_grad_expr((od->grad.array() * (1.0 - y * y)).matrix());
    });
  }
  return out;
}

Tensor relu_clipped(Tape& tape, const Tensor& x, Scalar ceiling) {
  require_finite(x, OpKind::relu_clipped);
  Tensor out = make(x.shape(), x.value().array().max(0.0).min(ceiling).matrix());
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::relu_clipped, {xd}, out, [xd, od, ceiling] {
      const auto& v = xd->value.array();
      auto pass = (v > 0.0 && v < ceiling).cast<Scalar>();
      xd->accumulate_grad_expr((od->grad.array() * pass).matrix());
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::softmax_rows);
  Matrix shifted = x.value().colwise() - x.value().rowwise().maxCoeff();
  Matrix e = shifted.array().exp().matrix();
  Vector norm = e.rowwise().sum();
  Matrix y = e.array().colwise() / norm.array();
  Tensor out = make(x.shape(), std::move(y));
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::softmax_rows, {xd}, out, [xd, od] {
      const Matrix& y = od->value;
      Vector dot = od->grad.cwiseProduct(y).rowwise().sum();
      xd->accumulate_grad_expr((y.array() * (od->grad.colwise() - dot).array()).matrix());
    });
  }
  return out;
}

Tensor log_softmax_rows(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::log_softmax_rows);
  Vector max = x.value().rowwise().maxCoeff();
  Matrix shifted = x.value().colwise() - max;
  Vector lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix y = shifted.colwise() - lse;
  Tensor out = make(x.shape(), std::move(y));
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::log_softmax_rows, {xd}, out, [xd, od] {
      Vector gsum = od->grad.rowwise().sum();
      Matrix p = od->value.array().exp().matrix();
      xd->accumulate_grad_expr(od->grad - (p.array().colwise() * gsum.array()).matrix());
    });
  }
  return out;
}

Tensor log(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::log);
  if ((x.value().array() <= 0.0).any()) {
    throw NumericError("log: non-positive input produces a non-finite result");
  }
  Tensor out = make(x.shape(), x.value().array().log().matrix());
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::log, {xd}, out, [xd, od] {
      xd->accumulate_grad_expr((od->grad.array() / xd->value.array()).matrix());
    });
  }
  return out;
}

Tensor slice(Tape& tape, const Tensor& x, Index begin, Index end) {
  require_finite(x, OpKind::slice);
  if (begin < 0 || end > x.cols() || begin >= end) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_string(x.shape()));
  }
  Shape shape = x.shape();
  shape.back() = end - begin;
  Tensor out = make(std::move(shape), x.value().middleCols(begin, end - begin));
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::slice, {xd}, out, [xd, od, begin] {
      if (xd->grad.size() == 0) xd->grad = Matrix::Zero(xd->value.rows(), xd->value.cols());
      xd->grad.middleCols(begin, od->value.cols()) += od->grad;
    });
  }
  return out;
}

Tensor slice_rows(Tape& tape, const Tensor& x, Index begin, Index end) {
  require_finite(x, OpKind::slice_rows);
  if (x.rank() > 2 || begin < 0 || end > x.rows() || begin >= end) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_string(x.shape()));
  }
  Tensor out = make({end - begin, x.cols()}, x.value().middleRows(begin, end - begin));
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::slice_rows, {xd}, out, [xd, od, begin] {
      if (xd->grad.size() == 0) xd->grad = Matrix::Zero(xd->value.rows(), xd->value.cols());
      xd->grad.middleRows(begin, od->value.rows()) += od->grad;
    });
  }
  return out;
}

Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  Index cols = rows.front().cols();
  Matrix value(static_cast<Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require_finite(rows[i], OpKind::stack_rows);
    if (rows[i].rows() != 1 || rows[i].cols() != cols) {
      shape_mismatch(OpKind::stack_rows, rows.front(), rows[i]);
    }
    value.row(static_cast<Index>(i)) = rows[i].value().row(0);
  }
  Tensor out = make({static_cast<Index>(rows.size()), cols}, std::move(value));
  if (tape.wants(rows)) {
    std::vector<DataPtr> inputs;
    for (const Tensor& r : rows) inputs.push_back(r.data());
    DataPtr od = out.data();
    tape.record(OpKind::stack_rows, inputs, out, [inputs, od] {
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i]->requires_grad) {
          inputs[i]->accumulate_grad_expr(od->grad.row(static_cast<Index>(i)));
        }
      }
    });
  }
  return out;
}

Tensor broadcast_rows(Tape& tape, const Tensor& row, Index n) {
  require_finite(row, OpKind::broadcast_rows);
  if (!is_single_row(row) || n < 1) {
    throw ShapeError("broadcast_rows: expected a single row and n >= 1, got " +
                     shape_string(row.shape()));
  }
  Tensor out = make({n, row.cols()}, row.value().replicate(n, 1));
  if (tape.wants({&row})) {
    DataPtr rd = row.data(), od = out.data();
    tape.record(OpKind::broadcast_rows, {rd}, out,
                [rd, od] { rd->accumulate_grad_expr(od->grad.colwise().sum()); });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::transpose);
  if (x.rank() > 2) throw ShapeError("transpose: rank must be <= 2, got " + shape_string(x.shape()));
  Tensor out = make({x.cols(), x.rows()}, x.value().transpose());
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::transpose, {xd}, out,
                [xd, od] { xd->accumulate_grad_expr(od->grad.transpose()); });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2 || ids.empty()) {
    throw ShapeError("gather_rows: need a rank-2 table and at least one id");
  }
  Matrix value(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " out of range for table " +
                       shape_string(table.shape()));
    }
    value.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  Tensor out = make({static_cast<Index>(ids.size()), table.cols()}, std::move(value));
  if (tape.wants({&table})) {
    DataPtr td = table.data(), od = out.data();
    std::vector<int> saved(ids.begin(), ids.end());
    tape.record(OpKind::gather_rows, {td}, out, [td, od, saved] {
      if (td->grad.size() == 0) td->grad = Matrix::Zero(td->value.rows(), td->value.cols());
      for (std::size_t i = 0; i < saved.size(); ++i) {
        td->grad.row(saved[i]) += od->grad.row(static_cast<Index>(i));
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  require_finite(x, OpKind::sum);
  Tensor out = Tensor::scalar(x.value().sum());
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::sum, {xd}, out, [xd, od] {
      xd->accumulate_grad_expr(Matrix::Constant(xd->value.rows(), xd->value.cols(), od->grad(0, 0)));
    });
  }
  return out;
}

Tensor bce_with_logits(Tape& tape, const Tensor& logits, std::span<const Scalar> targets) {
  require_finite(logits, OpKind::bce_logits);
  if (static_cast<Index>(targets.size()) != logits.numel()) {
    throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) +
                     " targets for logits of shape " + shape_string(logits.shape()));
  }
  Eigen::Map<const Matrix> y(targets.data(), logits.rows(), logits.cols());
  const auto& x = logits.value().array();
  Scalar loss = (x.max(0.0) - x * y.array() + (1.0 + (-x.abs()).exp()).log()).sum();
  Tensor out = Tensor::scalar(loss);
  if (tape.wants({&logits})) {
    DataPtr xd = logits.data(), od = out.data();
    Matrix saved_y = y;
    tape.record(OpKind::bce_logits, {xd}, out, [xd, od, saved_y] {
      Matrix p = (1.0 / (1.0 + (-xd->value.array()).exp())).matrix();
      xd->accumulate_grad_expr((p - saved_y) * od->grad(0, 0));
    });
  }
  return out;
}

Tensor nll_rows(Tape& tape, const Tensor& log_probs, std::span<const int> targets) {
  require_finite(log_probs, OpKind::nll_rows);
  if (log_probs.rank() > 2 || static_cast<Index>(targets.size()) != log_probs.rows()) {
    throw ShapeError("nll_rows: " + std::to_string(targets.size()) + " targets for shape " +
                     shape_string(log_probs.shape()));
  }
  Scalar loss = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] < 0 || targets[t] >= log_probs.cols()) {
      throw ShapeError("nll_rows: target id out of range");
    }
    loss -= log_probs.value()(static_cast<Index>(t), targets[t]);
  }
  Tensor out = Tensor::scalar(loss);
  if (tape.wants({&log_probs})) {
    DataPtr xd = log_probs.data(), od = out.data();
    std::vector<int> saved(targets.begin(), targets.end());
    tape.record(OpKind::nll_rows, {xd}, out, [xd, od, saved] {
      if (xd->grad.size() == 0) xd->grad = Matrix::Zero(xd->value.rows(), xd->value.cols());
      for (std::size_t t = 0; t < saved.size(); ++t) {
        xd->grad(static_cast<Index>(t), saved[t]) -= od->grad(0, 0);
      }
    });
  }
  return out;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& g) {
  require_finite(input, OpKind::conv2d);
  require_finite(weight, OpKind::conv2d);
  require_finite(bias, OpKind::conv2d);
  if (input.rank() != 3 || weight.rank() != 4) {
    throw ShapeError("conv2d: expected input [C,F,T] and weight [Co,Ci,kf,kt], got " +
                     shape_string(input.shape()) + " and " + shape_string(weight.shape()));
  }
  const Index c_in = input.dim(0), freq = input.dim(1), time = input.dim(2);
  const Index c_out = weight.dim(0);
  if (weight.dim(1) != c_in || weight.dim(2) != g.kernel_freq || weight.dim(3) != g.kernel_time ||
      bias.numel() != c_out) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) + " / bias " +
                     shape_string(bias.shape()) + " inconsistent with input " +
                     shape_string(input.shape()));
  }
  if (g.stride_freq < 1 || g.stride_time < 1 || g.pad_freq < 0 || g.pad_time < 0) {
    throw ShapeError("conv2d: strides must be positive and padding non-negative");
  }
  if (freq + 2 * g.pad_freq < g.kernel_freq || time + 2 * g.pad_time < g.kernel_time) {
    throw ShapeError("conv2d: kernel (" + std::to_string(g.kernel_freq) + "," +
                     std::to_string(g.kernel_time) + ") larger than padded input " +
                     shape_string(input.shape()));
  }
  const Index out_f = g.out_freq(freq), out_t = g.out_time(time);
  const Index k = c_in * g.kernel_freq * g.kernel_time;
  const Index positions = out_f * out_t;

  // im2col: one column per output position.
  Matrix cols = Matrix::Zero(k, positions);
  const Matrix& x = input.value();  // (C_in * F) x T
  for (Index c = 0; c < c_in; ++c) {
    for (Index i = 0; i < g.kernel_freq; ++i) {
      for (Index j = 0; j < g.kernel_time; ++j) {
        const Index row = (c * g.kernel_freq + i) * g.kernel_time + j;
        for (Index fo = 0; fo < out_f; ++fo) {
          const Index f = fo * g.stride_freq - g.pad_freq + i;
          if (f < 0 || f >= freq) continue;
          for (Index to = 0; to < out_t; ++to) {
            const Index t = to * g.stride_time - g.pad_time + j;
            if (t < 0 || t >= time) continue;
            cols(row, fo * out_t + to) = x(c * freq + f, t);
          }
        }
      }
    }
  }
  Eigen::Map<const Matrix> w(weight.value().data(), c_out, k);
  Eigen::Map<const RowVector> b(bias.value().data(), c_out);
  Matrix y(c_out, positions);
  y.noalias() = w * cols;
  y.colwise() += b.transpose();
  Matrix value = Eigen::Map<Matrix>(y.data(), c_out * out_f, out_t);
  Tensor out = make({c_out, out_f, out_t}, std::move(value));

  if (tape.wants({&input, &weight, &bias})) {
    DataPtr xd = input.data(), wd = weight.data(), bd = bias.data(), od = out.data();
    tape.record(OpKind::conv2d, {xd, wd, bd}, out,
                [xd, wd, bd, od, g, cols = std::move(cols), c_in, freq, time, c_out, out_f, out_t, k,
                 positions] {
      Eigen::Map<const Matrix> gy(od->grad.data(), c_out, positions);
      if (wd->requires_grad) {
        if (wd->grad.size() == 0) wd->grad = Matrix::Zero(wd->value.rows(), wd->value.cols());
        Eigen::Map<Matrix> gw(wd->grad.data(), c_out, k);
        gw.noalias() += gy * cols.transpose();
      }
      if (bd->requires_grad) {
        if (bd->grad.size() == 0) bd->grad = Matrix::Zero(bd->value.rows(), bd->value.cols());
        Eigen::Map<RowVector> gb(bd->grad.data(), c_out);
        gb += gy.rowwise().sum().transpose();
      }
      if (xd->requires_grad) {
        Eigen::Map<const Matrix> w(wd->value.data(), c_out, k);
        Matrix gcols = w.transpose() * gy;
        if (xd->grad.size() == 0) xd->grad = Matrix::Zero(xd->value.rows(), xd->value.cols());
        for (Index c = 0; c < c_in; ++c) {
          for (Index i = 0; i < g.kernel_freq; ++i) {
            for (Index j = 0; j < g.kernel_time; ++j) {
              const Index row = (c * g.kernel_freq + i) * g.kernel_time + j;
              for (Index fo = 0; fo < out_f; ++fo) {
                const Index f = fo * g.stride_freq - g.pad_freq + i;
                if (f < 0 || f >= freq) continue;
                for (Index to = 0; to < out_t; ++to) {
                  const Index t = to * g.stride_time - g.pad_time + j;
                  if (t < 0 || t >= time) continue;
                  xd->grad(c * freq + f, t) += gcols(row, fo * out_t + to);
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Index cols = shape.back();
  Index rows = x.numel() / cols;
  Matrix value = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  Tensor out = make(std::move(shape), std::move(value));
  if (tape.wants({&x})) {
    DataPtr xd = x.data(), od = out.data();
    tape.record(OpKind::reshape, {xd}, out, [xd, od] {
      xd->accumulate_grad_expr(
          Eigen::Map<const Matrix>(od->grad.data(), xd->value.rows(), xd->value.cols()));
    });
  }
  return out;
}

}  // namespace hvslu::ops
