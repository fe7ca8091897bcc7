#include "hvslu/layers.hpp"

#include <cmath>

namespace hvslu {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const NamedParam& p : params) out.push_back(p.tensor);
  return out;
}

Index count_parameters(const ParamList& params) {
  Index n = 0;
  for (const NamedParam& p : params) n += p.tensor.numel();
  return n;
}

Tensor uniform_init(Shape shape, Index fan_in, Rng& rng) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape), true);
  Matrix& v = t.mutable_value();
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-bound, bound);
  return t;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(Index input_dim, Index output_dim, Rng& rng)
    : weight(uniform_init({input_dim, output_dim}, input_dim, rng)),
      bias(uniform_init({output_dim}, input_dim, rng)) {}

Tensor Dense::forward(Tape& tape, const Tensor& x) const {
  return ops::add(tape, ops::matmul(tape, x, weight), bias);
}

void Dense::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

// ---------------------------------------------------------------- GRU

GruCell::GruCell(Index input_dim, Index hidden_dim, Rng& rng)
    : input_weight(uniform_init({input_dim, 3 * hidden_dim}, input_dim, rng)),
      recurrent_gates(uniform_init({hidden_dim, 2 * hidden_dim}, hidden_dim, rng)),
      recurrent_candidate(uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng)),
      bias(uniform_init({3 * hidden_dim}, hidden_dim, rng)),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {
  ParamList params;
  collect("gru", params);
  if (count_parameters(params) != parameter_count(input_dim, hidden_dim)) {
    throw std::logic_error("GRU parameter count does not match 3H(in+H+1)");
  }
}

GruCell::State GruCell::zero_state() const { return State{Tensor::zeros({1, hidden_dim_})}; }

Tensor GruCell::project_inputs(Tape& tape, const Tensor& xs) const {
  return ops::add(tape, ops::matmul(tape, xs, input_weight), bias);
}

Tensor GruCell::step(Tape& tape, const Tensor& x_t, const Tensor& h_prev) const {
  if (x_t.numel() != input_dim_ || h_prev.numel() != hidden_dim_) {
    throw ShapeError("gru_step: expected x " + std::to_string(input_dim_) + " and h " +
                     std::to_string(hidden_dim_) + ", got " + shape_string(x_t.shape()) + " and " +
                     shape_string(h_prev.shape()));
  }
  return step_projected(tape, project_inputs(tape, x_t), h_prev);
}

Tensor GruCell::step_projected(Tape& tape, const Tensor& projected_t, const Tensor& h_prev) const {
  const Index h = hidden_dim_;
  Tensor recurrent = ops::matmul(tape, h_prev, recurrent_gates);
  Tensor gates = ops::sigmoid(tape, ops::add(tape, ops::slice(tape, projected_t, 0, 2 * h), recurrent));
  Tensor z = ops::slice(tape, gates, 0, h);
  Tensor r = ops::slice(tape, gates, h, 2 * h);
  Tensor reset_h = ops::mul(tape, r, h_prev);
  Tensor candidate = ops::tanh(
      tape, ops::add(tape, ops::slice(tape, projected_t, 2 * h, 3 * h),
                     ops::matmul(tape, reset_h, recurrent_candidate)));
  // (1 - z) * h + z * cand == h + z * (cand - h)
  return ops::add(tape, h_prev, ops::mul(tape, z, ops::sub(tape, candidate, h_prev)));
}

void GruCell::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".input_weight", input_weight});
  out.push_back({prefix + ".recurrent_gates", recurrent_gates});
  out.push_back({prefix + ".recurrent_candidate", recurrent_candidate});
  out.push_back({prefix + ".bias", bias});
}

// ---------------------------------------------------------------- LSTM

LstmCell::LstmCell(Index input_dim, Index hidden_dim, Rng& rng, Scalar forget_bias)
    : input_weight(uniform_init({input_dim, 4 * hidden_dim}, input_dim, rng)),
      recurrent_weight(uniform_init({hidden_dim, 4 * hidden_dim}, hidden_dim, rng)),
      bias(uniform_init({4 * hidden_dim}, hidden_dim, rng)),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {
  bias.mutable_value().middleCols(hidden_dim, hidden_dim).setConstant(forget_bias);
  ParamList params;
  collect("lstm", params);
  if (count_parameters(params) != parameter_count(input_dim, hidden_dim)) {
    throw std::logic_error("LSTM parameter count does not match 4H(in+H+1)");
  }
}

LstmCell::State LstmCell::zero_state() const {
  return State{Tensor::zeros({1, hidden_dim_}), Tensor::zeros({1, hidden_dim_})};
}

Tensor LstmCell::project_inputs(Tape& tape, const Tensor& xs) const {
  return ops::add(tape, ops::matmul(tape, xs, input_weight), bias);
}

LstmCell::State LstmCell::step(Tape& tape, const Tensor& x_t, const State& prev) const {
  if (x_t.numel() != input_dim_ || prev.h.numel() != hidden_dim_ || prev.c.numel() != hidden_dim_) {
    throw ShapeError("lstm_step: expected x " + std::to_string(input_dim_) + " and h/c " +
                     std::to_string(hidden_dim_) + ", got " + shape_string(x_t.shape()) + ", " +
                     shape_string(prev.h.shape()) + ", " + shape_string(prev.c.shape()));
  }
  return step_projected(tape, project_inputs(tape, x_t), prev);
}

LstmCell::State LstmCell::step_projected(Tape& tape, const Tensor& projected_t,
                                         const State& prev) const {
  const Index h = hidden_dim_;
  Tensor pre = ops::add(tape, projected_t, ops::matmul(tape, prev.h, recurrent_weight));
  Tensor gates = ops::sigmoid(tape, ops::slice(tape, pre, 0, 3 * h));
  Tensor candidate = ops::tanh(tape, ops::slice(tape, pre, 3 * h, 4 * h));
  Tensor in_gate = ops::slice(tape, gates, 0, h);
  Tensor forget_gate = ops::slice(tape, gates, h, 2 * h);
  Tensor out_gate = ops::slice(tape, gates, 2 * h, 3 * h);
  Tensor c = ops::add(tape, ops::mul(tape, forget_gate, prev.c), ops::mul(tape, in_gate, candidate));
  Tensor hidden = ops::mul(tape, out_gate, ops::tanh(tape, c));
  return State{hidden, c};
}

void LstmCell::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".input_weight", input_weight});
  out.push_back({prefix + ".recurrent_weight", recurrent_weight});
  out.push_back({prefix + ".bias", bias});
}

using DataPtr = std::shared_ptr<TensorData>;

Tensor lstm_sequence(Tape& tape, const LstmCell& cell, const Tensor& projected, bool reverse) {
  const Index h = cell.hidden_dim();
  if (projected.rank() != 2 || projected.rows() < 1 || projected.cols() != 4 * h) {
    throw ShapeError("lstm_sequence: expected projections [T, " + std::to_string(4 * h) + "], got " +
                     (projected.defined() ? shape_string(projected.shape()) : std::string("undefined")));
  }
  ops::require_finite(projected, OpKind::lstm_sequence);
  ops::require_finite(cell.recurrent_weight, OpKind::lstm_sequence);
  const Index steps = projected.rows();
  const Matrix& u = cell.recurrent_weight.value();
  auto gates = std::make_shared<Matrix>(steps, 4 * h);  // i | f | o | g after activation
  auto cells = std::make_shared<Matrix>(steps, h);
  Matrix hidden(steps, h);
  RowVector h_prev = RowVector::Zero(h), c_prev = RowVector::Zero(h);
  for (Index k = 0; k < steps; ++k) {
    const Index t = reverse ? steps - 1 - k : k;
    RowVector pre = projected.value().row(t) + h_prev * u;
    auto a = gates->row(t);
    a.head(3 * h) = (1.0 / (1.0 + (-pre.head(3 * h).array()).exp())).matrix();
    a.tail(h) = pre.tail(h).array().tanh().matrix();
    c_prev = (a.segment(h, h).array() * c_prev.array() + a.head(h).array() * a.tail(h).array()).matrix();
    h_prev = (a.segment(2 * h, h).array() * c_prev.array().tanh()).matrix();
    cells->row(t) = c_prev;
    hidden.row(t) = h_prev;
  }
  Tensor out({steps, h}, std::move(hidden));
  if (tape.wants({&projected, &cell.recurrent_weight})) {
    DataPtr pd = projected.data(), ud = cell.recurrent_weight.data(), od = out.data();
    tape.record(OpKind::lstm_sequence, {pd, ud}, out, [pd, ud, od, gates, cells, h, steps, reverse] {
      const Matrix& u = ud->value;
      const Matrix& hs = od->value;
      Matrix d_proj(steps, 4 * h);
      Matrix d_u = Matrix::Zero(h, 4 * h);
      RowVector dh_next = RowVector::Zero(h), dc_next = RowVector::Zero(h);
      for (Index k = steps; k-- > 0;) {
        const Index t = reverse ? steps - 1 - k : k;
        const bool first = k == 0;
        const Index prev_t = reverse ? t + 1 : t - 1;
        const auto a = gates->row(t);
        const auto i = a.head(h).array(), f = a.segment(h, h).array(), o = a.segment(2 * h, h).array(),
                   g = a.tail(h).array();
        const Eigen::Array<Scalar, 1, Eigen::Dynamic> tc = cells->row(t).array().tanh();
        const RowVector c_prev = first ? RowVector::Zero(h) : RowVector(cells->row(prev_t));
        const RowVector dh = od->grad.row(t) + dh_next;
        const Eigen::Array<Scalar, 1, Eigen::Dynamic> dc =
            dc_next.array() + dh.array() * o * (1.0 - tc.square());
        auto dp = d_proj.row(t);
        dp.head(h) = (dc * g * i * (1.0 - i)).matrix();
        dp.segment(h, h) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
        dp.segment(2 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();
        dp.tail(h) = (dc * i * (1.0 - g.square())).matrix();
        dc_next = (dc * f).matrix();
        if (!first) d_u.noalias() += hs.row(prev_t).transpose() * dp;
        dh_next.noalias() = dp * u.transpose();
      }
      if (pd->requires_grad) pd->accumulate_grad(d_proj);
      if (ud->requires_grad) ud->accumulate_grad(d_u);
    });
  }
  return out;
}

// ---------------------------------------------------------------- batch norm

SeqBatchNorm::SeqBatchNorm(Index feature_dim, Scalar momentum, Scalar epsilon)
    : gamma(Tensor::constant({feature_dim}, 1.0, true)),
      beta(Tensor::zeros({feature_dim}, true)),
      running_mean(Tensor::zeros({feature_dim})),
      running_var(Tensor::constant({feature_dim}, 1.0)),
      feature_dim_(feature_dim),
      momentum_(momentum),
      epsilon_(epsilon) {}

Tensor SeqBatchNorm::forward(Tape& tape, const Tensor& xs, NormMode mode) {
  ops::require_finite(xs, OpKind::batch_norm);
  if (xs.cols() != feature_dim_) {
    throw ShapeError("seq_batchnorm: feature dim " + std::to_string(xs.cols()) + " != " +
                     std::to_string(feature_dim_));
  }
  const Index positions = xs.rows();
  RowVector mean, var;
  if (mode == NormMode::train) {
    if (positions < 2) {
      throw ShapeError("seq_batchnorm: training needs at least 2 positions, got " +
                       std::to_string(positions));
    }
    mean = xs.value().colwise().mean();
    var = (xs.value().rowwise() - mean).array().square().colwise().mean().matrix();
    running_mean.mutable_value().row(0) = momentum_ * running_mean.value().row(0) + (1.0 - momentum_) * mean;
    running_var.mutable_value().row(0) = momentum_ * running_var.value().row(0) + (1.0 - momentum_) * var;
  } else {
    mean = running_mean.value().row(0);
    var = running_var.value().row(0);
  }
  RowVector inv_std = (var.array() + epsilon_).rsqrt().matrix();
  Matrix normalized = ((xs.value().rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
  Matrix y = ((normalized.array().rowwise() * gamma.value().row(0).array()).rowwise() +
              beta.value().row(0).array())
                 .matrix();
  Tensor out(xs.shape(), std::move(y));
  if (tape.wants({&xs, &gamma, &beta})) {
    auto xd = xs.data(), gd = gamma.data(), bd = beta.data(), od = out.data();
    const bool batch_stats = mode == NormMode::train;
    tape.record(OpKind::batch_norm, {xd, gd, bd}, out,
                [xd, gd, bd, od, normalized = std::move(normalized), inv_std, batch_stats] {
                  const Matrix& g = od->grad;
                  if (gd->requires_grad) gd->accumulate_grad_expr(g.cwiseProduct(normalized).colwise().sum());
                  if (bd->requires_grad) bd->accumulate_grad_expr(g.colwise().sum());
                  if (!xd->requires_grad) return;
                  Matrix gx_hat = (g.array().rowwise() * gd->value.row(0).array()).matrix();
                  if (!batch_stats) {
                    xd->accumulate_grad_expr((gx_hat.array().rowwise() * inv_std.array()).matrix());
                    return;
                  }
                  const Scalar n = static_cast<Scalar>(g.rows());
                  RowVector sum_g = gx_hat.colwise().sum();
                  RowVector sum_gx = gx_hat.cwiseProduct(normalized).colwise().sum();
                  Matrix gx = (n * gx_hat).rowwise() - sum_g;
                  gx -= (normalized.array().rowwise() * sum_gx.array()).matrix();
                  xd->accumulate_grad_expr(
                      (gx.array().rowwise() * (inv_std.array() / n)).matrix());
                });
  }
  return out;
}

void SeqBatchNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

void SeqBatchNorm::collect_buffers(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".running_mean", running_mean});
  out.push_back({prefix + ".running_var", running_var});
}

}  // namespace hvslu
