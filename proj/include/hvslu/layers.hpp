#pragma once

#include "hvslu/ops.hpp"
#include "hvslu/rng.hpp"
#include "hvslu/tensor.hpp"

#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace hvslu {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

std::vector<Tensor> tensors_of(const ParamList& params);
Index count_parameters(const ParamList& params);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(Shape shape, Index fan_in, Rng& rng);

class Dense {
 public:
  Dense() = default;
  Dense(Index input_dim, Index output_dim, Rng& rng);

  // x [n, in] -> [n, out]
  Tensor forward(Tape& tape, const Tensor& x) const;

  Index input_dim() const { return weight.dim(0); }
  Index output_dim() const { return weight.dim(1); }
  static Index parameter_count(Index in, Index out) { return in * out + out; }
  void collect(const std::string& prefix, ParamList& out) const;

  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

// Row-vector convention: x_t is [1, in] and weights are [in, k*H] so that
// gate pre-activations are x_t W + h U + b. Gate blocks are laid out
// side by side along the last axis.
class GruCell {
 public:
  GruCell() = default;
  GruCell(Index input_dim, Index hidden_dim, Rng& rng);

  Index input_dim() const { return input_dim_; }
  Index hidden_dim() const { return hidden_dim_; }
  static Index parameter_count(Index in, Index h) { return 3 * h * (in + h + 1); }

  // z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
  // cand = tanh(x Wh + (r*h) Uh + bh), h' = (1 - z) * h + z * cand.
  Tensor step(Tape& tape, const Tensor& x_t, const Tensor& h_prev) const;
  // xs [T, in] -> x W + b for every frame, [T, 3H].
  Tensor project_inputs(Tape& tape, const Tensor& xs) const;
  Tensor step_projected(Tape& tape, const Tensor& projected_t, const Tensor& h_prev) const;

  struct State {
    Tensor h;
  };
  State zero_state() const;
  Tensor output(const State& s) const { return s.h; }
  State advance(Tape& tape, const Tensor& projected_t, const State& s) const {
    return State{step_projected(tape, projected_t, s.h)};
  }

  void collect(const std::string& prefix, ParamList& out) const;

  Tensor input_weight;         // [in, 3H]  z | r | candidate
  Tensor recurrent_gates;      // [H, 2H]   z | r
  Tensor recurrent_candidate;  // [H, H]
  Tensor bias;                 // [3H]

 private:
  Index input_dim_ = 0;
  Index hidden_dim_ = 0;
};

class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(Index input_dim, Index hidden_dim, Rng& rng, Scalar forget_bias = 1.0);

  Index input_dim() const { return input_dim_; }
  Index hidden_dim() const { return hidden_dim_; }
  static Index parameter_count(Index in, Index h) { return 4 * h * (in + h + 1); }

  struct State {
    Tensor h;
    Tensor c;
  };

  // Gates i, f, o use sigmoid, the candidate g uses tanh:
  // c' = f * c + i * g, h' = o * tanh(c').
  State step(Tape& tape, const Tensor& x_t, const State& prev) const;
  Tensor project_inputs(Tape& tape, const Tensor& xs) const;
  State step_projected(Tape& tape, const Tensor& projected_t, const State& prev) const;

  State zero_state() const;
  Tensor output(const State& s) const { return s.h; }
  State advance(Tape& tape, const Tensor& projected_t, const State& s) const {
    return step_projected(tape, projected_t, s);
  }

  void collect(const std::string& prefix, ParamList& out) const;

  Tensor input_weight;      // [in, 4H]  i | f | o | g
  Tensor recurrent_weight;  // [H, 4H]
  Tensor bias;              // [4H]

 private:
  Index input_dim_ = 0;
  Index hidden_dim_ = 0;
};

// Whole-sequence LSTM over projections [T, 4H] from the zero state as a
// single tape node; same result as stepping the cell, outputs [T, H].
Tensor lstm_sequence(Tape& tape, const LstmCell& cell, const Tensor& projected, bool reverse = false);

// Runs a cell over precomputed input projections [T, kH] (x W + b per
// frame) from the zero state; returns the outputs [T, H] in time order and
// the final state.
template <typename Cell>
std::pair<Tensor, typename Cell::State> run_projected(Tape& tape, const Cell& cell, const Tensor& projected,
                                                      bool reverse = false) {
  const Index steps = projected.rows();
  std::vector<Tensor> outputs(static_cast<std::size_t>(steps));
  typename Cell::State state = cell.zero_state();
  for (Index k = 0; k < steps; ++k) {
    const Index t = reverse ? steps - 1 - k : k;
    Tensor p_t = ops::slice_rows(tape, projected, t, t + 1);
    state = cell.advance(tape, p_t, state);
    outputs[static_cast<std::size_t>(t)] = cell.output(state);
  }
  return {ops::stack_rows(tape, outputs), state};
}

// Runs a cell over xs [T, in] left to right (or right to left) from the
// zero state.
template <typename Cell>
std::pair<Tensor, typename Cell::State> run_forward(Tape& tape, const Cell& cell, const Tensor& xs,
                                                    bool reverse = false) {
  if (xs.rank() != 2 || xs.rows() < 1) {
    throw ShapeError("recurrent input must be [time, feat] with time >= 1, got " +
                     (xs.defined() ? shape_string(xs.shape()) : std::string("undefined")));
  }
  if (xs.cols() != cell.input_dim()) {
    throw ShapeError("recurrent input width " + std::to_string(xs.cols()) +
                     " does not match cell input " + std::to_string(cell.input_dim()));
  }
  return run_projected(tape, cell, cell.project_inputs(tape, xs), reverse);
}

template <typename Cell>
class BiRecurrentLayer {
 public:
  BiRecurrentLayer() = default;
  BiRecurrentLayer(Cell forward, Cell backward)
      : forward_cell(std::move(forward)), backward_cell(std::move(backward)) {
    if (forward_cell.input_dim() != backward_cell.input_dim() ||
        forward_cell.hidden_dim() != backward_cell.hidden_dim()) {
      throw ShapeError("bidirectional layer requires cells of identical dimensions");
    }
  }

  Index input_dim() const { return forward_cell.input_dim(); }
  Index hidden_dim() const { return forward_cell.hidden_dim(); }
  Index output_dim() const { return 2 * hidden_dim(); }

  // xs [T, in] -> [T, 2H], each frame [forward_t ; backward_t].
  Tensor run(Tape& tape, const Tensor& xs) const {
    if constexpr (std::is_same_v<Cell, LstmCell>) {
      check_sequence(xs);
      Tensor fwd = lstm_sequence(tape, forward_cell, forward_cell.project_inputs(tape, xs), false);
      Tensor bwd = lstm_sequence(tape, backward_cell, backward_cell.project_inputs(tape, xs), true);
      return ops::concat_last_axis(tape, {fwd, bwd});
    } else {
      auto fwd = run_forward(tape, forward_cell, xs, false);
      auto bwd = run_forward(tape, backward_cell, xs, true);
      return ops::concat_last_axis(tape, {fwd.first, bwd.first});
    }
  }

  // Final forward state and final backward state (the one at t = 0).
  std::pair<Tensor, Tensor> run_summary(Tape& tape, const Tensor& xs) const {
    auto fwd = run_forward(tape, forward_cell, xs, false);
    auto bwd = run_forward(tape, backward_cell, xs, true);
    return {forward_cell.output(fwd.second), backward_cell.output(bwd.second)};
  }

  void collect(const std::string& prefix, ParamList& out) const {
    forward_cell.collect(prefix + ".fwd", out);
    backward_cell.collect(prefix + ".bwd", out);
  }

  Cell forward_cell;
  Cell backward_cell;

 private:
  void check_sequence(const Tensor& xs) const {
    if (xs.rank() != 2 || xs.rows() < 1) {
      throw ShapeError("recurrent input must be [time, feat] with time >= 1, got " +
                       (xs.defined() ? shape_string(xs.shape()) : std::string("undefined")));
    }
    if (xs.cols() != input_dim()) {
      throw ShapeError("recurrent input width " + std::to_string(xs.cols()) + " does not match cell input " +
                       std::to_string(input_dim()));
    }
  }
};

template <typename Cell>
Tensor run_bidirectional(Tape& tape, const BiRecurrentLayer<Cell>& layer, const Tensor& xs) {
  return layer.run(tape, xs);
}

enum class NormMode { train, infer };

// Sequence-wise batch normalization: statistics are taken per feature over
// every (time, batch) position. Input is [T, B, F] or [T, F].
class SeqBatchNorm {
 public:
  SeqBatchNorm() = default;
  explicit SeqBatchNorm(Index feature_dim, Scalar momentum = 0.9, Scalar epsilon = 1e-10);

  Tensor forward(Tape& tape, const Tensor& xs, NormMode mode);

  Index feature_dim() const { return feature_dim_; }
  Scalar momentum() const { return momentum_; }
  Scalar epsilon() const { return epsilon_; }
  void collect(const std::string& prefix, ParamList& out) const;
  // Running statistics; stored in checkpoints but never optimized.
  void collect_buffers(const std::string& prefix, ParamList& out) const;

  Tensor gamma;         // [F]
  Tensor beta;          // [F]
  Tensor running_mean;  // [F], not trained
  Tensor running_var;   // [F], not trained

 private:
  Index feature_dim_ = 0;
  Scalar momentum_ = 0.9;
  Scalar epsilon_ = 1e-10;
};

}  // namespace hvslu
