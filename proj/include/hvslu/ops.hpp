#pragma once

#include "hvslu/tensor.hpp"

#include <span>
#include <vector>

namespace hvslu::ops {

// Elementwise binary ops. `b` may also be a single row broadcast over the
// leading axes of `a` (bias style), and vice versa.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, Scalar factor);

// Rank <= 2 operands; a rank-1 tensor acts as a single row.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor concat_last_axis(Tape& tape, const std::vector<Tensor>& parts);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu_clipped(Tape& tape, const Tensor& x, Scalar ceiling = 20.0);
Tensor softmax_rows(Tape& tape, const Tensor& x);
Tensor log_softmax_rows(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);

// Columns [begin, end) of the last axis.
Tensor slice(Tape& tape, const Tensor& x, Index begin, Index end);
// Rows [begin, end) of a rank-2 tensor; result is [end-begin, cols].
Tensor slice_rows(Tape& tape, const Tensor& x, Index begin, Index end);
// Stacks single-row tensors into [n, cols].
Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows);
// Repeats a single row n times: [d] -> [n, d].
Tensor broadcast_rows(Tape& tape, const Tensor& row, Index n);
Tensor transpose(Tape& tape, const Tensor& x);
// Embedding lookup: table [V, d], result [ids.size(), d].
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const int> ids);
Tensor sum(Tape& tape, const Tensor& x);

// Sum over elements of the numerically stable binary cross-entropy between
// sigmoid(logits) and 0/1 targets.
Tensor bce_with_logits(Tape& tape, const Tensor& logits, std::span<const Scalar> targets);
// -sum_t log_probs[t, target[t]].
Tensor nll_rows(Tape& tape, const Tensor& log_probs, std::span<const int> targets);

struct Conv2dGeometry {
  Index kernel_freq = 1, kernel_time = 1;
  Index stride_freq = 1, stride_time = 1;
  Index pad_freq = 0, pad_time = 0;

  Index out_freq(Index in) const { return (in + 2 * pad_freq - kernel_freq) / stride_freq + 1; }
  Index out_time(Index in) const { return (in + 2 * pad_time - kernel_time) / stride_time + 1; }
};

// input [C_in, F, T], weight [C_out, C_in, kf, kt], bias [C_out]
// -> [C_out, F', T'] with out = floor((in + 2 pad - kernel) / stride) + 1.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& geometry);

// Reshape to a new shape with the same element count (row-major order kept).
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

void require_finite(const Tensor& t, OpKind kind);

}  // namespace hvslu::ops
