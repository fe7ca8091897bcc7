#pragma once

#include "hvslu/tensor.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace hvslu::ctc {

class CtcError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Minimum number of frames able to emit `labels`: one per label plus one
// separating blank for every pair of adjacent equal labels.
Index required_frames(std::span<const int> labels);

struct ForwardBackward {
  Scalar loss = 0.0;  // -log P(labels | scores)
  Matrix grad;        // d loss / d log_probs, [T, A]
};

// Exact loss and gradient by the log-space forward-backward recursion over
// the blank-extended label sequence. `log_probs` rows are per-frame log
// scores; normalization is the caller's responsibility.
ForwardBackward forward_backward(const Matrix& log_probs, std::span<const int> labels, int blank_id);

// Scalar CTC loss registered on the tape.
Tensor ctc_loss(Tape& tape, const Tensor& log_probs, std::span<const int> labels, int blank_id);

// Merges adjacent duplicates, then drops blanks.
std::vector<int> collapse(std::span<const int> frames, int blank_id);

// Per-frame argmax followed by collapse. Ties pick the lowest id.
std::vector<int> greedy_decode(const Matrix& log_probs, int blank_id);

}  // namespace hvslu::ctc
