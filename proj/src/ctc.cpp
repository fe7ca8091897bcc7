#include "hvslu/ctc.hpp"

#include "hvslu/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hvslu::ctc {

namespace {

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

Scalar log_add(Scalar a, Scalar b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const Scalar hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void validate(const Matrix& log_probs, std::span<const int> labels, int blank_id) {
  const Index alphabet = log_probs.cols();
  if (blank_id < 0 || blank_id >= alphabet) {
    throw CtcError("ctc: blank id " + std::to_string(blank_id) + " outside alphabet of size " +
                   std::to_string(alphabet));
  }
  for (int label : labels) {
    if (label == blank_id) throw CtcError("ctc: label sequence contains the blank id");
    if (label < 0 || label >= alphabet) {
      throw CtcError("ctc: label " + std::to_string(label) + " outside alphabet of size " +
                     std::to_string(alphabet));
    }
  }
  const Index need = required_frames(labels);
  if (log_probs.rows() < std::max<Index>(need, 1)) {
    throw CtcError("ctc: infeasible alignment, " + std::to_string(log_probs.rows()) +
                   " frames for a label sequence needing " + std::to_string(need));
  }
}

}  // namespace

Index required_frames(std::span<const int> labels) {
  Index n = static_cast<Index>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

ForwardBackward forward_backward(const Matrix& lp, std::span<const int> labels, int blank_id) {
  validate(lp, labels, blank_id);
  if (!lp.allFinite()) throw NumericError("ctc: non-finite log-probabilities");
  const Index frames = lp.rows();
  const Index ext_len = 2 * static_cast<Index>(labels.size()) + 1;
  std::vector<int> ext(static_cast<std::size_t>(ext_len), blank_id);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];

  auto skip_allowed = [&](Index s) {
    return s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2];
  };

  Matrix alpha = Matrix::Constant(frames, ext_len, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (ext_len > 1) alpha(0, 1) = lp(0, ext[1]);
  for (Index t = 1; t < frames; ++t) {
    for (Index s = 0; s < ext_len; ++s) {
      Scalar a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (skip_allowed(s)) a = log_add(a, alpha(t - 1, s - 2));
      if (a != kNegInf) alpha(t, s) = a + lp(t, ext[s]);
    }
  }

  Matrix beta = Matrix::Constant(frames, ext_len, kNegInf);
  beta(frames - 1, ext_len - 1) = lp(frames - 1, ext[ext_len - 1]);
  if (ext_len > 1) beta(frames - 1, ext_len - 2) = lp(frames - 1, ext[ext_len - 2]);
  for (Index t = frames - 1; t-- > 0;) {
    for (Index s = 0; s < ext_len; ++s) {
      Scalar b = beta(t + 1, s);
      if (s + 1 < ext_len) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < ext_len && skip_allowed(s + 2)) b = log_add(b, beta(t + 1, s + 2));
      if (b != kNegInf) beta(t, s) = b + lp(t, ext[s]);
    }
  }

  Scalar log_total = alpha(frames - 1, ext_len - 1);
  if (ext_len > 1) log_total = log_add(log_total, alpha(frames - 1, ext_len - 2));
  if (log_total == kNegInf) throw CtcError("ctc: label sequence has zero probability");

  ForwardBackward result;
  result.loss = -log_total;
  result.grad = Matrix::Zero(frames, lp.cols());
  Matrix occupancy = Matrix::Constant(frames, lp.cols(), kNegInf);
  for (Index t = 0; t < frames; ++t) {
    for (Index s = 0; s < ext_len; ++s) {
      const Scalar ab = alpha(t, s) + beta(t, s);
      if (ab == kNegInf) continue;
      occupancy(t, ext[s]) = log_add(occupancy(t, ext[s]), ab);
    }
    for (Index k = 0; k < lp.cols(); ++k) {
      if (occupancy(t, k) == kNegInf) continue;
      // alpha and beta both include the frame-t emission, hence the - lp term.
      result.grad(t, k) = -std::exp(occupancy(t, k) - lp(t, k) - log_total);
    }
  }
  return result;
}

Tensor ctc_loss(Tape& tape, const Tensor& log_probs, std::span<const int> labels, int blank_id) {
  if (log_probs.rank() != 2) {
    throw ShapeError("ctc_loss: log_probs must be [T, A], got " + shape_string(log_probs.shape()));
  }
  ops::require_finite(log_probs, OpKind::ctc);
  ForwardBackward fb = forward_backward(log_probs.value(), labels, blank_id);
  Tensor out = Tensor::scalar(fb.loss);
  if (tape.wants({&log_probs})) {
    auto xd = log_probs.data();
    auto od = out.data();
    tape.record(OpKind::ctc, {xd}, out, [xd, od, grad = std::move(fb.grad)] {
      xd->accumulate_grad_expr(grad * od->grad(0, 0));
    });
  }
  return out;
}

std::vector<int> collapse(std::span<const int> frames, int blank_id) {
  std::vector<int> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && frames[i] == frames[i - 1]) continue;
    if (frames[i] != blank_id) out.push_back(frames[i]);
  }
  return out;
}

std::vector<int> greedy_decode(const Matrix& log_probs, int blank_id) {
  std::vector<int> best(static_cast<std::size_t>(log_probs.rows()));
  for (Index t = 0; t < log_probs.rows(); ++t) {
    Index arg = 0;
    log_probs.row(t).maxCoeff(&arg);
    best[static_cast<std::size_t>(t)] = static_cast<int>(arg);
  }
  return collapse(best, blank_id);
}

}  // namespace hvslu::ctc
