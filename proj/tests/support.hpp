#pragma once

// Oracles shared by the unit tests and the acceptance binary. Each one is
// written without reference to the code it checks.

#include "hvslu/rng.hpp"
#include "hvslu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace hvslu::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "tensor k[i]" with the largest error
  std::size_t checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// round-off in near-zero derivatives from reading as a large relative error.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of the scalar `loss` w.r.t. every element of `wrt`.
inline GradCheck check_gradients(const std::function<Tensor(Tape&)>& loss, std::vector<Tensor> wrt,
                                 double eps = 1e-6) {
  for (Tensor& t : wrt) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  {
    Tape tape;
    Tensor l = loss(tape);
    tape.backward(l);
  }
  auto eval = [&] {
    Tape tape;
    tape.set_recording(false);
    return loss(tape).item();
  };
  GradCheck out;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    Tensor& t = wrt[k];
    const Matrix analytic = t.has_grad() ? t.grad() : Matrix::Zero(t.rows(), t.cols());
    for (Index i = 0; i < t.numel(); ++i) {
      const double saved = t.value().data()[i];
      t.mutable_value().data()[i] = saved + eps;
      const double up = eval();
      t.mutable_value().data()[i] = saved - eps;
      const double down = eval();
      t.mutable_value().data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic.data()[i], numeric);
      ++out.checked;
      if (err > out.max_rel_error || out.checked == 1) {
        out.max_rel_error = err;
        out.worst = "tensor " + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (Tensor& t : wrt) t.clear_grad();
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<Scalar> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_values(std::move(shape), v, true);
}

// Random rows that are valid log-distributions.
inline Matrix random_log_probs(Index frames, Index symbols, Rng& rng) {
  Matrix m(frames, symbols);
  for (Index t = 0; t < frames; ++t) {
    double total = 0.0;
    for (Index a = 0; a < symbols; ++a) {
      m(t, a) = std::exp(rng.uniform(-2.0, 2.0));
      total += m(t, a);
    }
    for (Index a = 0; a < symbols; ++a) m(t, a) = std::log(m(t, a) / total);
  }
  return m;
}

// -log of the total probability of every frame path (A^T of them) whose
// collapse is `labels`.
inline double brute_force_ctc(const Matrix& log_probs, const std::vector<int>& labels, int blank) {
  const Index frames = log_probs.rows(), symbols = log_probs.cols();
  std::vector<int> path(static_cast<std::size_t>(frames), 0);
  double total = 0.0;
  while (true) {
    std::vector<int> collapsed;
    int prev = -1;
    for (int s : path) {
      if (s != prev && s != blank) collapsed.push_back(s);
      prev = s;
    }
    if (collapsed == labels) {
      double lp = 0.0;
      for (Index t = 0; t < frames; ++t) lp += log_probs(t, path[static_cast<std::size_t>(t)]);
      total += std::exp(lp);
    }
    Index pos = 0;
    while (pos < frames && ++path[static_cast<std::size_t>(pos)] == symbols) path[static_cast<std::size_t>(pos++)] = 0;
    if (pos == frames) break;
  }
  return total > 0.0 ? -std::log(total) : std::numeric_limits<double>::infinity();
}

// Edit distances from `source` to every string of length <= max_len over
// `alphabet` symbols, by breadth-first search over single insertions,
// deletions and substitutions. Some shortest script does its deletions
// first and its insertions last, so intermediates never need to be longer
// than both endpoints.
inline std::map<std::vector<int>, int> edit_distances_from(const std::vector<int>& source, int alphabet,
                                                           std::size_t max_len) {
  std::map<std::vector<int>, int> dist;
  std::deque<std::vector<int>> queue;
  dist[source] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    const std::vector<int> s = queue.front();
    queue.pop_front();
    const int d = dist[s];
    std::vector<std::vector<int>> next;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto del = s;
      del.erase(del.begin() + static_cast<std::ptrdiff_t>(i));
      next.push_back(del);
      for (int a = 0; a < alphabet; ++a) {
        if (a == s[i]) continue;
        auto sub = s;
        sub[i] = a;
        next.push_back(sub);
      }
    }
    if (s.size() < max_len) {
      for (std::size_t i = 0; i <= s.size(); ++i) {
        for (int a = 0; a < alphabet; ++a) {
          auto ins = s;
          ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(i), a);
          next.push_back(ins);
        }
      }
    }
    for (auto& n : next) {
      if (dist.emplace(n, d + 1).second) queue.push_back(std::move(n));
    }
  }
  return dist;
}

inline std::vector<std::vector<int>> all_sequences(int alphabet, std::size_t max_len) {
  std::vector<std::vector<int>> out = {{}};
  std::vector<std::vector<int>> layer = {{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> grown;
    for (const auto& s : layer) {
      for (int a = 0; a < alphabet; ++a) {
        auto g = s;
        g.push_back(a);
        grown.push_back(g);
      }
    }
    out.insert(out.end(), grown.begin(), grown.end());
    layer = std::move(grown);
  }
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace hvslu::testing
