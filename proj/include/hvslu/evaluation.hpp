#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hvslu::eval {

class EvaluationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class EditKind { match, substitution, deletion, insertion };

struct AlignedPair {
  EditKind kind;
  std::optional<std::size_t> ref_index;
  std::optional<std::size_t> hyp_index;
};

struct AlignmentResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_count = 0;
  std::vector<AlignedPair> pairs;

  std::size_t errors() const { return substitutions + deletions + insertions; }
};

// Unit-cost Levenshtein alignment. The backtrace prefers the diagonal
// (match or substitution), then a deletion, then an insertion.
template <typename T>
AlignmentResult align_concepts(const std::vector<T>& ref, const std::vector<T>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i) cost[at(i, 0)] = i;
  for (std::size_t j = 0; j <= m; ++j) cost[at(0, j)] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = cost[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t up = cost[at(i - 1, j)] + 1;
      const std::size_t left = cost[at(i, j - 1)] + 1;
      cost[at(i, j)] = std::min(diag, std::min(up, left));
    }
  }

  AlignmentResult result;
  result.reference_count = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (cost[at(i, j)] == cost[at(i - 1, j - 1)] + (same ? 0 : 1)) {
        result.pairs.push_back({same ? EditKind::match : EditKind::substitution, i - 1, j - 1});
        if (!same) ++result.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[at(i, j)] == cost[at(i - 1, j)] + 1) {
      result.pairs.push_back({EditKind::deletion, i - 1, std::nullopt});
      ++result.deletions;
      --i;
      continue;
    }
    result.pairs.push_back({EditKind::insertion, std::nullopt, j - 1});
    ++result.insertions;
    --j;
  }
  std::reverse(result.pairs.begin(), result.pairs.end());
  return result;
}

using TagSequence = std::vector<std::string>;
using TagValueSequence = std::vector<std::pair<std::string, std::string>>;

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_count = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  // 100 * errors / reference_count; throws when the reference is empty.
  double rate() const;
};

template <typename T>
ErrorCounts pooled_counts(const std::vector<std::vector<T>>& refs,
                          const std::vector<std::vector<T>>& hyps) {
  if (refs.size() != hyps.size()) {
    throw EvaluationError("reference and hypothesis lists differ in length (" +
                          std::to_string(refs.size()) + " vs " + std::to_string(hyps.size()) + ")");
  }
  ErrorCounts total;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    AlignmentResult a = align_concepts(refs[k], hyps[k]);
    total.substitutions += a.substitutions;
    total.deletions += a.deletions;
    total.insertions += a.insertions;
    total.reference_count += a.reference_count;
  }
  return total;
}

// Concept error rate (percent), pooled over the corpus.
double cer(const std::vector<TagSequence>& refs, const std::vector<TagSequence>& hyps);
// Concept/value error rate (percent): items are (tag, value) pairs.
double cver(const std::vector<TagValueSequence>& refs, const std::vector<TagValueSequence>& hyps);

// 100 * (baseline - system) / baseline.
double relative_reduction(double baseline, double system);
// Rounds half away from zero to one decimal.
double round1(double value);
std::string format1(double value);

// Per-concept error attribution: substitutions and deletions are charged
// to the reference tag, insertions to the hypothesis tag.
std::vector<std::size_t> per_concept_errors(const std::vector<TagSequence>& refs,
                                            const std::vector<TagSequence>& hyps,
                                            const std::vector<std::string>& inventory);

}  // namespace hvslu::eval
