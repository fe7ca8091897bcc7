#include "hvslu/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace hvslu::eval {

double ErrorCounts::rate() const {
  if (reference_count == 0) throw EvaluationError("error rate undefined: zero reference concepts");
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(reference_count);
}

double cer(const std::vector<TagSequence>& refs, const std::vector<TagSequence>& hyps) {
  return pooled_counts(refs, hyps).rate();
}

double cver(const std::vector<TagValueSequence>& refs, const std::vector<TagValueSequence>& hyps) {
  return pooled_counts(refs, hyps).rate();
}

double relative_reduction(double baseline, double system) {
  if (baseline == 0.0) throw EvaluationError("relative reduction undefined for a zero baseline");
  return 100.0 * (baseline - system) / baseline;
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

std::string format1(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", round1(value));
  std::string s = buf;
  return s == "-0.0" ? "0.0" : s;
}

std::vector<std::size_t> per_concept_errors(const std::vector<TagSequence>& refs,
                                            const std::vector<TagSequence>& hyps,
                                            const std::vector<std::string>& inventory) {
  if (refs.size() != hyps.size()) throw EvaluationError("reference and hypothesis lists differ in length");
  std::vector<std::size_t> counts(inventory.size(), 0);
  auto charge = [&](const std::string& tag) {
    auto it = std::find(inventory.begin(), inventory.end(), tag);
    if (it != inventory.end()) ++counts[static_cast<std::size_t>(it - inventory.begin())];
  };
  for (std::size_t k = 0; k < refs.size(); ++k) {
    AlignmentResult a = align_concepts(refs[k], hyps[k]);
    for (const AlignedPair& p : a.pairs) {
      switch (p.kind) {
        case EditKind::match: break;
        case EditKind::substitution:
        case EditKind::deletion: charge(refs[k][*p.ref_index]); break;
        case EditKind::insertion: charge(hyps[k][*p.hyp_index]); break;
      }
    }
  }
  return counts;
}

}  // namespace hvslu::eval
