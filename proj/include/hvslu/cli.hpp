#pragma once

#include "hvslu/codec.hpp"
#include "hvslu/corpus.hpp"
#include "hvslu/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hvslu::cli {

inline constexpr const char* kHypothesisFormatTag = "HVHYP1";

struct HypothesisRecord {
  std::string id;
  DecodedTranscript transcript;
};

struct HypothesisFile {
  nlohmann::json header;
  std::vector<HypothesisRecord> records;
};

std::string serialize_hypotheses(const HypothesisFile& file);
HypothesisFile parse_hypotheses(const std::string& text);

struct ScoreRecord {
  std::string name;
  double cer = 0.0;
  double cver = 0.0;
  std::optional<double> delta_cer;
  std::optional<double> delta_cver;

  nlohmann::json to_json() const;
  static ScoreRecord from_json(const nlohmann::json& j);
};

// Scores hypotheses against the reference split; ids must line up.
ScoreRecord score_hypotheses(const Corpus& corpus, Split split, const HypothesisFile& hyps, const std::string& name);

// First record is the baseline. Deltas use the one-decimal CER and CVER
// shown in the table.
std::vector<ScoreRecord> with_deltas(std::vector<ScoreRecord> rows);
std::string format_table(const std::vector<ScoreRecord>& rows);

// Entry point shared by the hvslu binary and the tests. Returns the exit
// status; errors are reported on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hvslu::cli
