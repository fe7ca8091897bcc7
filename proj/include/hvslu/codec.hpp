#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hvslu {

class CodecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class AlphabetMode { asr, slu };

// Symbol inventory. Ids are contiguous from 0 in the order:
//   blank, space, graphemes..., [concept open symbols..., close]
// so an slu alphabet always extends the asr alphabet over the same
// graphemes as a strict prefix.
class OutputAlphabet {
 public:
  static constexpr int kBlank = 0;
  static constexpr int kSpace = 1;

  static OutputAlphabet asr(const std::string& graphemes);
  static OutputAlphabet slu(const std::string& graphemes, const std::vector<std::string>& concepts);
  // Rebuilds an alphabet from the symbol listing stored in checkpoints.
  static OutputAlphabet from_listing(const std::vector<std::string>& listing);

  OutputAlphabet with_concepts(const std::vector<std::string>& concepts) const;

  AlphabetMode mode() const { return mode_; }
  int size() const;
  int blank_id() const { return kBlank; }
  int space_id() const { return kSpace; }
  int close_id() const;
  int open_id(std::size_t concept_index) const;
  std::optional<int> char_id(char c) const;
  std::optional<int> concept_id(const std::string& tag) const;

  bool is_grapheme(int id) const { return id >= 2 && id < 2 + static_cast<int>(graphemes_.size()); }
  bool is_open(int id) const;
  bool is_close(int id) const { return mode_ == AlphabetMode::slu && id == close_id(); }
  char grapheme(int id) const { return graphemes_.at(static_cast<std::size_t>(id - 2)); }
  const std::string& concept_at(int open_symbol) const;

  const std::string& graphemes() const { return graphemes_; }
  const std::vector<std::string>& concepts() const { return concepts_; }

  std::string symbol_name(int id) const;
  std::vector<std::string> listing() const;

  // True when every symbol of *this has the same id in `other`.
  bool is_prefix_of(const OutputAlphabet& other) const;

  friend bool operator==(const OutputAlphabet&, const OutputAlphabet&) = default;

 private:
  AlphabetMode mode_ = AlphabetMode::asr;
  std::string graphemes_;
  std::vector<std::string> concepts_;
};

struct ConceptSpan {
  std::string tag;
  std::string value;
  std::size_t begin = 0;  // character span in the plain transcript
  std::size_t end = 0;

  friend bool operator==(const ConceptSpan&, const ConceptSpan&) = default;
};

// A line such as "i want <arrival> monday </> please": tokens separated by
// single spaces, "<name>" opens a concept, "</>" closes it. Concepts are
// flat and must enclose at least one word.
struct ConceptTaggedTranscript {
  std::string tagged;
  std::string plain;
  std::vector<ConceptSpan> concepts;

  static ConceptTaggedTranscript parse(const std::string& tagged_text);

  std::vector<std::string> tags() const;
  std::vector<std::pair<std::string, std::string>> tag_values() const;
};

// Removes concept markers from a tagged line.
std::string strip_tags(const std::string& tagged_text);

std::vector<int> encode_transcript(const OutputAlphabet& alphabet, const std::string& tagged_text);
// Plain characters only (asr targets): markers removed before encoding.
std::vector<int> encode_plain(const OutputAlphabet& alphabet, const std::string& plain_text);

struct DecodedTranscript {
  std::string plain;
  std::vector<std::pair<std::string, std::string>> concepts;

  std::vector<std::string> tags() const;
  // Reconstructed tagged line in the textual tag syntax.
  std::string tagged;
};

// Total over any id sequence: an unclosed open marker ends at the next open
// marker or at the end, a stray close is dropped, blanks are ignored.
DecodedTranscript decode_symbols(const OutputAlphabet& alphabet, std::span<const int> ids);

struct BagOfConcepts {
  std::vector<std::uint8_t> bits;

  std::vector<double> as_targets() const { return {bits.begin(), bits.end()}; }
  std::size_t count() const;
  friend bool operator==(const BagOfConcepts&, const BagOfConcepts&) = default;
};

BagOfConcepts bag_of_concepts(const ConceptTaggedTranscript& transcript,
                              const std::vector<std::string>& inventory);

// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_spaces(const std::string& text);

}  // namespace hvslu
