#include "hvslu/codec.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace hvslu {

namespace {

const std::string kCloseMarker = "</>";

bool valid_tag_name(const std::string& name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

bool is_open_marker(const std::string& token) {
  return token.size() >= 3 && token.front() == '<' && token.back() == '>' && token[1] != '/';
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(' ', start);
    if (end == std::string::npos) end = text.size();
    tokens.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

void validate_graphemes(const std::string& graphemes) {
  std::set<char> seen;
  for (char c : graphemes) {
    if (c == ' ' || c == '<' || c == '>' || c == '/') {
      throw CodecError(std::string("grapheme set may not contain '") + c + "'");
    }
    if (!seen.insert(c).second) throw CodecError(std::string("duplicate grapheme '") + c + "'");
  }
}

void validate_concepts(const std::vector<std::string>& concepts) {
  std::set<std::string> seen;
  for (const auto& name : concepts) {
    if (!valid_tag_name(name)) throw CodecError("invalid concept tag name '" + name + "'");
    if (!seen.insert(name).second) throw CodecError("duplicate concept tag '" + name + "'");
  }
}

}  // namespace

std::string normalize_spaces(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------- alphabet

OutputAlphabet OutputAlphabet::asr(const std::string& graphemes) {
  validate_graphemes(graphemes);
  OutputAlphabet a;
  a.mode_ = AlphabetMode::asr;
  a.graphemes_ = graphemes;
  return a;
}

OutputAlphabet OutputAlphabet::slu(const std::string& graphemes,
                                   const std::vector<std::string>& concepts) {
  return asr(graphemes).with_concepts(concepts);
}

OutputAlphabet OutputAlphabet::with_concepts(const std::vector<std::string>& concepts) const {
  validate_concepts(concepts);
  OutputAlphabet a;
  a.mode_ = AlphabetMode::slu;
  a.graphemes_ = graphemes_;
  a.concepts_ = concepts;
  return a;
}

OutputAlphabet OutputAlphabet::from_listing(const std::vector<std::string>& listing) {
  if (listing.size() < 2 || listing[0] != "<blank>" || listing[1] != "<space>") {
    throw CodecError("alphabet listing must start with <blank> and <space>");
  }
  std::string graphemes;
  std::vector<std::string> concepts;
  bool slu = false;
  for (std::size_t i = 2; i < listing.size(); ++i) {
    const std::string& sym = listing[i];
    if (sym == kCloseMarker) {
      if (i + 1 != listing.size()) throw CodecError("close symbol must be last in alphabet listing");
      slu = true;
    } else if (is_open_marker(sym)) {
      concepts.push_back(sym.substr(1, sym.size() - 2));
    } else if (sym.size() == 1 && concepts.empty()) {
      graphemes.push_back(sym[0]);
    } else {
      throw CodecError("malformed alphabet symbol '" + sym + "'");
    }
  }
  if (!concepts.empty() && !slu) throw CodecError("alphabet listing has concepts but no close symbol");
  return slu ? OutputAlphabet::slu(graphemes, concepts) : OutputAlphabet::asr(graphemes);
}

int OutputAlphabet::size() const {
  int n = 2 + static_cast<int>(graphemes_.size());
  if (mode_ == AlphabetMode::slu) n += static_cast<int>(concepts_.size()) + 1;
  return n;
}

int OutputAlphabet::close_id() const {
  if (mode_ != AlphabetMode::slu) throw CodecError("asr alphabet has no close symbol");
  return size() - 1;
}

int OutputAlphabet::open_id(std::size_t concept_index) const {
  if (mode_ != AlphabetMode::slu || concept_index >= concepts_.size()) {
    throw CodecError("concept index out of range");
  }
  return 2 + static_cast<int>(graphemes_.size() + concept_index);
}

bool OutputAlphabet::is_open(int id) const {
  if (mode_ != AlphabetMode::slu) return false;
  const int first = 2 + static_cast<int>(graphemes_.size());
  return id >= first && id < first + static_cast<int>(concepts_.size());
}

const std::string& OutputAlphabet::concept_at(int open_symbol) const {
  if (!is_open(open_symbol)) throw CodecError("symbol is not a concept open marker");
  return concepts_[static_cast<std::size_t>(open_symbol - 2 - static_cast<int>(graphemes_.size()))];
}

std::optional<int> OutputAlphabet::char_id(char c) const {
  if (c == ' ') return kSpace;
  auto pos = graphemes_.find(c);
  if (pos == std::string::npos) return std::nullopt;
  return 2 + static_cast<int>(pos);
}

std::optional<int> OutputAlphabet::concept_id(const std::string& tag) const {
  auto it = std::find(concepts_.begin(), concepts_.end(), tag);
  if (mode_ != AlphabetMode::slu || it == concepts_.end()) return std::nullopt;
  return open_id(static_cast<std::size_t>(it - concepts_.begin()));
}

std::string OutputAlphabet::symbol_name(int id) const {
  if (id == kBlank) return "<blank>";
  if (id == kSpace) return "<space>";
  if (is_grapheme(id)) return std::string(1, grapheme(id));
  if (is_open(id)) return "<" + concept_at(id) + ">";
  if (is_close(id)) return kCloseMarker;
  throw CodecError("symbol id " + std::to_string(id) + " outside alphabet");
}

std::vector<std::string> OutputAlphabet::listing() const {
  std::vector<std::string> out;
  for (int id = 0; id < size(); ++id) out.push_back(symbol_name(id));
  return out;
}

bool OutputAlphabet::is_prefix_of(const OutputAlphabet& other) const {
  if (other.size() < size()) return false;
  for (int id = 0; id < size(); ++id) {
    if (symbol_name(id) != other.symbol_name(id)) return false;
  }
  return true;
}

// ---------------------------------------------------------------- transcripts

ConceptTaggedTranscript ConceptTaggedTranscript::parse(const std::string& tagged_text) {
  if (tagged_text.empty()) throw CodecError("empty transcript");
  ConceptTaggedTranscript t;
  t.tagged = tagged_text;
  std::optional<ConceptSpan> open;
  std::size_t words_in_open = 0;
  for (const std::string& token : split_tokens(tagged_text)) {
    if (token.empty()) {
      throw CodecError("transcript tokens must be separated by single spaces: '" + tagged_text + "'");
    }
    if (token == kCloseMarker) {
      if (!open) throw CodecError("close marker without open concept in '" + tagged_text + "'");
      if (words_in_open == 0) throw CodecError("empty concept <" + open->tag + "> in '" + tagged_text + "'");
      open->end = t.plain.size();
      open->value = t.plain.substr(open->begin, open->end - open->begin);
      t.concepts.push_back(*open);
      open.reset();
    } else if (is_open_marker(token)) {
      std::string name = token.substr(1, token.size() - 2);
      if (!valid_tag_name(name)) throw CodecError("invalid tag '" + token + "'");
      if (open) throw CodecError("nested concept <" + name + "> inside <" + open->tag + ">");
      open = ConceptSpan{name, "", t.plain.empty() ? 0 : t.plain.size() + 1, 0};
      words_in_open = 0;
    } else {
      if (token.find_first_of("<>") != std::string::npos) {
        throw CodecError("stray marker characters in token '" + token + "'");
      }
      if (!t.plain.empty()) t.plain.push_back(' ');
      t.plain += token;
      ++words_in_open;
    }
  }
  if (open) throw CodecError("unclosed concept <" + open->tag + "> in '" + tagged_text + "'");
  return t;
}

std::vector<std::string> ConceptTaggedTranscript::tags() const {
  std::vector<std::string> out;
  for (const auto& c : concepts) out.push_back(c.tag);
  return out;
}

std::vector<std::pair<std::string, std::string>> ConceptTaggedTranscript::tag_values() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : concepts) out.emplace_back(c.tag, c.value);
  return out;
}

std::string strip_tags(const std::string& tagged_text) {
  return ConceptTaggedTranscript::parse(tagged_text).plain;
}

std::vector<int> encode_transcript(const OutputAlphabet& alphabet, const std::string& tagged_text) {
  ConceptTaggedTranscript::parse(tagged_text);  // validates balance and nesting
  std::vector<int> ids;
  for (const std::string& token : split_tokens(tagged_text)) {
    if (!ids.empty()) ids.push_back(alphabet.space_id());
    if (token == kCloseMarker) {
      if (alphabet.mode() != AlphabetMode::slu) throw CodecError("asr alphabet cannot encode concept markers");
      ids.push_back(alphabet.close_id());
    } else if (is_open_marker(token)) {
      std::string name = token.substr(1, token.size() - 2);
      auto id = alphabet.concept_id(name);
      if (!id) throw CodecError("unknown concept tag <" + name + ">");
      ids.push_back(*id);
    } else {
      for (char c : token) {
        auto id = alphabet.char_id(c);
        if (!id) throw CodecError(std::string("unknown character '") + c + "'");
        ids.push_back(*id);
      }
    }
  }
  return ids;
}

std::vector<int> encode_plain(const OutputAlphabet& alphabet, const std::string& plain_text) {
  std::vector<int> ids;
  for (char c : plain_text) {
    auto id = alphabet.char_id(c);
    if (!id) throw CodecError(std::string("unknown character '") + c + "'");
    ids.push_back(*id);
  }
  return ids;
}

std::vector<std::string> DecodedTranscript::tags() const {
  std::vector<std::string> out;
  for (const auto& c : concepts) out.push_back(c.first);
  return out;
}

DecodedTranscript decode_symbols(const OutputAlphabet& alphabet, std::span<const int> ids) {
  DecodedTranscript out;
  std::string text;  // marker-free characters
  std::string tagged;
  std::optional<std::string> open_tag;
  std::string value;

  auto finish = [&] {
    out.concepts.emplace_back(*open_tag, normalize_spaces(value));
    tagged += " </> ";
    open_tag.reset();
    value.clear();
  };

  for (int id : ids) {
    if (id < 0 || id >= alphabet.size() || id == alphabet.blank_id()) continue;
    if (alphabet.is_open(id)) {
      if (open_tag) finish();
      open_tag = alphabet.concept_at(id);
      tagged += " <" + *open_tag + "> ";
    } else if (alphabet.is_close(id)) {
      if (open_tag) finish();
    } else {
      const char c = id == alphabet.space_id() ? ' ' : alphabet.grapheme(id);
      text.push_back(c);
      tagged.push_back(c);
      if (open_tag) value.push_back(c);
    }
  }
  if (open_tag) finish();
  out.plain = normalize_spaces(text);
  out.tagged = normalize_spaces(tagged);
  return out;
}

// ---------------------------------------------------------------- bag of concepts

std::size_t BagOfConcepts::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BagOfConcepts bag_of_concepts(const ConceptTaggedTranscript& transcript,
                              const std::vector<std::string>& inventory) {
  BagOfConcepts bag;
  bag.bits.assign(inventory.size(), 0);
  for (const auto& c : transcript.concepts) {
    auto it = std::find(inventory.begin(), inventory.end(), c.tag);
    if (it == inventory.end()) throw CodecError("concept <" + c.tag + "> not in inventory");
    bag.bits[static_cast<std::size_t>(it - inventory.begin())] = 1;
  }
  return bag;
}

}  // namespace hvslu
