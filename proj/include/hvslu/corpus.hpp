#pragma once

#include "hvslu/codec.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvslu {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { train, dev, test };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ConceptSpec {
  std::string tag;
  std::string prompt_keyword;       // word naming the concept in system prompts
  std::vector<std::string> values;  // surface values, possibly multi-word

  friend bool operator==(const ConceptSpec&, const ConceptSpec&) = default;
};

// Twelve hotel-booking concepts in six pairs; both members of a pair draw
// their values from the same list, so only context tells them apart.
std::vector<ConceptSpec> default_inventory();

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int n_dialogs = 200;
  int min_dialog_turns = 2;
  int max_dialog_turns = 6;
  int max_turns = 15;
  // Per concept: with probability rho the answer follows the prompt
  // (present iff prompted), otherwise presence is Bernoulli(base_rate).
  double rho = 0.8;
  double base_rate = 0.08;
  int min_prompt_concepts = 1;
  int max_prompt_concepts = 3;
  std::vector<ConceptSpec> inventory = default_inventory();
  std::vector<std::string> prompt_openers = {"which", "what is the", "please give your",
                                             "tell me the", "do you have a", "okay so which"};
  std::vector<std::string> prompt_closers = {"", "please", "now", "thanks"};
  std::vector<std::string> user_prefixes = {"yes", "ok", "um", "i want", "i would like", "maybe"};
  std::vector<std::string> user_suffixes = {"please", "for it", "is ok"};
  std::vector<std::string> user_fillers = {"yes", "no", "ok please", "no thanks maybe", "i want it"};
  double prefix_rate = 0.3;
  double suffix_rate = 0.2;
  std::string graphemes = "abcdefghijklmnopqrstuvwxyz";
  int system_vocab_size = 30;
  int user_vocab_size = 40;
  double train_fraction = 0.7;
  double dev_fraction = 0.1;
  double min_concept_marginal = 0.01;

  std::vector<std::string> concept_tags() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
  // FNV-1a over the canonical JSON serialization, as 16 hex digits.
  std::string hash() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct DialogTurnPair {
  std::string dialog_id;
  int turn_index = 0;
  Split split = Split::train;
  std::vector<std::string> system_prompt;
  ConceptTaggedTranscript user;
  std::uint64_t utterance_seed = 0;

  friend bool operator==(const DialogTurnPair& a, const DialogTurnPair& b) {
    return a.dialog_id == b.dialog_id && a.turn_index == b.turn_index && a.split == b.split &&
           a.system_prompt == b.system_prompt && a.user.tagged == b.user.tagged &&
           a.utterance_seed == b.utterance_seed;
  }
};

struct Corpus {
  GeneratorConfig config;
  std::vector<DialogTurnPair> pairs;

  std::vector<const DialogTurnPair*> split(Split which) const;
  // Hash over the serialized corpus file contents.
  std::string content_hash() const;
  std::vector<std::string> system_vocabulary() const;
  std::vector<std::string> user_vocabulary() const;
};

Corpus generate_corpus(const GeneratorConfig& config);

inline constexpr const char* kCorpusFormatTag = "HVCORP1";

std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(const std::string& text);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

std::string fnv1a_hex(const std::string& bytes);
std::string join_words(const std::vector<std::string>& words);
std::vector<std::string> split_words(const std::string& text);

}  // namespace hvslu
