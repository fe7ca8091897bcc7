#pragma once

#include "hvslu/checkpoint.hpp"
#include "hvslu/codec.hpp"
#include "hvslu/corpus.hpp"
#include "hvslu/layers.hpp"
#include "hvslu/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hvslu {

// Prompt word inventory. Ids 0..2 are reserved for <unk>, <bos>, <eos>.
class PromptVocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  PromptVocab();
  static PromptVocab build(const std::vector<std::vector<std::string>>& prompts);
  static PromptVocab from_words(const std::vector<std::string>& words);

  int id(const std::string& word) const;
  std::vector<int> encode(const std::vector<std::string>& words) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  friend bool operator==(const PromptVocab& a, const PromptVocab& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

// Number of trailing dims reserved for the turn encoding.
Index turn_dims_for(Index hvector_dim);

// [min(turn / max_turns, 1), turn == 0 ? 1 : 0]; further reserved dims,
// if any, stay zero.
RowVector encode_turn_dims(int turn, int max_turns, Index dims = 2);

struct HVector {
  RowVector values;
  Index content_dim = 0;

  Index dim() const { return values.size(); }
  Index turn_dim() const { return values.size() - content_dim; }
  RowVector content() const { return values.head(content_dim); }
  RowVector turn() const { return values.tail(turn_dim()); }
};

HVector zero_hvector(Index dim = 100);
HVector make_hvector(const RowVector& content, int turn, int max_turns, Index dim);

enum class ExtractorKind { none, unsupervised, supervised_freq, supervised_all };
std::string to_string(ExtractorKind kind);
ExtractorKind parse_extractor_kind(const std::string& text);

struct ExtractorConfig {
  Index hvector_dim = 100;
  Index embedding_dim = 10;
  Index predictor_hidden = 24;    // per direction
  Index autoencoder_hidden = 98;  // equals the content width
  int max_turns = 15;
  int epochs = 30;
  int batch_size = 4;
  OptimizerConfig optimizer{.learning_rate = 3e-3};
  std::uint64_t seed = 1;

  Index content_dim() const { return hvector_dim - turn_dims_for(hvector_dim); }
  nlohmann::json to_json() const;
  static ExtractorConfig from_json(const nlohmann::json& j);
};

// Word embeddings -> bidirectional GRU -> tanh projection (the content
// embedding) -> decision layer over [content ; turn dims] with one sigmoid
// output per target concept.
class PromptBagPredictor {
 public:
  PromptBagPredictor(const ExtractorConfig& config, PromptVocab vocab, std::vector<std::string> targets);

  Tensor content(Tape& tape, const std::vector<int>& ids) const;  // [content_dim]
  Tensor logits(Tape& tape, const std::vector<int>& ids, int turn) const;
  std::vector<std::uint8_t> predict(const std::vector<std::string>& prompt, int turn) const;

  ParamList parameters() const;
  static Index parameter_count(const ExtractorConfig& config, Index vocab_size, Index n_targets);

  const ExtractorConfig& config() const { return config_; }
  const PromptVocab& vocab() const { return vocab_; }
  const std::vector<std::string>& targets() const { return targets_; }

  Tensor embedding;  // [V, embedding_dim]
  BiRecurrentLayer<GruCell> encoder;
  Dense projection;  // [2 * hidden] -> content_dim
  Dense decision;    // content_dim + turn dims -> |targets|
  bool trained = false;

 private:
  ExtractorConfig config_;
  PromptVocab vocab_;
  std::vector<std::string> targets_;
};

// GRU encoder whose final state is the code, and a teacher-forced GRU
// decoder started from the code with a softmax over the prompt vocabulary.
class PromptAutoencoder {
 public:
  PromptAutoencoder(const ExtractorConfig& config, PromptVocab vocab);

  Tensor code(Tape& tape, const std::vector<int>& ids) const;  // [1, hidden]
  // Per-step log-probabilities [n + 1, V] for inputs [<bos>, w...].
  Tensor decode_teacher_forced(Tape& tape, const Tensor& code, const std::vector<int>& ids) const;
  // Greedy free-running reconstruction, at most max_len words.
  std::vector<std::string> reconstruct(const std::vector<std::string>& prompt, int max_len = 20) const;

  ParamList parameters() const;
  static Index parameter_count(const ExtractorConfig& config, Index vocab_size);

  const ExtractorConfig& config() const { return config_; }
  const PromptVocab& vocab() const { return vocab_; }

  Tensor embedding;  // [V, embedding_dim]
  GruCell encoder;
  GruCell decoder;
  Dense output;  // hidden -> V
  bool trained = false;

 private:
  ExtractorConfig config_;
  PromptVocab vocab_;
};

struct BagExample {
  std::vector<std::string> prompt;
  std::vector<double> targets;
  int turn = 0;
};

std::vector<BagExample> bag_examples(const std::vector<const DialogTurnPair*>& pairs,
                                     const std::vector<std::string>& targets);

struct BagMetrics {
  double loss = 0.0;             // BCE summed over targets, averaged over examples
  double subset_accuracy = 0.0;  // exact match of the whole binary bag
  double micro_f1 = 0.0;
  double empty_bag_accuracy = 0.0;  // accuracy of always predicting the empty bag
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
};

BagMetrics evaluate_bag_predictor(const PromptBagPredictor& model, const std::vector<BagExample>& examples);
std::vector<EpochRecord> train_bag_predictor(PromptBagPredictor& model, const std::vector<BagExample>& train,
                                             const std::vector<BagExample>& heldout);

struct ReconstructionMetrics {
  double loss = 0.0;  // per-token negative log-likelihood
  double accuracy = 0.0;
  std::size_t tokens = 0;
};

ReconstructionMetrics evaluate_autoencoder(const PromptAutoencoder& model,
                                           const std::vector<std::vector<std::string>>& prompts);
std::vector<EpochRecord> train_autoencoder(PromptAutoencoder& model,
                                           const std::vector<std::vector<std::string>>& train,
                                           const std::vector<std::vector<std::string>>& heldout);

// A trained extractor of any kind, or the zero source.
class HistoryExtractor {
 public:
  static HistoryExtractor zero(Index hvector_dim = 100);
  static HistoryExtractor from(PromptBagPredictor predictor, ExtractorKind kind);
  static HistoryExtractor from(PromptAutoencoder autoencoder);

  ExtractorKind kind() const { return kind_; }
  Index hvector_dim() const { return hvector_dim_; }
  int max_turns() const;

  HVector extract(const std::vector<std::string>& prompt, int turn) const;
  // Content embedding recorded on `tape`, for joint training.
  Tensor content_on_tape(Tape& tape, const std::vector<std::string>& prompt) const;
  ParamList parameters() const;
  // The subset of parameters the content embedding depends on.
  ParamList content_parameters() const;

  const std::optional<PromptBagPredictor>& predictor() const { return predictor_; }
  const std::optional<PromptAutoencoder>& autoencoder() const { return autoencoder_; }

 private:
  ExtractorKind kind_ = ExtractorKind::none;
  Index hvector_dim_ = 100;
  std::optional<PromptBagPredictor> predictor_;
  std::optional<PromptAutoencoder> autoencoder_;
};

HVector extract_hvector(const PromptBagPredictor& model, const std::vector<std::string>& prompt, int turn,
                        int max_turns);
HVector extract_hvector(const PromptAutoencoder& model, const std::vector<std::string>& prompt, int turn,
                        int max_turns);

// Extractor checkpoints share the model checkpoint format; the manifest
// carries the kind, config, prompt vocabulary and target concepts.
Checkpoint extractor_checkpoint(const HistoryExtractor& extractor, const nlohmann::json& extra = {});
HistoryExtractor extractor_from_checkpoint(const Checkpoint& ckpt);

// The k tags with the most errors; ties go to the earlier inventory entry.
std::vector<std::string> select_freq_concepts(const std::vector<std::size_t>& error_counts,
                                              const std::vector<std::string>& inventory, std::size_t k = 4);

}  // namespace hvslu
