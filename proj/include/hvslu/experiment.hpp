#pragma once

#include "hvslu/corpus.hpp"
#include "hvslu/features.hpp"
#include "hvslu/history.hpp"
#include "hvslu/slu_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvslu {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "key = value" experiment file. Blank lines and lines starting with
// '#' are ignored; unknown keys are errors.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string preset = "desk";
  ExtractorKind extractor = ExtractorKind::none;
  std::string out_dir = "runs/default";

  // corpus
  std::uint64_t corpus_seed = 1;
  int n_dialogs = 200;
  double rho = 0.8;
  int min_dialog_turns = 2;
  int max_dialog_turns = 6;

  // features
  std::uint64_t feature_seed = 7;
  double noise_sigma = 0.1;

  // extractors
  int extractor_epochs = 30;
  int extractor_batch_size = 4;
  double extractor_learning_rate = 3e-3;
  int freq_k = 4;

  // slu training
  int batch_size = 4;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  int epochs_direct = 40;
  int epochs_pretrain = 30;
  int epochs_finetune = 30;
  int epochs_asr = 40;
  int epochs_sf = 40;
  bool joint_extractor = false;

  static ExperimentConfig parse(const std::string& text, const std::string& source = "config");
  static ExperimentConfig load(const std::filesystem::path& path);
  // Resolved key = value listing, one per line in key order.
  std::string to_text() const;

  GeneratorConfig generator() const;
  FeatureSynthConfig features() const;
  ExtractorConfig extractor_config() const;
  TrainingSchedule schedule(Phase phase) const;
  ModelConfig model() const;
};

// Features, targets and h-vectors for one split. Slot-filling alphabets get
// tagged targets, ASR alphabets the plain characters.
std::vector<Utterance> build_utterances(const std::vector<const DialogTurnPair*>& pairs,
                                        const FeatureSynthesizer& synth, const OutputAlphabet& alphabet,
                                        const HistoryExtractor& extractor);

OutputAlphabet slu_alphabet(const GeneratorConfig& config);
OutputAlphabet asr_alphabet(const GeneratorConfig& config);

// Trains the extractor of `kind` on the train split of `corpus`.
// supervised-freq needs `freq_targets`.
struct ExtractorRun {
  HistoryExtractor extractor;
  std::vector<EpochRecord> log;
  nlohmann::json metrics;
};
ExtractorRun train_extractor(const Corpus& corpus, ExtractorKind kind, const ExtractorConfig& config,
                             const std::vector<std::string>& freq_targets = {});

}  // namespace hvslu
