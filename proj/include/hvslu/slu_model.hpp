#pragma once

#include "hvslu/checkpoint.hpp"
#include "hvslu/codec.hpp"
#include "hvslu/history.hpp"
#include "hvslu/layers.hpp"
#include "hvslu/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hvslu {

struct ConvSpec {
  Index out_channels = 8;
  ops::Conv2dGeometry geometry;

  friend bool operator==(const ConvSpec& a, const ConvSpec& b) {
    const auto& x = a.geometry;
    const auto& y = b.geometry;
    return a.out_channels == b.out_channels && x.kernel_freq == y.kernel_freq &&
           x.kernel_time == y.kernel_time && x.stride_freq == y.stride_freq && x.stride_time == y.stride_time &&
           x.pad_freq == y.pad_freq && x.pad_time == y.pad_time;
  }
};

struct ModelConfig {
  std::string preset = "desk";
  Index feature_dim = 16;
  std::vector<ConvSpec> convs;
  Scalar relu_ceiling = 20.0;
  Index recurrent_layers = 2;
  Index hidden = 48;  // per direction
  bool batch_norm = false;
  bool injection = true;
  Index hvector_dim = 100;

  // 1 conv (5,5)/(2,2)/(2,2) with 8 channels over 16 features, 2 BiLSTM x 48.
  static ModelConfig desk();
  // 2 convs (41,11)/(2,2)/(20,5) with 32 channels over 81 spectrogram
  // bins, 5 BiLSTM x 800, batch norm between recurrent layers.
  static ModelConfig paper();
  static ModelConfig preset_named(const std::string& name);

  Index conv_output_freq() const;
  Index conv_feature_dim() const;  // channels x frequency after the conv stack
  Index output_time(Index input_time) const;
  Index recurrent_input_dim() const;  // what the first layer sees per frame

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Sum of the per-layer parameter formulas, independent of any model object.
Index closed_form_parameter_count(const ModelConfig& config, Index alphabet_size);

// Appends `h` to every frame: [T, F] -> [T, F + dim(h)].
Tensor inject_hvector(Tape& tape, const Tensor& frames, const Tensor& h);

class SignalToConceptModel {
 public:
  struct ConvLayer {
    Tensor weight;  // [Co, Ci, kf, kt]
    Tensor bias;    // [Co]
    ops::Conv2dGeometry geometry;
  };

  SignalToConceptModel(ModelConfig config, OutputAlphabet alphabet, std::uint64_t seed);

  // features [F, T], h [1, hvector_dim] (ignored without injection)
  // -> log-probabilities [T', |alphabet|].
  Tensor forward(Tape& tape, const Tensor& features, const Tensor& h, NormMode mode = NormMode::infer) const;
  Tensor forward(const Tensor& features, const HVector& h) const;

  // Frame features fed to the first recurrent layer, before injection.
  Tensor conv_frames(Tape& tape, const Tensor& features) const;

  ParamList parameters() const;
  ParamList buffers() const;
  Index parameter_count() const { return count_parameters(parameters()); }

  // Copy with independent storage.
  SignalToConceptModel clone() const;

  const ModelConfig& config() const { return config_; }
  const OutputAlphabet& alphabet() const { return alphabet_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<ConvLayer> convs;
  // norms[i] normalizes the input of recurrent layer i + 1.
  mutable std::vector<SeqBatchNorm> norms;
  std::vector<BiRecurrentLayer<LstmCell>> layers;
  // Extra first-layer input weights for the h-vector, [hvector_dim, 4H].
  Tensor hvec_weight_fwd;
  Tensor hvec_weight_bwd;
  Dense output;

 private:
  ModelConfig config_;
  OutputAlphabet alphabet_;
  std::uint64_t seed_ = 0;
};

struct DecodeResult {
  std::vector<int> symbols;
  DecodedTranscript transcript;
};

DecodeResult decode_utterance(const SignalToConceptModel& model, const Tensor& features, const HVector& h);

enum class Phase { direct, pretrain_zero, finetune, transfer_asr, transfer_sf };
std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

struct TrainingSchedule {
  Phase phase = Phase::direct;
  int epochs = 40;
  int batch_size = 4;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  // Backpropagate the SLU loss into the h-vector extractor.
  bool joint_extractor = false;

  static int default_epochs(Phase phase);
  nlohmann::json to_json() const;
};

// One training or evaluation example with its targets and history.
struct Utterance {
  std::string id;
  Tensor features;  // [F, T]
  std::vector<int> labels;
  HVector h;
  std::vector<std::string> prompt;
  int turn = 0;
  ConceptTaggedTranscript reference;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // NaN for epoch 0
  double dev_loss = 0.0;
  double dev_cer = 0.0;        // concept error rate; NaN without concepts
  double dev_char_error = 0.0;  // character error rate on the plain text
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t skipped_train = 0;  // infeasible CTC instances per epoch
  std::size_t skipped_dev = 0;
};

struct EvalSummary {
  double loss = 0.0;  // mean CTC loss over feasible utterances
  double cer = 0.0;
  double char_error = 0.0;
  std::size_t skipped = 0;
  std::vector<DecodedTranscript> hypotheses;
};

EvalSummary evaluate_model(const SignalToConceptModel& model, const std::vector<Utterance>& utterances);

// Mini-batch CTC training: utterances bucketed by length into batches whose
// order is shuffled every epoch, per-utterance losses averaged per batch.
// Epoch 0 of the log is the dev evaluation before any update. With
// `extractor` and joint training on, h-vectors are recomputed on the tape.
TrainResult train_model(SignalToConceptModel& model, const std::vector<Utterance>& train,
                        const std::vector<Utterance>& dev, const TrainingSchedule& schedule,
                        const HistoryExtractor* extractor = nullptr,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

// Rebuilds the output layer for `sf_alphabet`: every other parameter is
// copied unchanged, output columns of shared symbols are copied and the new
// ones freshly initialized.
SignalToConceptModel transfer_swap_softmax(const SignalToConceptModel& asr_model, const OutputAlphabet& sf_alphabet,
                                           std::uint64_t seed);

Checkpoint model_checkpoint(const SignalToConceptModel& model, Phase phase, const nlohmann::json& extra = {});
SignalToConceptModel model_from_checkpoint(const Checkpoint& ckpt);
// Throws unless `ckpt` holds a model of exactly this architecture.
void require_same_architecture(const Checkpoint& ckpt, const ModelConfig& config);

}  // namespace hvslu
