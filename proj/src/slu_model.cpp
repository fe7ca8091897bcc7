#include "hvslu/slu_model.hpp"

#include "hvslu/ctc.hpp"
#include "hvslu/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hvslu {

// ---------------------------------------------------------------- config

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.preset = "desk";
  c.feature_dim = 16;
  ConvSpec conv;
  conv.out_channels = 8;
  conv.geometry = {5, 5, 2, 2, 2, 2};
  c.convs = {conv};
  c.recurrent_layers = 2;
  c.hidden = 48;
  c.batch_norm = false;
  return c;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.preset = "paper";
  c.feature_dim = 81;
  ConvSpec conv;
  conv.out_channels = 32;
  conv.geometry = {41, 11, 2, 2, 20, 5};
  c.convs = {conv, conv};
  c.recurrent_layers = 5;
  c.hidden = 800;
  c.batch_norm = true;
  return c;
}

ModelConfig ModelConfig::preset_named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

Index ModelConfig::conv_output_freq() const {
  Index f = feature_dim;
  for (const auto& c : convs) f = c.geometry.out_freq(f);
  return f;
}

Index ModelConfig::conv_feature_dim() const {
  const Index channels = convs.empty() ? 1 : convs.back().out_channels;
  return channels * conv_output_freq();
}

Index ModelConfig::output_time(Index input_time) const {
  Index t = input_time;
  for (const auto& c : convs) t = c.geometry.out_time(t);
  return t;
}

Index ModelConfig::recurrent_input_dim() const {
  return conv_feature_dim() + (injection ? hvector_dim : 0);
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json conv_list = nlohmann::json::array();
  for (const auto& c : convs) {
    const auto& g = c.geometry;
    conv_list.push_back({{"out_channels", c.out_channels},
                         {"kernel", {g.kernel_freq, g.kernel_time}},
                         {"stride", {g.stride_freq, g.stride_time}},
                         {"padding", {g.pad_freq, g.pad_time}}});
  }
  return {{"preset", preset},
          {"feature_dim", feature_dim},
          {"convs", conv_list},
          {"relu_ceiling", relu_ceiling},
          {"recurrent_layers", recurrent_layers},
          {"cell", "lstm"},
          {"hidden", hidden},
          {"batch_norm", batch_norm},
          {"injection", injection},
          {"hvector_dim", hvector_dim}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.feature_dim = j.at("feature_dim").get<Index>();
  for (const auto& cj : j.at("convs")) {
    ConvSpec s;
    s.out_channels = cj.at("out_channels").get<Index>();
    s.geometry.kernel_freq = cj.at("kernel").at(0).get<Index>();
    s.geometry.kernel_time = cj.at("kernel").at(1).get<Index>();
    s.geometry.stride_freq = cj.at("stride").at(0).get<Index>();
    s.geometry.stride_time = cj.at("stride").at(1).get<Index>();
    s.geometry.pad_freq = cj.at("padding").at(0).get<Index>();
    s.geometry.pad_time = cj.at("padding").at(1).get<Index>();
    c.convs.push_back(s);
  }
  c.relu_ceiling = j.at("relu_ceiling").get<double>();
  c.recurrent_layers = j.at("recurrent_layers").get<Index>();
  c.hidden = j.at("hidden").get<Index>();
  c.batch_norm = j.at("batch_norm").get<bool>();
  c.injection = j.at("injection").get<bool>();
  c.hvector_dim = j.at("hvector_dim").get<Index>();
  return c;
}

Index closed_form_parameter_count(const ModelConfig& c, Index alphabet_size) {
  Index total = 0;
  Index channels = 1;
  for (const auto& conv : c.convs) {
    total += conv.out_channels * channels * conv.geometry.kernel_freq * conv.geometry.kernel_time + conv.out_channels;
    channels = conv.out_channels;
  }
  const Index h = c.hidden;
  total += 2 * 4 * h * (c.conv_feature_dim() + h + 1);
  if (c.injection) total += 2 * c.hvector_dim * 4 * h;
  for (Index layer = 1; layer < c.recurrent_layers; ++layer) {
    total += 2 * 4 * h * (2 * h + h + 1);
    if (c.batch_norm) total += 2 * (2 * h);
  }
  total += 2 * h * alphabet_size + alphabet_size;
  return total;
}

Tensor inject_hvector(Tape& tape, const Tensor& frames, const Tensor& h) {
  if (frames.rank() != 2 || h.rows() != 1 || h.rank() > 2) {
    throw ShapeError("inject_hvector: expected frames [T, F] and a single-row h, got " + shape_string(frames.shape()) +
                     " and " + shape_string(h.shape()));
  }
  return ops::concat_last_axis(tape, {frames, ops::broadcast_rows(tape, h, frames.rows())});
}

// ---------------------------------------------------------------- model

SignalToConceptModel::SignalToConceptModel(ModelConfig config, OutputAlphabet alphabet, std::uint64_t seed)
    : config_(std::move(config)), alphabet_(std::move(alphabet)), seed_(seed) {
  if (config_.feature_dim < 1 || config_.recurrent_layers < 1 || config_.hidden < 1 || config_.convs.empty()) {
    throw std::invalid_argument("model config needs features, at least one conv and one recurrent layer");
  }
  if (config_.injection && config_.hvector_dim < 1) throw std::invalid_argument("injection needs hvector_dim >= 1");
  if (config_.conv_output_freq() < 1) throw ShapeError("conv stack reduces the frequency axis below one bin");
  Rng rng(mix_seed(seed, 21));
  Index channels = 1;
  for (const auto& spec : config_.convs) {
    const auto& g = spec.geometry;
    const Index fan_in = channels * g.kernel_freq * g.kernel_time;
    convs.push_back({uniform_init({spec.out_channels, channels, g.kernel_freq, g.kernel_time}, fan_in, rng),
                     uniform_init({spec.out_channels}, fan_in, rng), g});
    channels = spec.out_channels;
  }
  const Index h = config_.hidden;
  const Index conv_dim = config_.conv_feature_dim();
  for (Index layer = 0; layer < config_.recurrent_layers; ++layer) {
    const Index in = layer == 0 ? conv_dim : 2 * h;
    if (layer > 0 && config_.batch_norm) norms.emplace_back(in);
    LstmCell fwd(in, h, rng);
    LstmCell bwd(in, h, rng);
    layers.emplace_back(std::move(fwd), std::move(bwd));
  }
  if (config_.injection) {
    const Index fan_in = config_.recurrent_input_dim();
    hvec_weight_fwd = uniform_init({config_.hvector_dim, 4 * h}, fan_in, rng);
    hvec_weight_bwd = uniform_init({config_.hvector_dim, 4 * h}, fan_in, rng);
  }
  output = Dense(2 * h, alphabet_.size(), rng);
  if (parameter_count() != closed_form_parameter_count(config_, alphabet_.size())) {
    throw std::logic_error("model parameter count disagrees with the closed form");
  }
}

Tensor SignalToConceptModel::conv_frames(Tape& tape, const Tensor& features) const {
  if (features.rank() != 2 || features.dim(0) != config_.feature_dim) {
    throw ShapeError("model expects features [" + std::to_string(config_.feature_dim) + ", T], got " +
                     shape_string(features.shape()));
  }
  const Index time = features.dim(1);
  if (config_.output_time(time) < 1) {
    throw ShapeError("utterance of " + std::to_string(time) + " frames leaves no frames after striding");
  }
  Tensor x = ops::reshape(tape, features, {1, config_.feature_dim, time});
  for (const auto& conv : convs) {
    x = ops::relu_clipped(tape, ops::conv2d(tape, x, conv.weight, conv.bias, conv.geometry), config_.relu_ceiling);
  }
  const Index c = x.dim(0), f = x.dim(1), t = x.dim(2);
  return ops::transpose(tape, ops::reshape(tape, x, {c * f, t}));
}

Tensor SignalToConceptModel::forward(Tape& tape, const Tensor& features, const Tensor& h, NormMode mode) const {
  Tensor frames = conv_frames(tape, features);
  Tensor hidden;
  for (std::size_t layer = 0; layer < layers.size(); ++layer) {
    const auto& bi = layers[layer];
    if (layer == 0) {
      // Same as running the cells on inject_hvector(frames, h): the frame
      // part and the h part of the input projection are computed apart.
      Tensor proj_f = bi.forward_cell.project_inputs(tape, frames);
      Tensor proj_b = bi.backward_cell.project_inputs(tape, frames);
      if (config_.injection) {
        if (!h.defined() || h.numel() != config_.hvector_dim) {
          throw ShapeError("h-vector of " + (h.defined() ? std::to_string(h.numel()) : std::string("no")) +
                           " dims for a model injecting " + std::to_string(config_.hvector_dim));
        }
        Tensor h_row = ops::reshape(tape, h, {1, config_.hvector_dim});
        proj_f = ops::add(tape, proj_f, ops::matmul(tape, h_row, hvec_weight_fwd));
        proj_b = ops::add(tape, proj_b, ops::matmul(tape, h_row, hvec_weight_bwd));
      }
      hidden = ops::concat_last_axis(tape, {lstm_sequence(tape, bi.forward_cell, proj_f, false),
                                            lstm_sequence(tape, bi.backward_cell, proj_b, true)});
    } else {
      if (config_.batch_norm) hidden = norms[layer - 1].forward(tape, hidden, mode);
      hidden = bi.run(tape, hidden);
    }
  }
  return ops::log_softmax_rows(tape, output.forward(tape, hidden));
}

Tensor SignalToConceptModel::forward(const Tensor& features, const HVector& h) const {
  Tape tape;
  tape.set_recording(false);
  return forward(tape, features, Tensor::row(h.values), NormMode::infer);
}

ParamList SignalToConceptModel::parameters() const {
  ParamList out;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    out.push_back({"conv" + std::to_string(i) + ".weight", convs[i].weight});
    out.push_back({"conv" + std::to_string(i) + ".bias", convs[i].bias});
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0 && config_.batch_norm) norms[i - 1].collect("norm" + std::to_string(i), out);
    layers[i].collect("rnn" + std::to_string(i), out);
  }
  if (config_.injection) {
    out.push_back({"rnn0.fwd.hvec_weight", hvec_weight_fwd});
    out.push_back({"rnn0.bwd.hvec_weight", hvec_weight_bwd});
  }
  output.collect("output", out);
  return out;
}

ParamList SignalToConceptModel::buffers() const {
  ParamList out;
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i].collect_buffers("norm" + std::to_string(i + 1), out);
  return out;
}

SignalToConceptModel SignalToConceptModel::clone() const {
  SignalToConceptModel copy(*this);
  auto fresh = [](Tensor& t) {
    if (t.defined()) t = Tensor(t.shape(), t.value(), t.requires_grad());
  };
  for (auto& c : copy.convs) {
    fresh(c.weight);
    fresh(c.bias);
  }
  for (auto& n : copy.norms) {
    fresh(n.gamma);
    fresh(n.beta);
    fresh(n.running_mean);
    fresh(n.running_var);
  }
  for (auto& l : copy.layers) {
    for (LstmCell* cell : {&l.forward_cell, &l.backward_cell}) {
      fresh(cell->input_weight);
      fresh(cell->recurrent_weight);
      fresh(cell->bias);
    }
  }
  fresh(copy.hvec_weight_fwd);
  fresh(copy.hvec_weight_bwd);
  fresh(copy.output.weight);
  fresh(copy.output.bias);
  return copy;
}

DecodeResult decode_utterance(const SignalToConceptModel& model, const Tensor& features, const HVector& h) {
  Tensor lp = model.forward(features, h);
  DecodeResult r;
  r.symbols = ctc::greedy_decode(lp.value(), model.alphabet().blank_id());
  r.transcript = decode_symbols(model.alphabet(), r.symbols);
  return r;
}

// ---------------------------------------------------------------- schedules

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::direct: return "direct";
    case Phase::pretrain_zero: return "pretrain_zero";
    case Phase::finetune: return "finetune";
    case Phase::transfer_asr: return "transfer_asr";
    case Phase::transfer_sf: return "transfer_sf";
  }
  return "direct";
}

Phase parse_phase(const std::string& text) {
  for (Phase p : {Phase::direct, Phase::pretrain_zero, Phase::finetune, Phase::transfer_asr, Phase::transfer_sf}) {
    if (to_string(p) == text) return p;
  }
  throw std::invalid_argument("unknown phase '" + text +
                              "' (expected direct, pretrain_zero, finetune, transfer_asr or transfer_sf)");
}

int TrainingSchedule::default_epochs(Phase phase) {
  switch (phase) {
    case Phase::pretrain_zero: return 30;
    case Phase::finetune: return 30;
    default: return 40;
  }
}

nlohmann::json TrainingSchedule::to_json() const {
  return {{"phase", to_string(phase)},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"optimizer", to_string(optimizer.kind)},
          {"learning_rate", optimizer.learning_rate},
          {"clip_norm", optimizer.clip_norm},
          {"seed", seed},
          {"joint_extractor", joint_extractor}};
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool feasible(const SignalToConceptModel& model, const Utterance& u) {
  return ctc::required_frames(u.labels) <= model.config().output_time(u.features.dim(1));
}

double char_error_rate(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  std::vector<std::vector<char>> r, h;
  for (const auto& s : refs) r.emplace_back(s.begin(), s.end());
  for (const auto& s : hyps) h.emplace_back(s.begin(), s.end());
  const auto counts = eval::pooled_counts(r, h);
  return counts.reference_count == 0 ? kNaN : counts.rate();
}

Tensor hvector_on_tape(Tape& tape, const HistoryExtractor& extractor, const Utterance& u) {
  Tensor content = extractor.content_on_tape(tape, u.prompt);
  const Index dims = extractor.hvector_dim() - content.numel();
  Tensor turn = Tensor::from_matrix(encode_turn_dims(u.turn, extractor.max_turns(), dims));
  return ops::concat_last_axis(tape, {content, turn});
}

}  // namespace

EvalSummary evaluate_model(const SignalToConceptModel& model, const std::vector<Utterance>& utterances) {
  EvalSummary s;
  double loss = 0.0;
  std::size_t counted = 0;
  std::vector<eval::TagSequence> ref_tags, hyp_tags;
  std::vector<std::string> ref_plain, hyp_plain;
  std::size_t ref_concepts = 0;
  for (const auto& u : utterances) {
    Tensor lp = model.forward(u.features, u.h);
    if (feasible(model, u)) {
      loss += ctc::forward_backward(lp.value(), u.labels, model.alphabet().blank_id()).loss;
      ++counted;
    } else {
      ++s.skipped;
    }
    const auto symbols = ctc::greedy_decode(lp.value(), model.alphabet().blank_id());
    DecodedTranscript d = decode_symbols(model.alphabet(), symbols);
    ref_tags.push_back(u.reference.tags());
    hyp_tags.push_back(d.tags());
    ref_concepts += u.reference.concepts.size();
    ref_plain.push_back(u.reference.plain);
    hyp_plain.push_back(d.plain);
    s.hypotheses.push_back(std::move(d));
  }
  s.loss = counted > 0 ? loss / static_cast<double>(counted) : kNaN;
  s.cer = model.alphabet().mode() == AlphabetMode::slu && ref_concepts > 0 ? eval::cer(ref_tags, hyp_tags) : kNaN;
  s.char_error = char_error_rate(ref_plain, hyp_plain);
  return s;
}

TrainResult train_model(SignalToConceptModel& model, const std::vector<Utterance>& train,
                        const std::vector<Utterance>& dev, const TrainingSchedule& schedule,
                        const HistoryExtractor* extractor,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("train_model: empty training set");
  if (schedule.batch_size < 1 || schedule.epochs < 0) {
    throw std::invalid_argument("train_model: batch_size >= 1 and epochs >= 0 required");
  }
  const bool joint = schedule.joint_extractor && extractor != nullptr && extractor->kind() != ExtractorKind::none;
  TrainResult result;

  // Bucket feasible utterances by input length.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (feasible(model, train[i])) {
      usable.push_back(i);
    } else {
      ++result.skipped_train;
    }
  }
  if (usable.empty()) throw std::invalid_argument("train_model: no utterance is feasible for CTC");
  std::stable_sort(usable.begin(), usable.end(), [&](std::size_t a, std::size_t b) {
    return train[a].features.dim(1) < train[b].features.dim(1);
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < usable.size(); start += static_cast<std::size_t>(schedule.batch_size)) {
    const std::size_t end = std::min(usable.size(), start + static_cast<std::size_t>(schedule.batch_size));
    batches.emplace_back(usable.begin() + static_cast<std::ptrdiff_t>(start),
                         usable.begin() + static_cast<std::ptrdiff_t>(end));
  }

  std::vector<Tensor> params = tensors_of(model.parameters());
  if (joint) {
    for (const auto& t : tensors_of(extractor->content_parameters())) params.push_back(t);
  }
  Optimizer opt(schedule.optimizer, params);

  auto log_epoch = [&](int epoch, double train_loss) {
    EvalSummary dev_eval = evaluate_model(model, dev);
    result.skipped_dev = dev_eval.skipped;
    result.log.push_back({epoch, train_loss, dev_eval.loss, dev_eval.cer, dev_eval.char_error});
    if (on_epoch) on_epoch(result.log.back());
  };
  log_epoch(0, kNaN);

  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(schedule.seed, 5000 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t b : order) {
      const auto& batch = batches[b];
      const double weight = 1.0 / static_cast<double>(batch.size());
      for (std::size_t i : batch) {
        const Utterance& u = train[i];
        Tape tape;
        Tensor h = joint ? hvector_on_tape(tape, *extractor, u) : Tensor::row(u.h.values);
        Tensor lp = model.forward(tape, u.features, h, NormMode::train);
        Tensor loss = ctc::ctc_loss(tape, lp, u.labels, model.alphabet().blank_id());
        loss_sum += loss.item();
        tape.backward(ops::scale(tape, loss, weight));
      }
      opt.step();
    }
    log_epoch(epoch, loss_sum / static_cast<double>(usable.size()));
  }
  return result;
}

SignalToConceptModel transfer_swap_softmax(const SignalToConceptModel& asr_model, const OutputAlphabet& sf_alphabet,
                                           std::uint64_t seed) {
  if (!asr_model.alphabet().is_prefix_of(sf_alphabet)) {
    throw std::invalid_argument("transfer: the source alphabet is not a prefix of the target alphabet");
  }
  SignalToConceptModel copy = asr_model.clone();
  SignalToConceptModel target(asr_model.config(), sf_alphabet, seed);
  // Adopt every non-output parameter of the source.
  target.convs = copy.convs;
  target.norms = copy.norms;
  target.layers = copy.layers;
  target.hvec_weight_fwd = copy.hvec_weight_fwd;
  target.hvec_weight_bwd = copy.hvec_weight_bwd;

  const Index in = asr_model.output.input_dim();
  const Index shared = asr_model.alphabet().size();
  const Index width = sf_alphabet.size();
  Rng rng(mix_seed(seed, 77));
  Tensor fresh = uniform_init({in, width}, in, rng);
  Tensor fresh_bias = uniform_init({width}, in, rng);
  fresh.mutable_value().leftCols(shared) = asr_model.output.weight.value();
  fresh_bias.mutable_value().leftCols(shared) = asr_model.output.bias.value();
  fresh.set_requires_grad(true);
  fresh_bias.set_requires_grad(true);
  target.output.weight = fresh;
  target.output.bias = fresh_bias;
  return target;
}

Checkpoint model_checkpoint(const SignalToConceptModel& model, Phase phase, const nlohmann::json& extra) {
  Checkpoint ckpt;
  ckpt.manifest = {{"format", kCheckpointMagic},
                   {"kind", "slu_model"},
                   {"architecture", model.config().to_json()},
                   {"alphabet", model.alphabet().listing()},
                   {"seed", model.seed()},
                   {"phase", to_string(phase)}};
  if (!extra.is_null()) ckpt.manifest["info"] = extra;
  ckpt.add(model.parameters());
  ckpt.add(model.buffers());
  return ckpt;
}

void require_same_architecture(const Checkpoint& ckpt, const ModelConfig& config) {
  if (ckpt.manifest.value("kind", "") != "slu_model") throw CheckpointError("checkpoint does not hold an SLU model");
  const ModelConfig stored = ModelConfig::from_json(ckpt.manifest.at("architecture"));
  if (!(stored == config)) {
    throw CheckpointError("architecture mismatch: checkpoint has " + stored.to_json().dump() + ", expected " +
                          config.to_json().dump());
  }
}

SignalToConceptModel model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.manifest.value("kind", "") != "slu_model") throw CheckpointError("checkpoint does not hold an SLU model");
  const ModelConfig config = ModelConfig::from_json(ckpt.manifest.at("architecture"));
  const OutputAlphabet alphabet =
      OutputAlphabet::from_listing(ckpt.manifest.at("alphabet").get<std::vector<std::string>>());
  SignalToConceptModel model(config, alphabet, ckpt.manifest.at("seed").get<std::uint64_t>());
  ckpt.restore(model.parameters());
  ckpt.restore(model.buffers());
  return model;
}

}  // namespace hvslu
