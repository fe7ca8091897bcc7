#include "hvslu/history.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace hvslu {

// ---------------------------------------------------------------- vocab

PromptVocab::PromptVocab() : words_{"<unk>", "<bos>", "<eos>"} {
  for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
}

PromptVocab PromptVocab::build(const std::vector<std::vector<std::string>>& prompts) {
  std::set<std::string> seen;
  for (const auto& p : prompts) seen.insert(p.begin(), p.end());
  return from_words({seen.begin(), seen.end()});
}

PromptVocab PromptVocab::from_words(const std::vector<std::string>& words) {
  PromptVocab v;
  for (const auto& w : words) {
    if (v.index_.contains(w)) continue;
    v.index_[w] = static_cast<int>(v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

int PromptVocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> PromptVocab::encode(const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

// ---------------------------------------------------------------- h-vectors

Index turn_dims_for(Index hvector_dim) {
  return std::max<Index>(1, static_cast<Index>(std::floor(0.02 * static_cast<double>(hvector_dim))));
}

RowVector encode_turn_dims(int turn, int max_turns, Index dims) {
  if (turn < 0) throw std::invalid_argument("encode_turn_dims: negative turn " + std::to_string(turn));
  if (max_turns < 1) throw std::invalid_argument("encode_turn_dims: max_turns must be >= 1");
  if (dims < 1) throw std::invalid_argument("encode_turn_dims: dims must be >= 1");
  RowVector out = RowVector::Zero(dims);
  out(0) = std::min(static_cast<double>(turn) / static_cast<double>(max_turns), 1.0);
  if (dims > 1) out(1) = turn == 0 ? 1.0 : 0.0;
  return out;
}

HVector zero_hvector(Index dim) {
  return HVector{RowVector::Zero(dim), dim - turn_dims_for(dim)};
}

HVector make_hvector(const RowVector& content, int turn, int max_turns, Index dim) {
  const Index content_dim = content.size();
  if (content_dim != dim - turn_dims_for(dim)) {
    throw std::invalid_argument("make_hvector: " + std::to_string(content_dim) + " content dims do not fit a " +
                                std::to_string(dim) + "-dim h-vector");
  }
  HVector h{RowVector::Zero(dim), content_dim};
  h.values.head(content_dim) = content;
  h.values.tail(dim - content_dim) = encode_turn_dims(turn, max_turns, dim - content_dim);
  return h;
}

std::string to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::none: return "none";
    case ExtractorKind::unsupervised: return "unsupervised";
    case ExtractorKind::supervised_freq: return "supervised-freq";
    case ExtractorKind::supervised_all: return "supervised-all";
  }
  return "none";
}

ExtractorKind parse_extractor_kind(const std::string& text) {
  if (text == "none" || text == "zero") return ExtractorKind::none;
  if (text == "unsupervised") return ExtractorKind::unsupervised;
  if (text == "supervised-freq") return ExtractorKind::supervised_freq;
  if (text == "supervised-all") return ExtractorKind::supervised_all;
  throw std::invalid_argument("unknown extractor type '" + text +
                              "' (expected none, unsupervised, supervised-freq or supervised-all)");
}

nlohmann::json ExtractorConfig::to_json() const {
  return {{"hvector_dim", hvector_dim},
          {"embedding_dim", embedding_dim},
          {"predictor_hidden", predictor_hidden},
          {"autoencoder_hidden", autoencoder_hidden},
          {"max_turns", max_turns},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"optimizer", to_string(optimizer.kind)},
          {"learning_rate", optimizer.learning_rate},
          {"clip_norm", optimizer.clip_norm},
          {"seed", seed}};
}

ExtractorConfig ExtractorConfig::from_json(const nlohmann::json& j) {
  ExtractorConfig c;
  c.hvector_dim = j.at("hvector_dim").get<Index>();
  c.embedding_dim = j.at("embedding_dim").get<Index>();
  c.predictor_hidden = j.at("predictor_hidden").get<Index>();
  c.autoencoder_hidden = j.at("autoencoder_hidden").get<Index>();
  c.max_turns = j.at("max_turns").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.optimizer.kind = parse_optimizer_kind(j.at("optimizer").get<std::string>());
  c.optimizer.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer.clip_norm = j.at("clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

void check_config(const ExtractorConfig& c) {
  if (c.hvector_dim < 2) throw std::invalid_argument("hvector_dim must be at least 2");
  if (c.embedding_dim < 1 || c.predictor_hidden < 1 || c.autoencoder_hidden < 1) {
    throw std::invalid_argument("extractor widths must be positive");
  }
  if (c.max_turns < 1) throw std::invalid_argument("max_turns must be >= 1");
  if (c.epochs < 0 || c.batch_size < 1) throw std::invalid_argument("epochs >= 0 and batch_size >= 1 required");
}

Tensor turn_row(const ExtractorConfig& c, int turn) {
  return Tensor::from_matrix(encode_turn_dims(turn, c.max_turns, turn_dims_for(c.hvector_dim)));
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

std::vector<Tensor> all_tensors(const ParamList& params) { return tensors_of(params); }

}  // namespace

// ---------------------------------------------------------------- bag predictor

PromptBagPredictor::PromptBagPredictor(const ExtractorConfig& config, PromptVocab vocab,
                                       std::vector<std::string> targets)
    : config_(config), vocab_(std::move(vocab)), targets_(std::move(targets)) {
  check_config(config_);
  if (targets_.empty()) throw std::invalid_argument("bag predictor needs at least one target concept");
  Rng rng(mix_seed(config_.seed, 11));
  embedding = uniform_init({vocab_.size(), config_.embedding_dim}, config_.embedding_dim, rng);
  GruCell fwd(config_.embedding_dim, config_.predictor_hidden, rng);
  GruCell bwd(config_.embedding_dim, config_.predictor_hidden, rng);
  encoder = BiRecurrentLayer<GruCell>(std::move(fwd), std::move(bwd));
  projection = Dense(2 * config_.predictor_hidden, config_.content_dim(), rng);
  decision = Dense(config_.hvector_dim, static_cast<Index>(targets_.size()), rng);
  if (count_parameters(parameters()) !=
      parameter_count(config_, vocab_.size(), static_cast<Index>(targets_.size()))) {
    throw std::logic_error("bag predictor parameter count mismatch");
  }
}

Tensor PromptBagPredictor::content(Tape& tape, const std::vector<int>& ids) const {
  if (ids.empty()) throw std::invalid_argument("bag predictor: empty prompt");
  Tensor xs = ops::gather_rows(tape, embedding, ids);
  auto [fwd, bwd] = encoder.run_summary(tape, xs);
  Tensor summary = ops::concat_last_axis(tape, {fwd, bwd});
  return ops::tanh(tape, projection.forward(tape, summary));
}

Tensor PromptBagPredictor::logits(Tape& tape, const std::vector<int>& ids, int turn) const {
  Tensor c = content(tape, ids);
  return decision.forward(tape, ops::concat_last_axis(tape, {c, turn_row(config_, turn)}));
}

std::vector<std::uint8_t> PromptBagPredictor::predict(const std::vector<std::string>& prompt, int turn) const {
  Tape tape;
  tape.set_recording(false);
  Tensor z = logits(tape, vocab_.encode(prompt), turn);
  std::vector<std::uint8_t> bits;
  for (Index k = 0; k < z.numel(); ++k) bits.push_back(z.value()(0, k) > 0.0 ? 1 : 0);
  return bits;
}

ParamList PromptBagPredictor::parameters() const {
  ParamList out;
  out.push_back({"embedding", embedding});
  encoder.collect("encoder", out);
  projection.collect("projection", out);
  decision.collect("decision", out);
  return out;
}

Index PromptBagPredictor::parameter_count(const ExtractorConfig& c, Index vocab_size, Index n_targets) {
  return vocab_size * c.embedding_dim + 2 * GruCell::parameter_count(c.embedding_dim, c.predictor_hidden) +
         Dense::parameter_count(2 * c.predictor_hidden, c.content_dim()) +
         Dense::parameter_count(c.hvector_dim, n_targets);
}

std::vector<BagExample> bag_examples(const std::vector<const DialogTurnPair*>& pairs,
                                     const std::vector<std::string>& targets) {
  std::vector<BagExample> out;
  out.reserve(pairs.size());
  for (const auto* p : pairs) {
    // targets may be a subset of the inventory; other tags are ignored here
    const auto tags = p->user.tags();
    std::vector<double> bits;
    bits.reserve(targets.size());
    for (const auto& t : targets) bits.push_back(std::find(tags.begin(), tags.end(), t) != tags.end() ? 1.0 : 0.0);
    out.push_back({p->system_prompt, std::move(bits), p->turn_index});
  }
  return out;
}

BagMetrics evaluate_bag_predictor(const PromptBagPredictor& model, const std::vector<BagExample>& examples) {
  BagMetrics m;
  if (examples.empty()) return m;
  Tape tape;
  tape.set_recording(false);
  std::size_t exact = 0, empty_exact = 0, tp = 0, fp = 0, fn = 0;
  for (const auto& ex : examples) {
    if (ex.targets.size() != model.targets().size()) {
      throw std::invalid_argument("bag example has " + std::to_string(ex.targets.size()) + " targets, model has " +
                                  std::to_string(model.targets().size()));
    }
    Tensor z = model.logits(tape, model.vocab().encode(ex.prompt), ex.turn);
    m.loss += ops::bce_with_logits(tape, z, ex.targets).item();
    bool all = true, empty = true;
    for (std::size_t k = 0; k < ex.targets.size(); ++k) {
      const bool pred = z.value()(0, static_cast<Index>(k)) > 0.0;
      const bool gold = ex.targets[k] > 0.5;
      all = all && pred == gold;
      empty = empty && !gold;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
    exact += all;
    empty_exact += empty;
  }
  const auto n = static_cast<double>(examples.size());
  m.loss /= n;
  m.subset_accuracy = static_cast<double>(exact) / n;
  m.empty_bag_accuracy = static_cast<double>(empty_exact) / n;
  const double denom = static_cast<double>(2 * tp + fp + fn);
  m.micro_f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 1.0;
  return m;
}

std::vector<EpochRecord> train_bag_predictor(PromptBagPredictor& model, const std::vector<BagExample>& train,
                                             const std::vector<BagExample>& heldout) {
  if (train.empty()) throw std::invalid_argument("train_bag_predictor: empty training set");
  for (const auto& ex : train) {
    if (ex.targets.size() != model.targets().size()) {
      throw std::invalid_argument("train_bag_predictor: target length " + std::to_string(ex.targets.size()) +
                                  " does not match " + std::to_string(model.targets().size()));
    }
  }
  const ExtractorConfig& c = model.config();
  Optimizer opt(c.optimizer, all_tensors(model.parameters()));
  std::vector<EpochRecord> log;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    const auto order = shuffled_order(train.size(), c.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(c.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(c.batch_size));
      Tape tape;
      std::vector<Tensor> losses;
      for (std::size_t i = start; i < end; ++i) {
        const BagExample& ex = train[order[i]];
        losses.push_back(
            ops::bce_with_logits(tape, model.logits(tape, model.vocab().encode(ex.prompt), ex.turn), ex.targets));
      }
      Tensor total = ops::sum(tape, ops::stack_rows(tape, losses));
      tape.backward(ops::scale(tape, total, 1.0 / static_cast<double>(end - start)));
      opt.step();
    }
    model.trained = true;
    const BagMetrics tr = evaluate_bag_predictor(model, train);
    const BagMetrics ho = evaluate_bag_predictor(model, heldout);
    log.push_back({epoch, tr.loss, ho.loss, tr.subset_accuracy, ho.subset_accuracy});
  }
  model.trained = true;
  return log;
}

// ---------------------------------------------------------------- autoencoder

PromptAutoencoder::PromptAutoencoder(const ExtractorConfig& config, PromptVocab vocab)
    : config_(config), vocab_(std::move(vocab)) {
  check_config(config_);
  if (config_.autoencoder_hidden != config_.content_dim()) {
    throw std::invalid_argument("autoencoder hidden width " + std::to_string(config_.autoencoder_hidden) +
                                " must equal the h-vector content width " + std::to_string(config_.content_dim()));
  }
  Rng rng(mix_seed(config_.seed, 12));
  embedding = uniform_init({vocab_.size(), config_.embedding_dim}, config_.embedding_dim, rng);
  encoder = GruCell(config_.embedding_dim, config_.autoencoder_hidden, rng);
  decoder = GruCell(config_.embedding_dim, config_.autoencoder_hidden, rng);
  output = Dense(config_.autoencoder_hidden, vocab_.size(), rng);
}

Tensor PromptAutoencoder::code(Tape& tape, const std::vector<int>& ids) const {
  if (ids.empty()) throw std::invalid_argument("autoencoder: empty prompt");
  Tensor xs = ops::gather_rows(tape, embedding, ids);
  return run_forward(tape, encoder, xs).second.h;
}

Tensor PromptAutoencoder::decode_teacher_forced(Tape& tape, const Tensor& code, const std::vector<int>& ids) const {
  std::vector<int> inputs{PromptVocab::kBos};
  inputs.insert(inputs.end(), ids.begin(), ids.end());
  Tensor projected = decoder.project_inputs(tape, ops::gather_rows(tape, embedding, inputs));
  std::vector<Tensor> states;
  Tensor h = code;
  for (Index t = 0; t < projected.rows(); ++t) {
    h = decoder.step_projected(tape, ops::slice_rows(tape, projected, t, t + 1), h);
    states.push_back(h);
  }
  return ops::log_softmax_rows(tape, output.forward(tape, ops::stack_rows(tape, states)));
}

std::vector<std::string> PromptAutoencoder::reconstruct(const std::vector<std::string>& prompt, int max_len) const {
  Tape tape;
  tape.set_recording(false);
  Tensor h = code(tape, vocab_.encode(prompt));
  std::vector<std::string> out;
  int prev = PromptVocab::kBos;
  for (int step = 0; step < max_len; ++step) {
    const std::vector<int> one{prev};
    Tensor x = ops::gather_rows(tape, embedding, one);
    h = decoder.step(tape, x, h);
    Tensor lp = output.forward(tape, h);
    Index best = 0;
    lp.value().row(0).maxCoeff(&best);
    if (best == PromptVocab::kEos) break;
    out.push_back(vocab_.word(static_cast<int>(best)));
    prev = static_cast<int>(best);
  }
  return out;
}

ParamList PromptAutoencoder::parameters() const {
  ParamList out;
  out.push_back({"embedding", embedding});
  encoder.collect("encoder", out);
  decoder.collect("decoder", out);
  output.collect("output", out);
  return out;
}

Index PromptAutoencoder::parameter_count(const ExtractorConfig& c, Index vocab_size) {
  return vocab_size * c.embedding_dim + 2 * GruCell::parameter_count(c.embedding_dim, c.autoencoder_hidden) +
         Dense::parameter_count(c.autoencoder_hidden, vocab_size);
}

namespace {

std::vector<int> shifted_targets(const std::vector<int>& ids) {
  std::vector<int> targets(ids);
  targets.push_back(PromptVocab::kEos);
  return targets;
}

}  // namespace

ReconstructionMetrics evaluate_autoencoder(const PromptAutoencoder& model,
                                           const std::vector<std::vector<std::string>>& prompts) {
  ReconstructionMetrics m;
  Tape tape;
  tape.set_recording(false);
  std::size_t correct = 0;
  for (const auto& p : prompts) {
    const auto ids = model.vocab().encode(p);
    Tensor lp = model.decode_teacher_forced(tape, model.code(tape, ids), ids);
    const auto targets = shifted_targets(ids);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      Index best = 0;
      lp.value().row(static_cast<Index>(t)).maxCoeff(&best);
      correct += best == targets[t];
      m.loss -= lp.value()(static_cast<Index>(t), targets[t]);
    }
    m.tokens += targets.size();
  }
  if (m.tokens > 0) {
    m.loss /= static_cast<double>(m.tokens);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.tokens);
  }
  return m;
}

std::vector<EpochRecord> train_autoencoder(PromptAutoencoder& model,
                                           const std::vector<std::vector<std::string>>& train,
                                           const std::vector<std::vector<std::string>>& heldout) {
  if (train.empty()) throw std::invalid_argument("train_autoencoder: empty corpus");
  const ExtractorConfig& c = model.config();
  Optimizer opt(c.optimizer, all_tensors(model.parameters()));
  std::vector<EpochRecord> log;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    const auto order = shuffled_order(train.size(), c.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(c.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(c.batch_size));
      Tape tape;
      std::vector<Tensor> losses;
      std::size_t tokens = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto ids = model.vocab().encode(train[order[i]]);
        const auto targets = shifted_targets(ids);
        Tensor lp = model.decode_teacher_forced(tape, model.code(tape, ids), ids);
        losses.push_back(ops::nll_rows(tape, lp, targets));
        tokens += targets.size();
      }
      Tensor total = ops::sum(tape, ops::stack_rows(tape, losses));
      tape.backward(ops::scale(tape, total, 1.0 / static_cast<double>(tokens)));
      opt.step();
    }
    model.trained = true;
    const ReconstructionMetrics tr = evaluate_autoencoder(model, train);
    const ReconstructionMetrics ho = evaluate_autoencoder(model, heldout);
    log.push_back({epoch, tr.loss, ho.loss, tr.accuracy, ho.accuracy});
  }
  model.trained = true;
  return log;
}

// ---------------------------------------------------------------- extraction

HVector extract_hvector(const PromptBagPredictor& model, const std::vector<std::string>& prompt, int turn,
                        int max_turns) {
  if (!model.trained) throw std::logic_error("extract_hvector: bag predictor has not been trained");
  Tape tape;
  tape.set_recording(false);
  Tensor c = model.content(tape, model.vocab().encode(prompt));
  return make_hvector(c.value().row(0), turn, max_turns, model.config().hvector_dim);
}

HVector extract_hvector(const PromptAutoencoder& model, const std::vector<std::string>& prompt, int turn,
                        int max_turns) {
  if (!model.trained) throw std::logic_error("extract_hvector: autoencoder has not been trained");
  Tape tape;
  tape.set_recording(false);
  Tensor c = model.code(tape, model.vocab().encode(prompt));
  return make_hvector(c.value().row(0), turn, max_turns, model.config().hvector_dim);
}

HistoryExtractor HistoryExtractor::zero(Index hvector_dim) {
  HistoryExtractor e;
  e.kind_ = ExtractorKind::none;
  e.hvector_dim_ = hvector_dim;
  return e;
}

HistoryExtractor HistoryExtractor::from(PromptBagPredictor predictor, ExtractorKind kind) {
  if (kind != ExtractorKind::supervised_all && kind != ExtractorKind::supervised_freq) {
    throw std::invalid_argument("a bag predictor backs only supervised extractor kinds");
  }
  if (!predictor.trained) throw std::logic_error("history extractor built from an untrained bag predictor");
  HistoryExtractor e;
  e.kind_ = kind;
  e.hvector_dim_ = predictor.config().hvector_dim;
  e.predictor_.emplace(std::move(predictor));
  return e;
}

HistoryExtractor HistoryExtractor::from(PromptAutoencoder autoencoder) {
  if (!autoencoder.trained) throw std::logic_error("history extractor built from an untrained autoencoder");
  HistoryExtractor e;
  e.kind_ = ExtractorKind::unsupervised;
  e.hvector_dim_ = autoencoder.config().hvector_dim;
  e.autoencoder_.emplace(std::move(autoencoder));
  return e;
}

int HistoryExtractor::max_turns() const {
  if (predictor_) return predictor_->config().max_turns;
  if (autoencoder_) return autoencoder_->config().max_turns;
  return ExtractorConfig{}.max_turns;
}

HVector HistoryExtractor::extract(const std::vector<std::string>& prompt, int turn) const {
  if (predictor_) return extract_hvector(*predictor_, prompt, turn, max_turns());
  if (autoencoder_) return extract_hvector(*autoencoder_, prompt, turn, max_turns());
  return zero_hvector(hvector_dim_);
}

Tensor HistoryExtractor::content_on_tape(Tape& tape, const std::vector<std::string>& prompt) const {
  if (predictor_) return predictor_->content(tape, predictor_->vocab().encode(prompt));
  if (autoencoder_) return autoencoder_->code(tape, autoencoder_->vocab().encode(prompt));
  return Tensor::zeros({1, hvector_dim_ - turn_dims_for(hvector_dim_)});
}

ParamList HistoryExtractor::parameters() const {
  if (predictor_) return predictor_->parameters();
  if (autoencoder_) return autoencoder_->parameters();
  return {};
}

Checkpoint extractor_checkpoint(const HistoryExtractor& extractor, const nlohmann::json& extra) {
  Checkpoint ckpt;
  nlohmann::json m = {{"format", kCheckpointMagic}, {"kind", "extractor"}, {"type", to_string(extractor.kind())}};
  if (extractor.predictor()) {
    m["config"] = extractor.predictor()->config().to_json();
    m["vocab"] = extractor.predictor()->vocab().words();
    m["targets"] = extractor.predictor()->targets();
  } else if (extractor.autoencoder()) {
    m["config"] = extractor.autoencoder()->config().to_json();
    m["vocab"] = extractor.autoencoder()->vocab().words();
  } else {
    m["hvector_dim"] = extractor.hvector_dim();
  }
  if (!extra.is_null()) m["info"] = extra;
  ckpt.manifest = std::move(m);
  ckpt.add(extractor.parameters());
  return ckpt;
}

HistoryExtractor extractor_from_checkpoint(const Checkpoint& ckpt) {
  const auto& m = ckpt.manifest;
  if (m.value("kind", "") != "extractor") throw CheckpointError("checkpoint does not hold a history extractor");
  const ExtractorKind kind = parse_extractor_kind(m.at("type").get<std::string>());
  if (kind == ExtractorKind::none) return HistoryExtractor::zero(m.at("hvector_dim").get<Index>());
  const ExtractorConfig config = ExtractorConfig::from_json(m.at("config"));
  const PromptVocab vocab = PromptVocab::from_words(m.at("vocab").get<std::vector<std::string>>());
  if (kind == ExtractorKind::unsupervised) {
    PromptAutoencoder ae(config, vocab);
    ckpt.restore(ae.parameters());
    ae.trained = true;
    return HistoryExtractor::from(std::move(ae));
  }
  PromptBagPredictor bp(config, vocab, m.at("targets").get<std::vector<std::string>>());
  ckpt.restore(bp.parameters());
  bp.trained = true;
  return HistoryExtractor::from(std::move(bp), kind);
}

ParamList HistoryExtractor::content_parameters() const {
  ParamList out;
  for (auto& p : parameters()) {
    const std::string& n = p.name;
    if (n.starts_with("embedding") || n.starts_with("encoder") || n.starts_with("projection")) out.push_back(p);
  }
  return out;
}

std::vector<std::string> select_freq_concepts(const std::vector<std::size_t>& error_counts,
                                              const std::vector<std::string>& inventory, std::size_t k) {
  if (error_counts.size() != inventory.size()) {
    throw std::invalid_argument("select_freq_concepts: " + std::to_string(error_counts.size()) +
                                " counts for an inventory of " + std::to_string(inventory.size()));
  }
  if (k > inventory.size()) {
    throw std::invalid_argument("select_freq_concepts: k=" + std::to_string(k) + " exceeds inventory size " +
                                std::to_string(inventory.size()));
  }
  std::vector<std::size_t> order(inventory.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return error_counts[a] > error_counts[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (std::size_t i : order) out.push_back(inventory[i]);
  return out;
}

}  // namespace hvslu
