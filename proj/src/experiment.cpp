#include "hvslu/experiment.hpp"

#include "hvslu/checkpoint.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace hvslu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("'" + text + "' is not a valid number");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("'" + text + "' is not a boolean (true/false)");
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field number_field(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed", number_field(&ExperimentConfig::seed)},
      {"preset",
       {[](ExperimentConfig& c, const std::string& v) {
          ModelConfig::preset_named(v);
          c.preset = v;
        },
        [](const ExperimentConfig& c) { return c.preset; }}},
      {"extractor",
       {[](ExperimentConfig& c, const std::string& v) { c.extractor = parse_extractor_kind(v); },
        [](const ExperimentConfig& c) { return to_string(c.extractor); }}},
      {"out_dir",
       {[](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
        [](const ExperimentConfig& c) { return c.out_dir; }}},
      {"corpus.seed", number_field(&ExperimentConfig::corpus_seed)},
      {"corpus.n_dialogs", number_field(&ExperimentConfig::n_dialogs)},
      {"corpus.rho", number_field(&ExperimentConfig::rho)},
      {"corpus.min_dialog_turns", number_field(&ExperimentConfig::min_dialog_turns)},
      {"corpus.max_dialog_turns", number_field(&ExperimentConfig::max_dialog_turns)},
      {"features.seed", number_field(&ExperimentConfig::feature_seed)},
      {"features.noise_sigma", number_field(&ExperimentConfig::noise_sigma)},
      {"extractor.epochs", number_field(&ExperimentConfig::extractor_epochs)},
      {"extractor.batch_size", number_field(&ExperimentConfig::extractor_batch_size)},
      {"extractor.learning_rate", number_field(&ExperimentConfig::extractor_learning_rate)},
      {"extractor.freq_k", number_field(&ExperimentConfig::freq_k)},
      {"train.batch_size", number_field(&ExperimentConfig::batch_size)},
      {"train.learning_rate", number_field(&ExperimentConfig::learning_rate)},
      {"train.optimizer",
       {[](ExperimentConfig& c, const std::string& v) {
          parse_optimizer_kind(v);
          c.optimizer = v;
        },
        [](const ExperimentConfig& c) { return c.optimizer; }}},
      {"train.epochs_direct", number_field(&ExperimentConfig::epochs_direct)},
      {"train.epochs_pretrain", number_field(&ExperimentConfig::epochs_pretrain)},
      {"train.epochs_finetune", number_field(&ExperimentConfig::epochs_finetune)},
      {"train.epochs_asr", number_field(&ExperimentConfig::epochs_asr)},
      {"train.epochs_sf", number_field(&ExperimentConfig::epochs_sf)},
      {"train.joint_extractor",
       {[](ExperimentConfig& c, const std::string& v) { c.joint_extractor = parse_bool(v); },
        [](const ExperimentConfig& c) { return std::string(c.joint_extractor ? "true" : "false"); }}},
  };
  return table;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& source) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen.contains(key)) {
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(seen[key]) + ")");
    }
    seen[key] = number;
    try {
      it->second.set(c, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

GeneratorConfig ExperimentConfig::generator() const {
  GeneratorConfig g;
  g.seed = corpus_seed;
  g.n_dialogs = n_dialogs;
  g.rho = rho;
  g.min_dialog_turns = min_dialog_turns;
  g.max_dialog_turns = max_dialog_turns;
  return g;
}

FeatureSynthConfig ExperimentConfig::features() const {
  FeatureSynthConfig f;
  f.seed = feature_seed;
  f.noise_sigma = noise_sigma;
  return f;
}

ExtractorConfig ExperimentConfig::extractor_config() const {
  ExtractorConfig e;
  e.epochs = extractor_epochs;
  e.batch_size = extractor_batch_size;
  e.seed = seed;
  e.optimizer.kind = parse_optimizer_kind(optimizer);
  e.optimizer.learning_rate = extractor_learning_rate;
  return e;
}

TrainingSchedule ExperimentConfig::schedule(Phase phase) const {
  TrainingSchedule s;
  s.phase = phase;
  s.batch_size = batch_size;
  s.optimizer.kind = parse_optimizer_kind(optimizer);
  s.optimizer.learning_rate = learning_rate;
  s.seed = seed;
  s.joint_extractor = joint_extractor;
  switch (phase) {
    case Phase::direct: s.epochs = epochs_direct; break;
    case Phase::pretrain_zero: s.epochs = epochs_pretrain; break;
    case Phase::finetune: s.epochs = epochs_finetune; break;
    case Phase::transfer_asr: s.epochs = epochs_asr; break;
    case Phase::transfer_sf: s.epochs = epochs_sf; break;
  }
  return s;
}

ModelConfig ExperimentConfig::model() const { return ModelConfig::preset_named(preset); }

OutputAlphabet slu_alphabet(const GeneratorConfig& config) {
  return OutputAlphabet::slu(config.graphemes, config.concept_tags());
}

OutputAlphabet asr_alphabet(const GeneratorConfig& config) { return OutputAlphabet::asr(config.graphemes); }

std::vector<Utterance> build_utterances(const std::vector<const DialogTurnPair*>& pairs,
                                        const FeatureSynthesizer& synth, const OutputAlphabet& alphabet,
                                        const HistoryExtractor& extractor) {
  std::vector<Utterance> out;
  out.reserve(pairs.size());
  for (const auto* p : pairs) {
    Utterance u;
    u.id = p->dialog_id + "." + std::to_string(p->turn_index);
    u.features = synth.synthesize(p->user.plain, p->utterance_seed);
    u.labels = alphabet.mode() == AlphabetMode::slu ? encode_transcript(alphabet, p->user.tagged)
                                                    : encode_plain(alphabet, p->user.plain);
    u.h = extractor.extract(p->system_prompt, p->turn_index);
    u.prompt = p->system_prompt;
    u.turn = p->turn_index;
    u.reference = p->user;
    out.push_back(std::move(u));
  }
  return out;
}

ExtractorRun train_extractor(const Corpus& corpus, ExtractorKind kind, const ExtractorConfig& config,
                             const std::vector<std::string>& freq_targets) {
  const auto train = corpus.split(Split::train);
  const auto heldout = corpus.split(Split::test);
  std::vector<std::vector<std::string>> train_prompts, heldout_prompts;
  for (const auto* p : train) train_prompts.push_back(p->system_prompt);
  for (const auto* p : heldout) heldout_prompts.push_back(p->system_prompt);
  const PromptVocab vocab = PromptVocab::build(train_prompts);

  switch (kind) {
    case ExtractorKind::none:
      return {HistoryExtractor::zero(config.hvector_dim), {}, nlohmann::json::object()};
    case ExtractorKind::unsupervised: {
      PromptAutoencoder ae(config, vocab);
      auto log = train_autoencoder(ae, train_prompts, heldout_prompts);
      const auto tr = evaluate_autoencoder(ae, train_prompts);
      const auto ho = evaluate_autoencoder(ae, heldout_prompts);
      nlohmann::json m = {{"train_accuracy", tr.accuracy},
                          {"heldout_accuracy", ho.accuracy},
                          {"parameters", PromptAutoencoder::parameter_count(config, vocab.size())}};
      return {HistoryExtractor::from(std::move(ae)), std::move(log), std::move(m)};
    }
    case ExtractorKind::supervised_all:
    case ExtractorKind::supervised_freq: {
      const std::vector<std::string> targets =
          kind == ExtractorKind::supervised_all ? corpus.config.concept_tags() : freq_targets;
      if (targets.empty()) throw std::invalid_argument("supervised-freq extractor needs target concepts");
      PromptBagPredictor bp(config, vocab, targets);
      const auto train_ex = bag_examples(train, targets);
      const auto heldout_ex = bag_examples(heldout, targets);
      auto log = train_bag_predictor(bp, train_ex, heldout_ex);
      const auto tr = evaluate_bag_predictor(bp, train_ex);
      const auto ho = evaluate_bag_predictor(bp, heldout_ex);
      nlohmann::json m = {{"train_accuracy", tr.subset_accuracy},
                          {"heldout_accuracy", ho.subset_accuracy},
                          {"heldout_empty_bag_accuracy", ho.empty_bag_accuracy},
                          {"heldout_micro_f1", ho.micro_f1},
                          {"targets", targets},
                          {"parameters", PromptBagPredictor::parameter_count(config, vocab.size(),
                                                                             static_cast<Index>(targets.size()))}};
      return {HistoryExtractor::from(std::move(bp), kind), std::move(log), std::move(m)};
    }
  }
  throw std::logic_error("unreachable extractor kind");
}

}  // namespace hvslu
