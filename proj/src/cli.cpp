#include "hvslu/cli.hpp"

#include "hvslu/checkpoint.hpp"
#include "hvslu/experiment.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace hvslu::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- files

std::string serialize_hypotheses(const HypothesisFile& file) {
  nlohmann::json header = file.header;
  header["format"] = kHypothesisFormatTag;
  std::string out = header.dump() + "\n";
  for (const auto& r : file.records) {
    nlohmann::json concepts = nlohmann::json::array();
    for (const auto& [tag, value] : r.transcript.concepts) concepts.push_back({tag, value});
    out += nlohmann::json{{"id", r.id}, {"plain", r.transcript.plain}, {"concepts", concepts}}.dump() + "\n";
  }
  return out;
}

HypothesisFile parse_hypotheses(const std::string& text) {
  HypothesisFile file;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = "hypothesis line " + std::to_string(number) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(where + e.what());
    }
    if (number == 1) {
      if (j.value("format", "") != kHypothesisFormatTag) throw std::runtime_error(where + "missing HVHYP1 header");
      file.header = j;
      continue;
    }
    try {
      HypothesisRecord r;
      r.id = j.at("id").get<std::string>();
      r.transcript.plain = j.at("plain").get<std::string>();
      for (const auto& c : j.at("concepts")) {
        r.transcript.concepts.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
      }
      file.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + e.what());
    }
  }
  if (number == 0) throw std::runtime_error("empty hypothesis file");
  return file;
}

nlohmann::json ScoreRecord::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"name", name}, {"cer", cer}, {"cver", cver}, {"delta_cer", opt(delta_cer)}, {"delta_cver", opt(delta_cver)}};
}

ScoreRecord ScoreRecord::from_json(const nlohmann::json& j) {
  ScoreRecord r;
  r.name = j.at("name").get<std::string>();
  r.cer = j.at("cer").get<double>();
  r.cver = j.at("cver").get<double>();
  if (j.contains("delta_cer") && !j.at("delta_cer").is_null()) r.delta_cer = j.at("delta_cer").get<double>();
  if (j.contains("delta_cver") && !j.at("delta_cver").is_null()) r.delta_cver = j.at("delta_cver").get<double>();
  return r;
}

ScoreRecord score_hypotheses(const Corpus& corpus, Split split, const HypothesisFile& hyps, const std::string& name) {
  const auto refs = corpus.split(split);
  if (refs.size() != hyps.records.size()) {
    throw std::runtime_error("hypothesis file has " + std::to_string(hyps.records.size()) + " records, the " +
                             to_string(split) + " split has " + std::to_string(refs.size()));
  }
  std::vector<eval::TagSequence> ref_tags, hyp_tags;
  std::vector<eval::TagValueSequence> ref_pairs, hyp_pairs;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string id = refs[i]->dialog_id + "." + std::to_string(refs[i]->turn_index);
    if (hyps.records[i].id != id) {
      throw std::runtime_error("hypothesis " + std::to_string(i + 1) + " is for '" + hyps.records[i].id +
                               "', expected '" + id + "'");
    }
    ref_tags.push_back(refs[i]->user.tags());
    hyp_tags.push_back(hyps.records[i].transcript.tags());
    ref_pairs.push_back(refs[i]->user.tag_values());
    hyp_pairs.push_back(hyps.records[i].transcript.concepts);
  }
  ScoreRecord r;
  r.name = name;
  r.cer = eval::cer(ref_tags, hyp_tags);
  r.cver = eval::cver(ref_pairs, hyp_pairs);
  return r;
}

std::vector<ScoreRecord> with_deltas(std::vector<ScoreRecord> rows) {
  if (rows.empty()) return rows;
  const double base_cer = eval::round1(rows[0].cer);
  const double base_cver = eval::round1(rows[0].cver);
  rows[0].delta_cer.reset();
  rows[0].delta_cver.reset();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    rows[i].delta_cer = eval::round1(eval::relative_reduction(base_cer, eval::round1(rows[i].cer)));
    rows[i].delta_cver = eval::round1(eval::relative_reduction(base_cver, eval::round1(rows[i].cver)));
  }
  return rows;
}

std::string format_table(const std::vector<ScoreRecord>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  auto cell = [](const std::optional<double>& v) { return v ? eval::format1(*v) : std::string("-"); };
  out << std::left << std::setw(static_cast<int>(width)) << "system" << std::right << std::setw(8) << "CER"
      << std::setw(8) << "dCER" << std::setw(8) << "CVER" << std::setw(8) << "dCVER" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setw(8)
        << eval::format1(r.cer) << std::setw(8) << cell(r.delta_cer) << std::setw(8) << eval::format1(r.cver)
        << std::setw(8) << cell(r.delta_cver) << "\n";
  }
  return out.str();
}

namespace {

// ---------------------------------------------------------------- helpers

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string preset;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.preset.empty()) {
    ModelConfig::preset_named(c.preset);
    cfg.preset = c.preset;
  }
  return cfg;
}

nlohmann::json nan_to_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void write_run_config(const fs::path& dir, const ExperimentConfig& cfg) {
  write_file(dir / "config.txt", cfg.to_text());
}

struct LoadedExtractor {
  HistoryExtractor extractor = HistoryExtractor::zero();
  std::string hash;  // empty for the zero source
};

LoadedExtractor load_extractor(const std::string& path, const std::string& corpus_hash) {
  LoadedExtractor out;
  if (path.empty()) return out;
  const std::string bytes = read_file(path);
  Checkpoint ckpt = parse_checkpoint(bytes);
  const std::string stored = ckpt.manifest.value("info", nlohmann::json::object()).value("corpus_hash", "");
  if (stored != corpus_hash) {
    throw std::runtime_error("extractor " + path + " was trained on corpus " + stored + ", not " + corpus_hash);
  }
  out.extractor = extractor_from_checkpoint(ckpt);
  out.hash = fnv1a_hex(bytes);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_gen_corpus(const Common& common, const std::string& out_path, std::ostream& out) {
  ExperimentConfig cfg = resolve(common);
  GeneratorConfig g = cfg.generator();
  if (common.seed) g.seed = *common.seed;
  const Corpus corpus = generate_corpus(g);
  save_corpus(corpus, out_path);
  out << "wrote " << corpus.pairs.size() << " dialog turns to " << out_path << " (hash " << corpus.content_hash()
      << ")\n";
  return 0;
}

int cmd_train_hvec(const Common& common, const std::string& corpus_path, const std::string& type,
                   const std::string& targets_arg, const std::string& errors_from, const std::string& out_dir,
                   std::ostream& out) {
  ExperimentConfig cfg = resolve(common);
  const Corpus corpus = load_corpus(corpus_path);
  const ExtractorKind kind = parse_extractor_kind(type);
  if (kind == ExtractorKind::none) throw std::runtime_error("train-hvec needs a trainable extractor type");
  std::vector<std::string> targets;
  if (kind == ExtractorKind::supervised_freq) {
    if (!targets_arg.empty()) {
      targets = split_list(targets_arg);
    } else if (!errors_from.empty()) {
      HypothesisFile hyps = parse_hypotheses(read_file(errors_from));
      const Split split = parse_split(hyps.header.value("split", "dev"));
      const auto refs = corpus.split(split);
      if (hyps.records.size() != refs.size()) throw std::runtime_error("baseline hypotheses do not match the split");
      std::vector<eval::TagSequence> r, h;
      for (std::size_t i = 0; i < refs.size(); ++i) {
        r.push_back(refs[i]->user.tags());
        h.push_back(hyps.records[i].transcript.tags());
      }
      const auto inventory = corpus.config.concept_tags();
      targets = select_freq_concepts(eval::per_concept_errors(r, h, inventory), inventory,
                                     static_cast<std::size_t>(cfg.freq_k));
    } else {
      throw std::runtime_error("supervised-freq needs --targets or --errors-from");
    }
  }
  ExtractorRun run = train_extractor(corpus, kind, cfg.extractor_config(), targets);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  nlohmann::json info = {{"corpus_hash", corpus.content_hash()}, {"config", cfg.to_text()}};
  save_checkpoint(extractor_checkpoint(run.extractor, info), dir / "extractor.ckpt");
  std::string log;
  for (const auto& e : run.log) {
    log += nlohmann::json{{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"heldout_loss", e.heldout_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"heldout_accuracy", e.heldout_accuracy}}
               .dump() +
           "\n";
  }
  write_file(dir / "extractor_log.jsonl", log);
  run.metrics["type"] = to_string(kind);
  write_file(dir / "metrics.json", run.metrics.dump(2) + "\n");
  write_run_config(dir, cfg);
  out << to_string(kind) << ": " << run.metrics.dump() << "\n";
  return 0;
}

int cmd_train_slu(const Common& common, const std::string& corpus_path, const std::string& phase_name,
                  const std::string& extractor_path, const std::string& init_path, const std::string& out_dir,
                  std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = resolve(common);
  const Corpus corpus = load_corpus(corpus_path);
  const std::string corpus_hash = corpus.content_hash();
  const Phase phase = parse_phase(phase_name);
  if (!extractor_path.empty() && (phase == Phase::pretrain_zero || phase == Phase::transfer_asr)) {
    throw std::runtime_error("phase " + phase_name + " trains with zero h-vectors; drop --extractor");
  }
  LoadedExtractor ex = load_extractor(extractor_path, corpus_hash);
  const TrainingSchedule schedule = cfg.schedule(phase);

  std::optional<Checkpoint> init;
  std::string init_hash;
  if (phase == Phase::finetune || phase == Phase::transfer_sf) {
    if (init_path.empty()) throw std::runtime_error("phase " + phase_name + " needs --init CHECKPOINT");
    const std::string bytes = read_file(init_path);
    init = parse_checkpoint(bytes);
    init_hash = fnv1a_hex(bytes);
    const std::string want = phase == Phase::finetune ? "pretrain_zero" : "transfer_asr";
    if (init->manifest.value("phase", "") != want) {
      throw std::runtime_error(init_path + " is a " + init->manifest.value("phase", "?") + " checkpoint, expected " +
                               want);
    }
    const std::string stored = init->manifest.value("info", nlohmann::json::object()).value("corpus_hash", "");
    if (stored != corpus_hash) throw std::runtime_error(init_path + " was trained on a different corpus");
    require_same_architecture(*init, cfg.model());
  } else if (!init_path.empty()) {
    throw std::runtime_error("--init only applies to finetune and transfer_sf");
  }

  const OutputAlphabet alphabet =
      phase == Phase::transfer_asr ? asr_alphabet(corpus.config) : slu_alphabet(corpus.config);
  SignalToConceptModel model = [&] {
    if (phase == Phase::finetune) return model_from_checkpoint(*init);
    if (phase == Phase::transfer_sf) return transfer_swap_softmax(model_from_checkpoint(*init), alphabet, cfg.seed);
    return SignalToConceptModel(cfg.model(), alphabet, cfg.seed);
  }();

  const FeatureSynthesizer synth(cfg.features());
  const auto train = build_utterances(corpus.split(Split::train), synth, alphabet, ex.extractor);
  const auto dev = build_utterances(corpus.split(Split::dev), synth, alphabet, ex.extractor);
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  std::string log;
  auto on_epoch = [&](const EpochLog& e) {
    log += nlohmann::json{{"epoch", e.epoch},
                          {"train_loss", nan_to_null(e.train_loss)},
                          {"dev_loss", nan_to_null(e.dev_loss)},
                          {"dev_cer", nan_to_null(e.dev_cer)},
                          {"dev_char_error", nan_to_null(e.dev_char_error)}}
               .dump() +
           "\n";
    err << "epoch " << e.epoch << " train_loss " << e.train_loss << " dev_loss " << e.dev_loss << " dev_cer "
        << e.dev_cer << "\n";
  };
  const TrainResult result = train_model(model, train, dev, schedule, &ex.extractor, on_epoch);

  nlohmann::json info = {{"corpus_hash", corpus_hash},
                         {"extractor", to_string(ex.extractor.kind())},
                         {"extractor_hash", ex.hash},
                         {"init_hash", init_hash},
                         {"schedule", schedule.to_json()}};
  save_checkpoint(model_checkpoint(model, phase, info), dir / "model.ckpt");
  write_file(dir / "train_log.jsonl", log);
  nlohmann::json manifest = info;
  manifest["config"] = cfg.to_text();
  manifest["seed"] = cfg.seed;
  manifest["phase"] = to_string(phase);
  manifest["parameters"] = model.parameter_count();
  manifest["skipped_train"] = result.skipped_train;
  manifest["skipped_dev"] = result.skipped_dev;
  manifest["final_dev_loss"] = nan_to_null(result.log.back().dev_loss);
  manifest["final_dev_cer"] = nan_to_null(result.log.back().dev_cer);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_run_config(dir, cfg);
  out << to_string(phase) << " (" << to_string(ex.extractor.kind()) << "): final dev loss "
      << result.log.back().dev_loss << ", dev CER " << result.log.back().dev_cer << ", skipped "
      << result.skipped_train << " infeasible training utterances\n";
  return 0;
}

int cmd_decode(const Common& common, const std::string& model_path, const std::string& corpus_path,
               const std::string& split_name, const std::string& extractor_path, const std::string& out_dir,
               std::ostream& out) {
  ExperimentConfig cfg = resolve(common);
  const Corpus corpus = load_corpus(corpus_path);
  const std::string corpus_hash = corpus.content_hash();
  const std::string model_bytes = read_file(model_path);
  const Checkpoint ckpt = parse_checkpoint(model_bytes);
  const nlohmann::json info = ckpt.manifest.value("info", nlohmann::json::object());
  if (info.value("corpus_hash", "") != corpus_hash) {
    throw std::runtime_error("model " + model_path + " was trained on a different corpus");
  }
  LoadedExtractor ex = load_extractor(extractor_path, corpus_hash);
  if (ex.hash != info.value("extractor_hash", "")) {
    throw std::runtime_error("extractor hash mismatch: the model was trained with extractor '" +
                             info.value("extractor_hash", "") + "', got '" + ex.hash + "'");
  }
  const SignalToConceptModel model = model_from_checkpoint(ckpt);
  const Split split = parse_split(split_name);
  const FeatureSynthesizer synth(cfg.features());
  const auto utts = build_utterances(corpus.split(split), synth, model.alphabet(), ex.extractor);
  HypothesisFile file;
  const std::string kind = to_string(ex.extractor.kind());
  file.header = {{"corpus_hash", corpus_hash},
                 {"split", split_name},
                 {"model_hash", fnv1a_hex(model_bytes)},
                 {"system", kind == "none" ? std::string("baseline") : kind}};
  for (const auto& u : utts) {
    file.records.push_back({u.id, decode_utterance(model, u.features, u.h).transcript});
  }
  const fs::path path = fs::path(out_dir) / ("hyp_" + split_name + ".jsonl");
  write_file(path, serialize_hypotheses(file));
  out << "wrote " << file.records.size() << " hypotheses to " << path.string() << "\n";
  return 0;
}

int cmd_score(const std::string& corpus_path, const std::string& split_name, const std::string& hyp_path,
              const std::string& name_arg, const std::string& out_dir, std::ostream& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const HypothesisFile hyps = parse_hypotheses(read_file(hyp_path));
  if (hyps.header.value("corpus_hash", "") != corpus.content_hash()) {
    throw std::runtime_error("hypotheses in " + hyp_path + " were decoded from a different corpus");
  }
  if (hyps.header.value("split", split_name) != split_name) {
    throw std::runtime_error("hypotheses in " + hyp_path + " are for the " + hyps.header.value("split", "?") +
                             " split");
  }
  const std::string name = name_arg.empty() ? hyps.header.value("system", "system") : name_arg;
  const ScoreRecord r = score_hypotheses(corpus, parse_split(split_name), hyps, name);
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "score.jsonl", r.to_json().dump() + "\n");
  out << format_table({r});
  return 0;
}

ScoreRecord read_score(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "score.jsonl";
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(p.string() + ": empty score file");
  try {
    return ScoreRecord::from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(p.string() + ":1: " + e.what());
  }
}

int cmd_table(const std::vector<std::string>& runs, const std::string& out_path, std::ostream& out) {
  std::vector<ScoreRecord> rows;
  for (const auto& r : runs) rows.push_back(read_score(r));
  rows = with_deltas(std::move(rows));
  std::string report = format_table(rows);
  for (const auto& r : rows) report += r.to_json().dump() + "\n";
  if (!out_path.empty()) write_file(out_path, report);
  out << report;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"h-vector spoken language understanding toolkit"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed_value = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "experiment config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_value, "seed override");
    sub->add_option("--preset", common.preset, "model preset")->check(CLI::IsMember({"desk", "paper"}));
  };

  std::string out_arg, corpus_path, type, targets, errors_from, phase, extractor, init, model, split = "test", hyp,
      name;
  std::vector<std::string> runs;

  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic dialog corpus");
  add_common(gen);
  gen->add_option("--out", out_arg, "corpus file to write")->required();

  auto* hvec = app.add_subcommand("train-hvec", "train an h-vector extractor");
  add_common(hvec);
  hvec->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  hvec->add_option("--type", type, "unsupervised | supervised-freq | supervised-all")->required();
  hvec->add_option("--targets", targets, "comma-separated concepts for supervised-freq");
  hvec->add_option("--errors-from", errors_from, "baseline dev hypotheses used to pick supervised-freq targets")
      ->check(CLI::ExistingFile);
  hvec->add_option("--out", out_arg, "run directory")->required();

  auto* slu = app.add_subcommand("train-slu", "train the signal-to-concept model");
  add_common(slu);
  slu->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  slu->add_option("--phase", phase, "direct | pretrain_zero | finetune | transfer_asr | transfer_sf")->required();
  slu->add_option("--extractor", extractor, "extractor checkpoint; zero h-vectors without it")
      ->check(CLI::ExistingFile);
  slu->add_option("--init", init, "checkpoint to start from (finetune, transfer_sf)")->check(CLI::ExistingFile);
  slu->add_option("--out", out_arg, "run directory")->required();

  auto* dec = app.add_subcommand("decode", "decode a corpus split");
  add_common(dec);
  dec->add_option("--model", model)->required()->check(CLI::ExistingFile);
  dec->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  dec->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  dec->add_option("--extractor", extractor)->check(CLI::ExistingFile);
  dec->add_option("--out", out_arg, "run directory")->required();

  auto* score = app.add_subcommand("score", "score hypotheses with CER and CVER");
  score->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  score->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  score->add_option("--hyp", hyp)->required()->check(CLI::ExistingFile);
  score->add_option("--name", name, "system name in the report");
  score->add_option("--out", out_arg, "run directory for score.jsonl");

  auto* table = app.add_subcommand("table", "results table with relative reductions; the first run is the baseline");
  table->add_option("runs", runs, "run directories or score files")->required();
  table->add_option("--out", out_arg, "report file");

  std::vector<std::string> argv_storage{"hvslu"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  for (auto* sub : {gen, hvec, slu, dec}) {
    if (sub->parsed() && sub->count("--seed") > 0) common.seed = seed_value;
  }

  try {
    if (gen->parsed()) return cmd_gen_corpus(common, out_arg, out);
    if (hvec->parsed()) return cmd_train_hvec(common, corpus_path, type, targets, errors_from, out_arg, out);
    if (slu->parsed()) return cmd_train_slu(common, corpus_path, phase, extractor, init, out_arg, out, err);
    if (dec->parsed()) return cmd_decode(common, model, corpus_path, split, extractor, out_arg, out);
    if (score->parsed()) return cmd_score(corpus_path, split, hyp, name, out_arg, out);
    if (table->parsed()) return cmd_table(runs, out_arg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace hvslu::cli
