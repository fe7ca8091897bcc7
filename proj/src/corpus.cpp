#include "hvslu/corpus.hpp"

#include "hvslu/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hvslu {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "dev") return Split::dev;
  if (text == "test") return Split::test;
  throw CorpusError("unknown split '" + text + "'");
}

std::vector<ConceptSpec> default_inventory() {
  const std::vector<std::string> days = {"monday", "friday", "sunday"};
  const std::vector<std::string> counts = {"one", "two", "three", "four"};
  const std::vector<std::string> prices = {"fifty euros", "ninety euros", "hundred euros"};
  const std::vector<std::string> places = {"paris", "nice", "lyon"};
  const std::vector<std::string> times = {"noon", "morning", "evening"};
  const std::vector<std::string> kinds = {"double", "single", "twin"};
  return {
      {"arrival_date", "arrival", days},    {"departure_date", "departure", days},
      {"room_count", "rooms", counts},      {"person_count", "people", counts},
      {"price_min", "minimum", prices},     {"price_max", "maximum", prices},
      {"city", "city", places},             {"hotel_name", "hotel", places},
      {"checkin_time", "checkin", times},   {"checkout_time", "checkout", times},
      {"room_type", "room", kinds},         {"bed_type", "bed", kinds},
  };
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

// ---------------------------------------------------------------- config

std::vector<std::string> GeneratorConfig::concept_tags() const {
  std::vector<std::string> tags;
  for (const auto& c : inventory) tags.push_back(c.tag);
  return tags;
}

json GeneratorConfig::to_json() const {
  json inv = json::array();
  for (const auto& c : inventory) {
    inv.push_back({{"tag", c.tag}, {"prompt_keyword", c.prompt_keyword}, {"values", c.values}});
  }
  return json{{"seed", seed},
              {"n_dialogs", n_dialogs},
              {"min_dialog_turns", min_dialog_turns},
              {"max_dialog_turns", max_dialog_turns},
              {"max_turns", max_turns},
              {"rho", rho},
              {"base_rate", base_rate},
              {"min_prompt_concepts", min_prompt_concepts},
              {"max_prompt_concepts", max_prompt_concepts},
              {"inventory", inv},
              {"prompt_openers", prompt_openers},
              {"prompt_closers", prompt_closers},
              {"user_prefixes", user_prefixes},
              {"user_suffixes", user_suffixes},
              {"user_fillers", user_fillers},
              {"prefix_rate", prefix_rate},
              {"suffix_rate", suffix_rate},
              {"graphemes", graphemes},
              {"system_vocab_size", system_vocab_size},
              {"user_vocab_size", user_vocab_size},
              {"train_fraction", train_fraction},
              {"dev_fraction", dev_fraction},
              {"min_concept_marginal", min_concept_marginal}};
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
  GeneratorConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_dialogs = j.at("n_dialogs").get<int>();
  c.min_dialog_turns = j.at("min_dialog_turns").get<int>();
  c.max_dialog_turns = j.at("max_dialog_turns").get<int>();
  c.max_turns = j.at("max_turns").get<int>();
  c.rho = j.at("rho").get<double>();
  c.base_rate = j.at("base_rate").get<double>();
  c.min_prompt_concepts = j.at("min_prompt_concepts").get<int>();
  c.max_prompt_concepts = j.at("max_prompt_concepts").get<int>();
  c.inventory.clear();
  for (const auto& item : j.at("inventory")) {
    c.inventory.push_back({item.at("tag").get<std::string>(),
                           item.at("prompt_keyword").get<std::string>(),
                           item.at("values").get<std::vector<std::string>>()});
  }
  c.prompt_openers = j.at("prompt_openers").get<std::vector<std::string>>();
  c.prompt_closers = j.at("prompt_closers").get<std::vector<std::string>>();
  c.user_prefixes = j.at("user_prefixes").get<std::vector<std::string>>();
  c.user_suffixes = j.at("user_suffixes").get<std::vector<std::string>>();
  c.user_fillers = j.at("user_fillers").get<std::vector<std::string>>();
  c.prefix_rate = j.at("prefix_rate").get<double>();
  c.suffix_rate = j.at("suffix_rate").get<double>();
  c.graphemes = j.at("graphemes").get<std::string>();
  c.system_vocab_size = j.at("system_vocab_size").get<int>();
  c.user_vocab_size = j.at("user_vocab_size").get<int>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.dev_fraction = j.at("dev_fraction").get<double>();
  c.min_concept_marginal = j.at("min_concept_marginal").get<double>();
  return c;
}

std::string GeneratorConfig::hash() const { return fnv1a_hex(to_json().dump()); }

namespace {

void collect_words(const std::string& phrase, std::set<std::string>& out) {
  for (auto& w : split_words(phrase)) out.insert(w);
}

void validate(const GeneratorConfig& c) {
  if (c.n_dialogs < 1) throw CorpusError("n_dialogs must be positive");
  if (c.min_dialog_turns < 1 || c.max_dialog_turns < c.min_dialog_turns || c.max_dialog_turns > c.max_turns) {
    throw CorpusError("dialog turn range must satisfy 1 <= min <= max <= max_turns");
  }
  if (c.rho < 0.0 || c.rho > 1.0 || c.base_rate < 0.0 || c.base_rate > 1.0) {
    throw CorpusError("rho and base_rate must lie in [0, 1]");
  }
  if (c.inventory.empty()) throw CorpusError("concept inventory is empty");
  if (c.min_prompt_concepts < 1 || c.max_prompt_concepts < c.min_prompt_concepts ||
      c.max_prompt_concepts > static_cast<int>(c.inventory.size())) {
    throw CorpusError("prompt concept range must lie within [1, inventory size]");
  }
  if (c.prompt_openers.empty() || c.prompt_closers.empty() || c.user_fillers.empty()) {
    throw CorpusError("prompt templates and user fillers must be non-empty");
  }
  if (c.train_fraction <= 0.0 || c.dev_fraction < 0.0 || c.train_fraction + c.dev_fraction > 1.0) {
    throw CorpusError("split fractions must be positive and sum to at most 1");
  }
  std::set<std::string> keywords;
  std::set<std::string> system_words;
  std::set<std::string> user_words{"and"};
  system_words.insert("and");
  for (const auto& spec : c.inventory) {
    if (spec.values.empty()) throw CorpusError("concept " + spec.tag + " has no values");
    if (split_words(spec.prompt_keyword).size() != 1) {
      throw CorpusError("prompt keyword of " + spec.tag + " must be a single word");
    }
    if (!keywords.insert(spec.prompt_keyword).second) {
      throw CorpusError("prompt keyword '" + spec.prompt_keyword + "' used by two concepts");
    }
    system_words.insert(spec.prompt_keyword);
    for (const auto& v : spec.values) collect_words(v, user_words);
  }
  for (const auto& p : c.prompt_openers) collect_words(p, system_words);
  for (const auto& p : c.prompt_closers) collect_words(p, system_words);
  for (const auto& p : c.user_prefixes) collect_words(p, user_words);
  for (const auto& p : c.user_suffixes) collect_words(p, user_words);
  for (const auto& p : c.user_fillers) collect_words(p, user_words);
  for (const auto& w : user_words) {
    for (char ch : w) {
      if (c.graphemes.find(ch) == std::string::npos) {
        throw CorpusError(std::string("user word '") + w + "' uses character outside the grapheme set");
      }
    }
  }
  if (static_cast<int>(system_words.size()) > c.system_vocab_size) {
    throw CorpusError("prompt templates use " + std::to_string(system_words.size()) +
                      " words, above system_vocab_size " + std::to_string(c.system_vocab_size));
  }
  if (static_cast<int>(user_words.size()) > c.user_vocab_size) {
    throw CorpusError("user templates use " + std::to_string(user_words.size()) +
                      " words, above user_vocab_size " + std::to_string(c.user_vocab_size));
  }
  // Inventory tags must be valid codec tag names.
  OutputAlphabet::slu(c.graphemes, c.concept_tags());
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
}

std::vector<DialogTurnPair> generate_dialogs(const GeneratorConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n_concepts = c.inventory.size();
  std::vector<DialogTurnPair> pairs;
  for (int d = 0; d < c.n_dialogs; ++d) {
    char id[16];
    std::snprintf(id, sizeof id, "d%04d", d);
    const int turns = static_cast<int>(rng.uniform_int(c.min_dialog_turns, c.max_dialog_turns));
    for (int turn = 0; turn < turns; ++turn) {
      // System prompt naming k distinct concepts.
      std::vector<std::size_t> order(n_concepts);
      for (std::size_t i = 0; i < n_concepts; ++i) order[i] = i;
      rng.shuffle(order);
      const auto k = static_cast<std::size_t>(rng.uniform_int(c.min_prompt_concepts, c.max_prompt_concepts));
      std::vector<bool> prompted(n_concepts, false);
      std::vector<std::size_t> prompt_concepts(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(prompt_concepts.begin(), prompt_concepts.end());
      std::vector<std::string> prompt = split_words(pick(rng, c.prompt_openers));
      for (std::size_t i = 0; i < prompt_concepts.size(); ++i) {
        if (i > 0) prompt.push_back("and");
        prompt.push_back(c.inventory[prompt_concepts[i]].prompt_keyword);
        prompted[prompt_concepts[i]] = true;
      }
      for (auto& w : split_words(pick(rng, c.prompt_closers))) prompt.push_back(w);

      // User answer concepts.
      std::vector<std::size_t> answer;
      for (std::size_t i = 0; i < n_concepts; ++i) {
        const bool follows_prompt = rng.bernoulli(c.rho);
        const bool base = rng.bernoulli(c.base_rate);
        if (follows_prompt ? prompted[i] : base) answer.push_back(i);
      }
      rng.shuffle(answer);

      std::string tagged;
      auto append = [&tagged](const std::string& piece) {
        if (piece.empty()) return;
        if (!tagged.empty()) tagged.push_back(' ');
        tagged += piece;
      };
      if (answer.empty()) {
        append(pick(rng, c.user_fillers));
      } else {
        if (rng.bernoulli(c.prefix_rate) && !c.user_prefixes.empty()) append(pick(rng, c.user_prefixes));
        for (std::size_t i = 0; i < answer.size(); ++i) {
          if (i > 0) append("and");
          const ConceptSpec& spec = c.inventory[answer[i]];
          append("<" + spec.tag + "> " + pick(rng, spec.values) + " </>");
        }
        if (rng.bernoulli(c.suffix_rate) && !c.user_suffixes.empty()) append(pick(rng, c.user_suffixes));
      }

      DialogTurnPair pair;
      pair.dialog_id = id;
      pair.turn_index = turn;
      pair.system_prompt = std::move(prompt);
      pair.user = ConceptTaggedTranscript::parse(tagged);
      pair.utterance_seed = rng.next_u64() >> 11;  // stays exact as a JSON number
      pairs.push_back(std::move(pair));
    }
  }

  // Split by dialog.
  std::vector<int> dialogs(static_cast<std::size_t>(c.n_dialogs));
  for (int d = 0; d < c.n_dialogs; ++d) dialogs[static_cast<std::size_t>(d)] = d;
  Rng split_rng(mix_seed(seed, 1));
  split_rng.shuffle(dialogs);
  const int n_train = static_cast<int>(std::lround(c.train_fraction * c.n_dialogs));
  const int n_dev = static_cast<int>(std::lround(c.dev_fraction * c.n_dialogs));
  std::vector<Split> split_of(static_cast<std::size_t>(c.n_dialogs), Split::test);
  for (int i = 0; i < c.n_dialogs; ++i) {
    Split s = i < n_train ? Split::train : (i < n_train + n_dev ? Split::dev : Split::test);
    split_of[static_cast<std::size_t>(dialogs[static_cast<std::size_t>(i)])] = s;
  }
  for (auto& p : pairs) p.split = split_of[static_cast<std::size_t>(std::stoi(p.dialog_id.substr(1)))];
  return pairs;
}

bool marginals_ok(const GeneratorConfig& c, const std::vector<DialogTurnPair>& pairs) {
  const auto tags = c.concept_tags();
  std::vector<std::size_t> seen(tags.size(), 0);
  std::size_t n_train = 0;
  for (const auto& p : pairs) {
    if (p.split != Split::train) continue;
    ++n_train;
    BagOfConcepts bag = bag_of_concepts(p.user, tags);
    for (std::size_t i = 0; i < tags.size(); ++i) seen[i] += bag.bits[i];
  }
  if (n_train == 0) return false;
  for (std::size_t s : seen) {
    if (static_cast<double>(s) < c.min_concept_marginal * static_cast<double>(n_train)) return false;
  }
  return true;
}

}  // namespace

Corpus generate_corpus(const GeneratorConfig& config) {
  validate(config);
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? config.seed : mix_seed(config.seed, 100 + attempt);
    auto pairs = generate_dialogs(config, seed);
    if (marginals_ok(config, pairs)) return Corpus{config, std::move(pairs)};
  }
  throw CorpusError("could not satisfy the minimum concept marginal within " +
                    std::to_string(kMaxAttempts) + " attempts");
}

// ---------------------------------------------------------------- corpus

std::vector<const DialogTurnPair*> Corpus::split(Split which) const {
  std::vector<const DialogTurnPair*> out;
  for (const auto& p : pairs) {
    if (p.split == which) out.push_back(&p);
  }
  return out;
}

std::string Corpus::content_hash() const { return fnv1a_hex(serialize_corpus(*this)); }

std::vector<std::string> Corpus::system_vocabulary() const {
  std::set<std::string> words;
  for (const auto& p : pairs) words.insert(p.system_prompt.begin(), p.system_prompt.end());
  return {words.begin(), words.end()};
}

std::vector<std::string> Corpus::user_vocabulary() const {
  std::set<std::string> words;
  for (const auto& p : pairs) collect_words(p.user.plain, words);
  return {words.begin(), words.end()};
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  json header{{"format", kCorpusFormatTag},
              {"config_hash", corpus.config.hash()},
              {"config", corpus.config.to_json()}};
  out += header.dump();
  out.push_back('\n');
  for (const auto& p : corpus.pairs) {
    json record{{"dialog_id", p.dialog_id},
                {"turn_index", p.turn_index},
                {"split", to_string(p.split)},
                {"system_prompt", join_words(p.system_prompt)},
                {"user_transcript", p.user.tagged},
                {"utterance_seed", p.utterance_seed}};
    out += record.dump();
    out.push_back('\n');
  }
  return out;
}

Corpus parse_corpus(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  Corpus corpus;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      if (!have_header) {
        if (j.at("format").get<std::string>() != kCorpusFormatTag) {
          throw CorpusError("unsupported corpus format '" + j.at("format").get<std::string>() + "'");
        }
        corpus.config = GeneratorConfig::from_json(j.at("config"));
        const std::string stored = j.at("config_hash").get<std::string>();
        if (stored != corpus.config.hash()) {
          throw CorpusError("config hash mismatch: header says " + stored + ", config hashes to " +
                            corpus.config.hash());
        }
        have_header = true;
        continue;
      }
      DialogTurnPair p;
      p.dialog_id = j.at("dialog_id").get<std::string>();
      p.turn_index = j.at("turn_index").get<int>();
      p.split = parse_split(j.at("split").get<std::string>());
      p.system_prompt = split_words(j.at("system_prompt").get<std::string>());
      p.user = ConceptTaggedTranscript::parse(j.at("user_transcript").get<std::string>());
      p.utterance_seed = j.at("utterance_seed").get<std::uint64_t>();
      if (p.turn_index < 0 || p.turn_index >= corpus.config.max_turns) {
        throw CorpusError("turn_index " + std::to_string(p.turn_index) + " outside [0, max_turns)");
      }
      corpus.pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw CorpusError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw CorpusError("corpus has no header line");
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CorpusError("cannot write corpus file " + path.string());
  os << serialize_corpus(corpus);
  if (!os) throw CorpusError("failed writing corpus file " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorpusError("cannot read corpus file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_corpus(ss.str());
}

}  // namespace hvslu
