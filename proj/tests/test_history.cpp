#include "hvslu/experiment.hpp"
#include "hvslu/history.hpp"

#include <gtest/gtest.h>

using namespace hvslu;

namespace {

ExtractorConfig quick(int epochs) {
  ExtractorConfig c;
  c.epochs = epochs;
  return c;
}

using Prompts = std::vector<std::vector<std::string>>;

}  // namespace

TEST(TurnDims, Examples) {
  EXPECT_EQ(encode_turn_dims(0, 20), (RowVector(2) << 0.0, 1.0).finished());
  EXPECT_EQ(encode_turn_dims(10, 20), (RowVector(2) << 0.5, 0.0).finished());
  EXPECT_EQ(encode_turn_dims(25, 20), (RowVector(2) << 1.0, 0.0).finished());
  EXPECT_THROW(encode_turn_dims(-1, 20), std::invalid_argument);
  EXPECT_THROW(encode_turn_dims(1, 0), std::invalid_argument);
}

TEST(TurnDims, SliceWidth) {
  EXPECT_EQ(turn_dims_for(100), 2);
  EXPECT_EQ(turn_dims_for(10), 1);
  EXPECT_EQ(turn_dims_for(250), 5);
  const RowVector wide = encode_turn_dims(0, 15, 5);
  EXPECT_EQ(wide, (RowVector(5) << 0.0, 1.0, 0.0, 0.0, 0.0).finished());
}

TEST(HVector, ZeroAndLayout) {
  const HVector z = zero_hvector();
  EXPECT_EQ(z.dim(), 100);
  EXPECT_EQ(z.values.cwiseAbs().maxCoeff(), 0.0);
  const HVector h = make_hvector(RowVector::Constant(98, 0.25), 3, 15, 100);
  EXPECT_EQ(h.content_dim, 98);
  EXPECT_EQ(h.content(), RowVector::Constant(98, 0.25));
  EXPECT_EQ(h.turn(), encode_turn_dims(3, 15));
  EXPECT_THROW(make_hvector(RowVector::Zero(97), 3, 15, 100), std::invalid_argument);
}

TEST(SelectFreq, TopK) {
  const std::vector<std::string> inv = {"a", "b", "c", "d", "e"};
  EXPECT_EQ(select_freq_concepts({9, 7, 5, 3, 1}, inv, 4), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(select_freq_concepts({1, 3, 5, 7, 9}, inv, 2), (std::vector<std::string>{"d", "e"}));
  EXPECT_EQ(select_freq_concepts({2, 2, 2, 2, 2}, inv, 4), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(select_freq_concepts({0, 4, 0, 4, 0}, inv, 5), inv);
  EXPECT_EQ(select_freq_concepts({0, 4, 0, 4, 1}, inv, 3), (std::vector<std::string>{"b", "d", "e"}));
  EXPECT_THROW(select_freq_concepts({1, 1, 1, 1, 1}, inv, 6), std::invalid_argument);
  EXPECT_THROW(select_freq_concepts({1, 1}, inv, 1), std::invalid_argument);
}

TEST(Vocab, ReservedIdsAndUnknowns) {
  const auto v = PromptVocab::build({{"which", "date"}, {"which", "city"}});
  EXPECT_EQ(v.size(), 3 + 3);
  EXPECT_EQ(v.id("zebra"), PromptVocab::kUnk);
  EXPECT_EQ(v.encode({"which", "zebra"}), (std::vector<int>{v.id("which"), PromptVocab::kUnk}));
  EXPECT_EQ(PromptVocab::from_words(v.words()), v);
}

TEST(BagPredictor, MemorizesOnePair) {
  const Prompts prompts = {{"which", "arrival", "date", "please"}};
  PromptBagPredictor bp(quick(200), PromptVocab::build(prompts), {"date", "city", "price"});
  std::vector<BagExample> ex = {{prompts[0], {1.0, 0.0, 1.0}, 2}};
  const auto log = train_bag_predictor(bp, ex, ex);
  EXPECT_EQ(evaluate_bag_predictor(bp, ex).subset_accuracy, 1.0);
  EXPECT_EQ(bp.predict(prompts[0], 2), (std::vector<std::uint8_t>{1, 0, 1}));
  EXPECT_LT(log.back().train_loss, log.front().train_loss);
}

TEST(BagPredictor, Errors) {
  const Prompts prompts = {{"which", "date"}};
  PromptBagPredictor bp(quick(1), PromptVocab::build(prompts), {"date", "city"});
  EXPECT_THROW(train_bag_predictor(bp, {}, {}), std::invalid_argument);
  std::vector<BagExample> wrong = {{prompts[0], {1.0}, 0}};
  EXPECT_THROW(train_bag_predictor(bp, wrong, {}), std::invalid_argument);
  EXPECT_THROW(extract_hvector(bp, prompts[0], 0, 15), std::logic_error);
  EXPECT_THROW(PromptBagPredictor(quick(1), PromptVocab::build(prompts), {}), std::invalid_argument);
}

TEST(BagPredictor, SubsetTargetsIgnoreOtherTags) {
  GeneratorConfig g;
  g.n_dialogs = 20;
  const Corpus corpus = generate_corpus(g);
  const auto ex = bag_examples(corpus.split(Split::train), {"city"});
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const auto tags = corpus.split(Split::train)[i]->user.tags();
    EXPECT_EQ(ex[i].targets, std::vector<double>{std::ranges::count(tags, "city") > 0 ? 1.0 : 0.0});
  }
}

TEST(BagPredictor, DecisionWidthAndContentIsPreDecision) {
  const Prompts prompts = {{"which", "arrival", "date"}, {"which", "city"}};
  PromptBagPredictor bp(quick(30), PromptVocab::build(prompts), {"date", "city"});
  std::vector<BagExample> ex = {{prompts[0], {1.0, 0.0}, 0}, {prompts[1], {0.0, 1.0}, 1}};
  train_bag_predictor(bp, ex, ex);
  EXPECT_EQ(bp.decision.output_dim(), 2);
  EXPECT_EQ(bp.decision.input_dim(), 100);
  const HVector a = extract_hvector(bp, prompts[0], 4, 15);
  const HVector again = extract_hvector(bp, prompts[0], 4, 15);
  EXPECT_EQ(a.values, again.values);
  EXPECT_EQ(a.dim(), 100);
  EXPECT_EQ(a.turn(), encode_turn_dims(4, 15));
  // content is the tanh embedding, so bounded
  EXPECT_LE(a.content().cwiseAbs().maxCoeff(), 1.0);
  const HVector b = extract_hvector(bp, prompts[1], 4, 15);
  EXPECT_NE(a.content(), b.content());
  // the decision layer applied to the h-vector reproduces the logits
  Tape tape;
  tape.set_recording(false);
  const Matrix z = bp.logits(tape, bp.vocab().encode(prompts[0]), 4).value();
  const Matrix again_z = (a.values * bp.decision.weight.value()) + bp.decision.bias.value();
  EXPECT_LT((z - again_z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autoencoder, MemorizesOnePrompt) {
  const Prompts prompts = {{"which", "arrival", "date"}};
  PromptAutoencoder ae(quick(150), PromptVocab::build(prompts));
  train_autoencoder(ae, prompts, prompts);
  EXPECT_EQ(evaluate_autoencoder(ae, prompts).accuracy, 1.0);
  EXPECT_EQ(evaluate_autoencoder(ae, prompts).tokens, 4u);
  EXPECT_EQ(ae.reconstruct(prompts[0]), prompts[0]);
}

TEST(Autoencoder, SymmetricWidthsAndCode) {
  const Prompts prompts = {{"which", "arrival", "date"}, {"tell", "me", "the", "city"}};
  PromptAutoencoder ae(quick(5), PromptVocab::build(prompts));
  EXPECT_EQ(ae.encoder.hidden_dim(), ae.decoder.hidden_dim());
  EXPECT_EQ(ae.encoder.hidden_dim(), 98);
  EXPECT_EQ(ae.output.output_dim(), ae.vocab().size());
  EXPECT_THROW(train_autoencoder(ae, {}, {}), std::invalid_argument);
  EXPECT_THROW(extract_hvector(ae, prompts[0], 0, 15), std::logic_error);
  train_autoencoder(ae, prompts, prompts);
  const HVector h = extract_hvector(ae, prompts[1], 0, 15);
  EXPECT_EQ(h.dim(), 100);
  EXPECT_EQ(h.turn(), encode_turn_dims(0, 15));
  EXPECT_EQ(h.values, extract_hvector(ae, prompts[1], 0, 15).values);
  Tape tape;
  tape.set_recording(false);
  EXPECT_EQ(RowVector(ae.code(tape, ae.vocab().encode(prompts[1])).value().row(0)), h.content());
}

TEST(Extractor, CheckpointRoundTrip) {
  const Prompts prompts = {{"which", "arrival", "date"}, {"which", "city"}};
  PromptBagPredictor bp(quick(3), PromptVocab::build(prompts), {"date", "city"});
  train_bag_predictor(bp, {{prompts[0], {1.0, 0.0}, 0}, {prompts[1], {0.0, 1.0}, 1}}, {});
  const HistoryExtractor e = HistoryExtractor::from(std::move(bp), ExtractorKind::supervised_freq);
  const Checkpoint ckpt = parse_checkpoint(serialize_checkpoint(extractor_checkpoint(e)));
  const HistoryExtractor back = extractor_from_checkpoint(ckpt);
  EXPECT_EQ(back.kind(), ExtractorKind::supervised_freq);
  EXPECT_EQ(back.extract(prompts[1], 3).values, e.extract(prompts[1], 3).values);
  EXPECT_EQ(back.predictor()->targets(), e.predictor()->targets());

  PromptAutoencoder ae(quick(2), PromptVocab::build(prompts));
  train_autoencoder(ae, prompts, {});
  const HistoryExtractor u = HistoryExtractor::from(std::move(ae));
  const HistoryExtractor u_back = extractor_from_checkpoint(parse_checkpoint(serialize_checkpoint(extractor_checkpoint(u))));
  EXPECT_EQ(u_back.extract(prompts[0], 0).values, u.extract(prompts[0], 0).values);
}

TEST(Extractor, ZeroSource) {
  const HistoryExtractor z = HistoryExtractor::zero();
  EXPECT_EQ(z.kind(), ExtractorKind::none);
  EXPECT_EQ(z.extract({"which", "city"}, 7).values, zero_hvector().values);
  EXPECT_TRUE(z.parameters().empty());
}

TEST(Extractor, DeskCorpusContentNonDegenerate) {
  GeneratorConfig g;
  g.n_dialogs = 60;
  const Corpus corpus = generate_corpus(g);
  ExtractorConfig c;
  c.epochs = 5;
  const ExtractorRun run = train_extractor(corpus, ExtractorKind::supervised_all, c);
  const auto a = run.extractor.extract({"which", "arrival", "please"}, 1);
  const auto b = run.extractor.extract({"which", "departure", "please"}, 1);
  EXPECT_NE(a.content(), b.content());
  EXPECT_EQ(run.log.size(), 5u);
}

TEST(Extractor, Deterministic) {
  GeneratorConfig g;
  g.n_dialogs = 30;
  const Corpus corpus = generate_corpus(g);
  ExtractorConfig c;
  c.epochs = 2;
  const auto one = train_extractor(corpus, ExtractorKind::unsupervised, c);
  const auto two = train_extractor(corpus, ExtractorKind::unsupervised, c);
  EXPECT_EQ(one.metrics, two.metrics);
  EXPECT_EQ(serialize_checkpoint(extractor_checkpoint(one.extractor)),
            serialize_checkpoint(extractor_checkpoint(two.extractor)));
}
