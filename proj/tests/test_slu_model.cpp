#include "hvslu/experiment.hpp"
#include "hvslu/slu_model.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace hvslu;

namespace {

OutputAlphabet alphabet30() {
  // blank, space, 26 graphemes, one concept, close
  return OutputAlphabet::slu("abcdefghijklmnopqrstuvwxyz", {"city"});
}

// Independent tally: conv weights and biases, LSTM input/recurrent/bias
// blocks per direction, output layer.
Index tally(Index feature_dim, Index channels, Index kernel, Index stride, Index pad, Index hidden, Index layers,
            Index alphabet, Index hdim) {
  Index params = channels * kernel * kernel + channels;
  const Index freq = (feature_dim + 2 * pad - kernel) / stride + 1;
  Index in = channels * freq;
  for (Index l = 0; l < layers; ++l) {
    const Index per_dir = 4 * hidden * in + 4 * hidden * hidden + 4 * hidden + (l == 0 ? 4 * hidden * hdim : 0);
    params += 2 * per_dir;
    in = 2 * hidden;
  }
  return params + 2 * hidden * alphabet + alphabet;
}

Utterance make_utterance(const FeatureSynthesizer& synth, const OutputAlphabet& a, const std::string& tagged,
                         std::uint64_t seed, const HVector& h = zero_hvector()) {
  Utterance u;
  u.id = "u" + std::to_string(seed);
  u.reference = ConceptTaggedTranscript::parse(tagged);
  u.features = synth.synthesize(u.reference.plain, seed);
  u.labels = encode_transcript(a, tagged);
  u.h = h;
  return u;
}

bool same_bytes(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.value().data(), b.value().data(), sizeof(double) * static_cast<std::size_t>(a.numel())) == 0;
}

}  // namespace

TEST(Model, DeskParameterCountClosedForm) {
  ModelConfig off = ModelConfig::desk();
  off.injection = false;
  const SignalToConceptModel m(off, alphabet30(), 1);
  ASSERT_EQ(alphabet30().size(), 30);
  EXPECT_EQ(m.parameter_count(), tally(16, 8, 5, 2, 2, 48, 2, 30, 0));
  EXPECT_EQ(m.parameter_count(), 102190);
  EXPECT_EQ(closed_form_parameter_count(off, 30), 102190);
}

TEST(Model, InjectionAddsInputColumnsOnly) {
  ModelConfig off = ModelConfig::desk();
  off.injection = false;
  const ModelConfig on = ModelConfig::desk();
  const SignalToConceptModel a(off, alphabet30(), 1), b(on, alphabet30(), 1);
  EXPECT_EQ(b.parameter_count() - a.parameter_count(), 2 * 100 * 4 * 48);
  EXPECT_EQ(b.hvec_weight_fwd.shape(), (Shape{100, 192}));
  EXPECT_EQ(on.recurrent_input_dim(), off.recurrent_input_dim() + 100);
}

TEST(Model, PaperGeometry) {
  const ModelConfig p = ModelConfig::paper();
  EXPECT_EQ(p.convs.size(), 2u);
  EXPECT_EQ(p.convs[0].geometry.out_time(100), 50);
  EXPECT_EQ(p.output_time(100), 25);
  EXPECT_EQ(p.recurrent_layers, 5);
  EXPECT_EQ(p.hidden, 800);
  EXPECT_TRUE(p.batch_norm);
  // freq 81 -> 41 -> 21, 32 channels
  const Index conv = (32 * 41 * 11 + 32) + (32 * 32 * 41 * 11 + 32);
  const Index first = 2 * (4 * 800 * (32 * 21) + 4 * 800 * 800 + 4 * 800 + 4 * 800 * 100);
  const Index rest = 4 * (2 * (4 * 800 * 1600 + 4 * 800 * 800 + 4 * 800) + 2 * 1600);
  EXPECT_EQ(closed_form_parameter_count(p, 30), conv + first + rest + 1600 * 30 + 30);
}

TEST(Model, OutputTimeFollowsConvArithmetic) {
  const SignalToConceptModel m(ModelConfig::desk(), alphabet30(), 1);
  Rng rng(3);
  for (Index t : {9, 18, 40, 80}) {
    Tensor x = hvslu::testing::random_tensor({16, t}, rng, -1.0, 1.0);
    const Tensor lp = m.forward(x, zero_hvector());
    EXPECT_EQ(lp.dim(0), (t + 4 - 5) / 2 + 1);
    EXPECT_EQ(lp.dim(1), 30);
    EXPECT_LT((lp.value().array().exp().rowwise().sum() - 1.0).abs().maxCoeff(), 1e-9);
  }
  Tensor x = hvslu::testing::random_tensor({15, 20}, rng, -1.0, 1.0);
  EXPECT_THROW(m.forward(x, zero_hvector()), ShapeError);
  EXPECT_THROW(m.forward(hvslu::testing::random_tensor({16, 20}, rng, -1.0, 1.0), zero_hvector(50)), ShapeError);
}

TEST(Model, InjectHvector) {
  Tape tape;
  Matrix frames_m(3, 2);
  frames_m << 1, 2, 3, 4, 5, 6;
  const Tensor frames = Tensor::from_matrix(frames_m);
  const Tensor h = Tensor::from_matrix((Matrix(1, 2) << 7, 8).finished());
  const Tensor out = inject_hvector(tape, frames, h);
  ASSERT_EQ(out.shape(), (Shape{3, 4}));
  for (Index t = 0; t < 3; ++t) {
    EXPECT_EQ(out.value()(t, 2), 7.0);
    EXPECT_EQ(out.value()(t, 3), 8.0);
  }
  const Tensor zero = inject_hvector(tape, frames, Tensor::zeros({1, 5}));
  EXPECT_EQ(zero.value().rightCols(5).cwiseAbs().maxCoeff(), 0.0);
  const Tensor single = inject_hvector(tape, Tensor::from_matrix(frames_m.topRows(1)), h);
  EXPECT_EQ(single.value(), (Matrix(1, 4) << 1, 2, 7, 8).finished());
}

TEST(Model, FusedInjectionMatchesConcatenation) {
  // The model folds the h-vector into the first input projection; compare
  // with running the first layer on explicitly concatenated frames.
  ModelConfig one = ModelConfig::desk();
  one.recurrent_layers = 1;
  const SignalToConceptModel m(one, alphabet30(), 4);
  Rng rng(5);
  const Tensor x = hvslu::testing::random_tensor({16, 14}, rng, -1.0, 1.0);
  const HVector h = make_hvector(RowVector::Random(98), 3, 15, 100);
  Tape tape;
  tape.set_recording(false);
  const Tensor frames = m.conv_frames(tape, x);
  const auto& bi = m.layers[0];
  auto widened = [&](const LstmCell& cell, const Tensor& extra) {
    LstmCell c(cell.input_dim() + 100, cell.hidden_dim(), rng);
    Matrix w(cell.input_weight.dim(0) + 100, cell.input_weight.dim(1));
    w << cell.input_weight.value(), extra.value();
    c.input_weight = Tensor::from_matrix(w);
    c.recurrent_weight = cell.recurrent_weight;
    c.bias = cell.bias;
    return c;
  };
  BiRecurrentLayer<LstmCell> wide(widened(bi.forward_cell, m.hvec_weight_fwd),
                                  widened(bi.backward_cell, m.hvec_weight_bwd));
  const Tensor hidden = wide.run(tape, inject_hvector(tape, frames, Tensor::from_matrix(h.values)));
  const Tensor expect = ops::log_softmax_rows(tape, m.output.forward(tape, hidden));
  EXPECT_LT((m.forward(x, h).value() - expect.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Model, ZeroedHColumnsEqualInjectionOff) {
  ModelConfig off = ModelConfig::desk();
  off.injection = false;
  SignalToConceptModel on_model(ModelConfig::desk(), alphabet30(), 8);
  SignalToConceptModel off_model(off, alphabet30(), 8);
  off_model.convs = on_model.clone().convs;
  off_model.layers = on_model.clone().layers;
  off_model.output = on_model.clone().output;
  on_model.hvec_weight_fwd.mutable_value().setZero();
  on_model.hvec_weight_bwd.mutable_value().setZero();
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = hvslu::testing::random_tensor({16, 30}, rng, -1.0, 1.0);
    const HVector h = make_hvector(RowVector::Random(98), trial, 15, 100);
    EXPECT_TRUE(same_bytes(on_model.forward(x, h), off_model.forward(x, h)));
  }
}

TEST(Model, DecodeIsTotalAndDeterministic) {
  const SignalToConceptModel m(ModelConfig::desk(), alphabet30(), 2);
  FeatureSynthesizer synth{FeatureSynthConfig{}};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor f = synth.synthesize("book a room in paris", s);
    const DecodeResult a = decode_utterance(m, f, zero_hvector());
    const DecodeResult b = decode_utterance(m, f, zero_hvector());
    EXPECT_EQ(a.symbols, b.symbols);
    EXPECT_EQ(a.transcript.tagged, b.transcript.tagged);
  }
}

TEST(Model, CheckpointRoundTripBitIdentical) {
  SignalToConceptModel m(ModelConfig::desk(), alphabet30(), 3);
  m.hvec_weight_fwd.mutable_value()(0, 0) = 0.123456789;
  const Checkpoint ck = model_checkpoint(m, Phase::direct, {{"note", "x"}});
  const SignalToConceptModel back = model_from_checkpoint(parse_checkpoint(serialize_checkpoint(ck)));
  EXPECT_EQ(serialize_checkpoint(model_checkpoint(back, Phase::direct, {{"note", "x"}})), serialize_checkpoint(ck));
  Rng rng(4);
  const Tensor x = hvslu::testing::random_tensor({16, 25}, rng, -1.0, 1.0);
  const HVector h = make_hvector(RowVector::Random(98), 2, 15, 100);
  EXPECT_TRUE(same_bytes(m.forward(x, h), back.forward(x, h)));
}

TEST(Model, ArchitectureMismatch) {
  const SignalToConceptModel m(ModelConfig::desk(), alphabet30(), 3);
  const Checkpoint ck = model_checkpoint(m, Phase::pretrain_zero);
  ModelConfig other = ModelConfig::desk();
  other.hidden = 32;
  EXPECT_THROW(require_same_architecture(ck, other), CheckpointError);
  EXPECT_NO_THROW(require_same_architecture(ck, ModelConfig::desk()));
  SignalToConceptModel smaller(other, alphabet30(), 3);
  EXPECT_THROW(ck.restore(smaller.parameters()), CheckpointError);
}

TEST(Transfer, SwapCopiesEverythingBelowOutput) {
  const OutputAlphabet asr = OutputAlphabet::asr("abcdefghijklmnopqrstuvwxyz");
  const OutputAlphabet sf = asr.with_concepts({"city", "date"});
  SignalToConceptModel src(ModelConfig::desk(), asr, 5);
  const SignalToConceptModel dst = transfer_swap_softmax(src, sf, 6);
  EXPECT_EQ(dst.alphabet(), sf);
  const auto a = src.parameters(), b = dst.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].name, b[i].name);
    if (a[i].name.starts_with("output")) continue;
    EXPECT_TRUE(same_bytes(a[i].tensor, b[i].tensor)) << a[i].name;
    // independent storage
    EXPECT_NE(a[i].tensor.value().data(), b[i].tensor.value().data()) << a[i].name;
  }
  EXPECT_EQ(dst.output.weight.shape(), (Shape{96, sf.size()}));
  EXPECT_EQ(Matrix(dst.output.weight.value().leftCols(asr.size())), src.output.weight.value());
  EXPECT_EQ(Matrix(dst.output.bias.value().leftCols(asr.size())), src.output.bias.value());
  EXPECT_NE(dst.output.weight.value().rightCols(3).cwiseAbs().maxCoeff(), 0.0);
  // mutating the new model leaves the source alone
  const Matrix before = src.layers[0].forward_cell.input_weight.value();
  SignalToConceptModel copy = dst.clone();
  copy.layers[0].forward_cell.input_weight.mutable_value()(0, 0) += 1.0;
  EXPECT_EQ(src.layers[0].forward_cell.input_weight.value(), before);
}

TEST(Transfer, PrefixViolation) {
  const SignalToConceptModel src(ModelConfig::desk(), OutputAlphabet::asr("abc"), 5);
  EXPECT_THROW(transfer_swap_softmax(src, OutputAlphabet::slu("abd", {"city"}), 1), std::invalid_argument);
}

TEST(Training, MemorizesOneUtterance) {
  const OutputAlphabet a = OutputAlphabet::slu("abcdefghijklmnopqrstuvwxyz", {"city", "date"});
  FeatureSynthesizer synth{FeatureSynthConfig{}};
  const std::string tagged = "to <city> paris </> on <date> monday </>";
  const std::vector<Utterance> data = {make_utterance(synth, a, tagged, 17)};
  SignalToConceptModel m(ModelConfig::desk(), a, 1);
  TrainingSchedule s;
  s.epochs = 200;
  s.batch_size = 1;
  s.optimizer.learning_rate = 1e-2;
  double best = std::numeric_limits<double>::infinity();
  const TrainResult r = train_model(m, data, data, s, nullptr, [&](const EpochLog& e) {
    if (e.epoch > 0) best = std::min(best, e.train_loss);
  });
  EXPECT_LT(best, 0.1);
  EXPECT_EQ(r.log.size(), 201u);
  const DecodeResult d = decode_utterance(m, data[0].features, data[0].h);
  EXPECT_EQ(d.transcript.tagged, tagged);
  EXPECT_EQ(d.transcript.concepts, ConceptTaggedTranscript::parse(tagged).tag_values());
}

TEST(Training, DeterministicAndPretrainContinuity) {
  const OutputAlphabet a = OutputAlphabet::slu("abcdefghijklmnopqrstuvwxyz", {"city"});
  FeatureSynthesizer synth{FeatureSynthConfig{}};
  std::vector<Utterance> train = {make_utterance(synth, a, "<city> paris </>", 1),
                                  make_utterance(synth, a, "ok <city> nice </> please", 2),
                                  make_utterance(synth, a, "no thanks", 3)};
  std::vector<Utterance> dev = {make_utterance(synth, a, "<city> lyon </>", 4)};
  TrainingSchedule s;
  s.phase = Phase::pretrain_zero;
  s.epochs = 2;
  SignalToConceptModel m1(ModelConfig::desk(), a, 1), m2(ModelConfig::desk(), a, 1);
  const TrainResult r1 = train_model(m1, train, dev, s);
  const TrainResult r2 = train_model(m2, train, dev, s);
  ASSERT_EQ(r1.log.size(), 3u);
  for (std::size_t i = 0; i < r1.log.size(); ++i) EXPECT_EQ(r1.log[i].dev_loss, r2.log[i].dev_loss);
  EXPECT_TRUE(std::isnan(r1.log[0].train_loss));

  SignalToConceptModel restored = model_from_checkpoint(parse_checkpoint(serialize_checkpoint(model_checkpoint(m1, Phase::pretrain_zero))));
  TrainingSchedule f = s;
  f.phase = Phase::finetune;
  f.epochs = 0;
  const TrainResult fr = train_model(restored, train, dev, f, nullptr);
  EXPECT_EQ(fr.log[0].dev_loss, r1.log.back().dev_loss);
}

TEST(Training, ExtractorFrozenUnlessJoint) {
  GeneratorConfig g;
  g.n_dialogs = 12;
  const Corpus corpus = generate_corpus(g);
  ExtractorConfig ec;
  ec.epochs = 1;
  const ExtractorRun run = train_extractor(corpus, ExtractorKind::supervised_all, ec);
  const OutputAlphabet a = slu_alphabet(g);
  FeatureSynthesizer synth{FeatureSynthConfig{}};
  auto train = build_utterances(corpus.split(Split::train), synth, a, run.extractor);
  train.resize(4);
  const auto snapshot = [&] {
    std::vector<Matrix> out;
    for (const auto& p : run.extractor.content_parameters()) out.push_back(p.tensor.value());
    return out;
  };
  const auto before = snapshot();
  TrainingSchedule s;
  s.epochs = 1;
  SignalToConceptModel m(ModelConfig::desk(), a, 1);
  train_model(m, train, {}, s, &run.extractor);
  EXPECT_EQ(snapshot(), before);

  s.joint_extractor = true;
  train_model(m, train, {}, s, &run.extractor);
  EXPECT_NE(snapshot(), before);
}

TEST(Training, Errors) {
  const OutputAlphabet a = OutputAlphabet::slu("abcdefghijklmnopqrstuvwxyz", {"city"});
  FeatureSynthesizer synth{FeatureSynthConfig{}};
  SignalToConceptModel m(ModelConfig::desk(), a, 1);
  TrainingSchedule s;
  EXPECT_THROW(train_model(m, {}, {}, s), std::invalid_argument);
  // 12 labels cannot fit in the frames left after striding a 4-frame input
  Utterance u = make_utterance(synth, a, "abcdefghijkl", 1);
  u.features = Tensor::zeros({16, 4});
  EXPECT_THROW(train_model(m, {u}, {}, s), std::invalid_argument);
  Utterance ok = make_utterance(synth, a, "<city> paris </>", 2);
  s.epochs = 1;
  const TrainResult r = train_model(m, {u, ok}, {}, s);
  EXPECT_EQ(r.skipped_train, 1u);
}
