#include "hvslu/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace hvslu;

namespace {

FeatureSynthConfig fixed_duration(int frames) {
  FeatureSynthConfig c;
  c.noise_sigma = 0.0;
  c.min_frames_per_char = c.max_frames_per_char = frames;
  c.edge_silence_frames = 0;
  return c;
}

}  // namespace

TEST(Synth, NoiselessTiling) {
  FeatureSynthesizer s(fixed_duration(3));
  const std::string text = "hi there";
  const Tensor f = s.synthesize(text, 11);
  ASSERT_EQ(f.shape(), (Shape{16, 3 * static_cast<Index>(text.size())}));
  for (std::size_t i = 0; i < text.size(); ++i) {
    const RowVector p = s.prototype(text[i]);
    for (Index k = 0; k < 3; ++k) {
      EXPECT_EQ((f.value().col(static_cast<Index>(3 * i) + k).transpose() - p).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Synth, EdgeSilence) {
  auto c = fixed_duration(2);
  c.edge_silence_frames = 4;
  FeatureSynthesizer s(c);
  const Tensor f = s.synthesize("ab", 1);
  EXPECT_EQ(f.shape()[1], 4 + 4 + 4);
  EXPECT_EQ(f.value().col(0).transpose(), s.prototype(' '));
  EXPECT_EQ(f.value().col(11).transpose(), s.prototype(' '));
}

TEST(Synth, DurationsWithinRange) {
  FeatureSynthConfig c;
  c.edge_silence_frames = 0;
  FeatureSynthesizer s(c);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Index t = s.synthesize("abcdef", seed).shape()[1];
    EXPECT_GE(t, 2 * 6);
    EXPECT_LE(t, 4 * 6);
  }
}

TEST(Synth, Deterministic) {
  FeatureSynthesizer a{FeatureSynthConfig{}}, b{FeatureSynthConfig{}};
  EXPECT_EQ(a.prototypes(), b.prototypes());
  EXPECT_EQ(a.synthesize("book a room", 5).value(), b.synthesize("book a room", 5).value());
  EXPECT_NE(a.synthesize("book a room", 5).value(), a.synthesize("book a room", 6).value());
}

TEST(Synth, PrototypesSeparated) {
  FeatureSynthesizer s{FeatureSynthConfig{}};
  const Matrix& p = s.prototypes();
  ASSERT_EQ(p.rows(), 27);
  double closest = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index j = i + 1; j < p.rows(); ++j) closest = std::min(closest, (p.row(i) - p.row(j)).norm());
  }
  EXPECT_GE(closest, 0.5);
}

TEST(Synth, Errors) {
  FeatureSynthesizer s{FeatureSynthConfig{}};
  EXPECT_THROW(s.synthesize("caf\xc3\xa9", 1), std::invalid_argument);
  EXPECT_THROW(s.synthesize("ABC", 1), std::invalid_argument);
  auto bad = FeatureSynthConfig{};
  bad.min_frames_per_char = 5;
  EXPECT_THROW(FeatureSynthesizer{bad}, std::invalid_argument);
  bad = FeatureSynthConfig{};
  bad.min_separation = 100.0;
  EXPECT_THROW(FeatureSynthesizer{bad}, std::runtime_error);
  EXPECT_EQ(FeatureSynthConfig::from_json(FeatureSynthConfig{}.to_json()).to_json(), FeatureSynthConfig{}.to_json());
}

TEST(Spectrogram, FrameCount) {
  const double rate = 8000.0;  // window 160, hop 80
  for (std::size_t n : {160u, 239u, 240u, 1000u, 8000u}) {
    std::vector<double> x(n, 0.1);
    EXPECT_EQ(power_spectrum(x, rate).cols(), static_cast<Index>((n - 160) / 80 + 1)) << n;
    EXPECT_EQ(power_spectrum(x, rate).rows(), 81);
  }
  std::vector<double> short_wave(159, 0.0);
  EXPECT_THROW(power_spectrum(short_wave, rate), std::invalid_argument);
}

TEST(Spectrogram, ZeroWaveform) {
  std::vector<double> x(800, 0.0);
  const Tensor s = spectrogram(x, 8000.0);
  EXPECT_TRUE(s.value().allFinite());
  EXPECT_EQ(s.value().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Spectrogram, SinusoidAtBinCentre) {
  const double rate = 8000.0;
  const int window = 160, bin = 10;
  const double freq = bin * rate / window;
  std::vector<double> x(1200);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  const Matrix p = power_spectrum(x, rate);
  for (Index f = 0; f < p.cols(); ++f) {
    Index peak = 0;
    p.col(f).maxCoeff(&peak);
    EXPECT_EQ(peak, bin);
    // the Hann window leaks half the amplitude into each neighbour
    EXPECT_NEAR(p(bin, f) / p.col(f).sum(), 2.0 / 3.0, 1e-6);
    // direct complex transform of the same frame
    for (int k : {bin - 1, bin, bin + 1, 30}) {
      std::complex<double> acc = 0.0;
      for (int i = 0; i < window; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / window);
        acc += w * x[static_cast<std::size_t>(f * 80 + i)] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / window);
      }
      EXPECT_NEAR(p(k, f), std::norm(acc), 1e-9 * std::max(1.0, std::norm(acc)));
    }
  }
}

TEST(Spectrogram, NormalizedPerBin) {
  std::vector<double> x(4000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * static_cast<double>(i)) * (1.0 + 0.001 * static_cast<double>(i));
  const Matrix s = spectrogram(x, 8000.0).value();
  const Matrix p = power_spectrum(x, 8000.0);
  for (Index k = 0; k < s.rows(); ++k) {
    EXPECT_NEAR(s.row(k).mean(), 0.0, 1e-9);
    // unit variance up to the 1e-12 floor on tiny bins
    const double v = (p.row(k).array() - p.row(k).mean()).square().mean();
    EXPECT_NEAR((s.row(k).array() - s.row(k).mean()).square().mean(), v / (v + 1e-12), 1e-9);
  }
}
