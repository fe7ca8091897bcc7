#include "hvslu/features.hpp"

#include "hvslu/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hvslu {

nlohmann::json FeatureSynthConfig::to_json() const {
  return {{"seed", seed},
          {"feature_dim", feature_dim},
          {"min_frames_per_char", min_frames_per_char},
          {"max_frames_per_char", max_frames_per_char},
          {"edge_silence_frames", edge_silence_frames},
          {"noise_sigma", noise_sigma},
          {"min_separation", min_separation},
          {"graphemes", graphemes}};
}

FeatureSynthConfig FeatureSynthConfig::from_json(const nlohmann::json& j) {
  FeatureSynthConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.feature_dim = j.at("feature_dim").get<Index>();
  c.min_frames_per_char = j.at("min_frames_per_char").get<int>();
  c.max_frames_per_char = j.at("max_frames_per_char").get<int>();
  c.edge_silence_frames = j.at("edge_silence_frames").get<int>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.min_separation = j.at("min_separation").get<double>();
  c.graphemes = j.at("graphemes").get<std::string>();
  return c;
}

FeatureSynthesizer::FeatureSynthesizer(FeatureSynthConfig config) : config_(std::move(config)) {
  if (config_.feature_dim < 1) throw std::invalid_argument("feature_dim must be positive");
  if (config_.min_frames_per_char < 1 || config_.max_frames_per_char < config_.min_frames_per_char) {
    throw std::invalid_argument("frames per character range is invalid");
  }
  if (config_.noise_sigma < 0.0 || config_.edge_silence_frames < 0) {
    throw std::invalid_argument("noise_sigma and edge_silence_frames must be non-negative");
  }
  const Index symbols = static_cast<Index>(config_.graphemes.size()) + 1;
  prototypes_ = Matrix::Zero(symbols, config_.feature_dim);
  Rng rng(config_.seed);
  constexpr int kMaxDraws = 10000;
  for (Index s = 0; s < symbols; ++s) {
    int draws = 0;
    while (true) {
      if (++draws > kMaxDraws) {
        throw std::runtime_error("cannot place prototypes with the requested separation");
      }
      for (Index d = 0; d < config_.feature_dim; ++d) prototypes_(s, d) = rng.uniform(-1.0, 1.0);
      bool separated = true;
      for (Index o = 0; o < s && separated; ++o) {
        separated = (prototypes_.row(s) - prototypes_.row(o)).norm() >= config_.min_separation;
      }
      if (separated) break;
    }
  }
}

RowVector FeatureSynthesizer::prototype(char c) const {
  if (c == ' ') return prototypes_.row(0);
  auto pos = config_.graphemes.find(c);
  if (pos == std::string::npos) {
    throw std::invalid_argument(std::string("feature synthesis: unknown character '") + c + "'");
  }
  return prototypes_.row(static_cast<Index>(pos) + 1);
}

Tensor FeatureSynthesizer::synthesize(const std::string& plain_text, std::uint64_t utterance_seed) const {
  Rng rng(mix_seed(config_.seed, utterance_seed));
  std::vector<RowVector> blocks;
  std::vector<int> durations;
  auto add = [&](char c, int frames) {
    blocks.push_back(prototype(c));
    durations.push_back(frames);
  };
  if (config_.edge_silence_frames > 0) add(' ', config_.edge_silence_frames);
  for (char c : plain_text) {
    const RowVector p = prototype(c);  // validates before drawing
    (void)p;
    add(c, static_cast<int>(rng.uniform_int(config_.min_frames_per_char, config_.max_frames_per_char)));
  }
  if (config_.edge_silence_frames > 0) add(' ', config_.edge_silence_frames);

  Index total = 0;
  for (int d : durations) total += d;
  if (total == 0) throw std::invalid_argument("feature synthesis: empty utterance");
  Matrix features(config_.feature_dim, total);
  Index t = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (int k = 0; k < durations[b]; ++k, ++t) {
      for (Index d = 0; d < config_.feature_dim; ++d) {
        features(d, t) = blocks[b](d) + (config_.noise_sigma > 0.0 ? config_.noise_sigma * rng.normal() : 0.0);
      }
    }
  }
  return Tensor({config_.feature_dim, total}, std::move(features));
}

Matrix power_spectrum(std::span<const double> samples, double sample_rate, double window_ms,
                      double hop_ms) {
  if (sample_rate <= 0.0) throw std::invalid_argument("spectrogram: sample rate must be positive");
  const auto window = static_cast<Index>(std::lround(sample_rate * window_ms / 1000.0));
  const auto hop = static_cast<Index>(std::lround(sample_rate * hop_ms / 1000.0));
  if (window < 2 || hop < 1) throw std::invalid_argument("spectrogram: window or hop too short");
  const auto n = static_cast<Index>(samples.size());
  if (n < window) {
    throw std::invalid_argument("spectrogram: waveform of " + std::to_string(n) +
                                " samples is shorter than one window of " + std::to_string(window));
  }
  const Index frames = (n - window) / hop + 1;
  const Index bins = window / 2 + 1;
  Vector hann(window);
  for (Index i = 0; i < window; ++i) {
    hann(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(window));
  }
  // Direct DFT; windows are a few hundred samples at speech rates.
  Matrix cos_table(bins, window), sin_table(bins, window);
  for (Index k = 0; k < bins; ++k) {
    for (Index i = 0; i < window; ++i) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * i % window) / static_cast<double>(window);
      cos_table(k, i) = std::cos(angle);
      sin_table(k, i) = std::sin(angle);
    }
  }
  Matrix power(bins, frames);
  for (Index f = 0; f < frames; ++f) {
    Vector x(window);
    for (Index i = 0; i < window; ++i) x(i) = samples[static_cast<std::size_t>(f * hop + i)] * hann(i);
    Vector re = cos_table * x;
    Vector im = sin_table * x;
    power.col(f) = re.cwiseAbs2() + im.cwiseAbs2();
  }
  return power;
}

Tensor spectrogram(std::span<const double> samples, double sample_rate, double window_ms, double hop_ms) {
  Matrix power = power_spectrum(samples, sample_rate, window_ms, hop_ms);
  constexpr double kVarianceFloor = 1e-12;
  for (Index k = 0; k < power.rows(); ++k) {
    const double mean = power.row(k).mean();
    const double var = (power.row(k).array() - mean).square().mean();
    power.row(k) = ((power.row(k).array() - mean) / std::sqrt(var + kVarianceFloor)).matrix();
  }
  const Shape shape{power.rows(), power.cols()};
  return Tensor(shape, std::move(power));
}

}  // namespace hvslu
