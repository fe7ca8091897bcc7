#pragma once

#include "hvslu/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>

namespace hvslu {

struct FeatureSynthConfig {
  std::uint64_t seed = 7;
  Index feature_dim = 16;
  int min_frames_per_char = 2;
  int max_frames_per_char = 4;
  int edge_silence_frames = 4;  // space-prototype frames at each end
  double noise_sigma = 0.1;
  double min_separation = 0.5;  // pairwise Euclidean distance between prototypes
  std::string graphemes = "abcdefghijklmnopqrstuvwxyz";

  nlohmann::json to_json() const;
  static FeatureSynthConfig from_json(const nlohmann::json& j);
};

// Stands in for acoustics: every character (and the space) owns a random
// prototype vector; an utterance is the concatenation of per-character
// blocks of noisy prototype frames.
class FeatureSynthesizer {
 public:
  explicit FeatureSynthesizer(FeatureSynthConfig config);

  // [feature_dim, time]
  Tensor synthesize(const std::string& plain_text, std::uint64_t utterance_seed) const;

  const FeatureSynthConfig& config() const { return config_; }
  // Row i is the prototype of symbol i: space first, then the graphemes.
  const Matrix& prototypes() const { return prototypes_; }
  RowVector prototype(char c) const;

 private:
  FeatureSynthConfig config_;
  Matrix prototypes_;
};

// Power spectrum of Hann-windowed frames: [window/2 + 1, frames], where
// frames = floor((samples - window) / hop) + 1.
Matrix power_spectrum(std::span<const double> samples, double sample_rate, double window_ms = 20.0,
                      double hop_ms = 10.0);

// Power spectrum normalized per frequency bin to zero mean and unit
// variance over the utterance.
Tensor spectrogram(std::span<const double> samples, double sample_rate, double window_ms = 20.0,
                   double hop_ms = 10.0);

}  // namespace hvslu
