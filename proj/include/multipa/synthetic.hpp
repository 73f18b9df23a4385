#pragma once

// Synthetic labelled corpus in the tone-speech model family. Each simulated
// speaker has a skill level that controls phone substitutions, omitted
// words, rushed stressed vowels, hesitation pauses and timing jitter; the
// human-style labels are computed from exactly those manipulations, so the
// corpus carries a learnable signal for every score dimension.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "multipa/dataset.hpp"
#include "multipa/types.hpp"

namespace multipa {

struct SyntheticCorpusOptions {
  std::size_t train_utterances = 40;
  std::size_t test_utterances = 20;
  std::size_t speakers = 8;
  std::size_t min_words = 3;
  std::size_t max_words = 6;
  double substitution_rate = 0.15;  // per phone, for the least skilled speaker
  double omission_rate = 0.12;      // per word, for the least skilled speaker
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

struct SyntheticUtterance {
  DatasetRecord record;  // audio_path left empty until written
  AudioClip audio;
};

std::vector<SyntheticUtterance> generate_synthetic_corpus(const SyntheticCorpusOptions& options);

// Writes wav/<id>.wav plus train.json and test.json under out_dir.
void write_synthetic_corpus(const std::filesystem::path& out_dir, const SyntheticCorpusOptions& options);

}  // namespace multipa
