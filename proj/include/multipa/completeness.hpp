#pragma once

// Forced-alignment completeness: a word the speaker omitted still receives a
// span from the aligner, but a very short one. Words shorter than a duration
// threshold are counted as missing.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "multipa/types.hpp"

namespace multipa {

struct CompletenessConfig {
  double duration_threshold = 0.07;  // seconds
};

struct CompletenessResult {
  double score = 0.0;
  std::vector<bool> complete_flags;
  std::vector<double> durations;
};

// A word is complete iff duration >= threshold. Throws EmptyTranscript on a
// transcript with no words and PreconditionError on a negative threshold.
// Production configs additionally require a positive threshold (see
// AppConfig validation); zero is accepted here as the degenerate case.
CompletenessResult completeness_score(const AlignedTranscript& aligned, const CompletenessConfig& cfg);
CompletenessResult completeness_from_durations(const std::vector<double>& durations, const CompletenessConfig& cfg);

struct Histogram {
  double lo = 0.0;
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
};

Histogram histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins);

struct SimulationReport {
  std::vector<double> complete_durations;
  std::vector<double> incomplete_durations;
  std::vector<double> threshold_grid;
  std::vector<double> f1_per_threshold;
  double best_threshold = 0.0;
  double best_f1 = 0.0;
  Histogram complete_histogram;
  Histogram incomplete_histogram;
  std::size_t skipped_utterances = 0;
};

// 0 .. 0.5 s in 5 ms steps.
std::vector<double> default_threshold_grid();

// F1 of "incomplete" (positive class: duration < threshold) for each grid
// threshold. Ties for the best F1 resolve to the smallest threshold.
SimulationReport sweep_thresholds(const std::vector<double>& complete_durations,
                                  const std::vector<double>& incomplete_durations,
                                  const std::vector<double>& grid = default_threshold_grid());

struct SimulatedUtterance {
  std::string utterance_id;
  AlignedTranscript aligned;   // alignment of the augmented word sequence
  std::size_t inserted_index = 0;
  std::string inserted_word;
};

struct SimulationInput {
  std::string utterance_id;
  std::vector<std::string> words;
  AudioClip audio;
};

struct SimulationOutput {
  std::vector<SimulatedUtterance> utterances;
  std::size_t skipped = 0;  // alignment failures
};

using AlignFn = std::function<AlignedTranscript(const RawTranscript&, const AudioClip&)>;

// Inserts one extra word (drawn uniformly from `lexicon`, excluding words
// already in the sentence) at a uniformly random position of each sentence
// and force-aligns the result against the unmodified audio.
SimulationOutput simulate_incomplete_corpus(const std::vector<SimulationInput>& subset,
                                            const std::vector<std::string>& lexicon, const AlignFn& align,
                                            std::uint64_t insertion_seed);

// Splits simulated alignments into the durations of original (complete) words
// and of inserted (incomplete) words.
void collect_durations(const SimulationOutput& sim, std::vector<double>& complete, std::vector<double>& incomplete);

// Two-population duration sampler for studying the threshold without any
// models: durations of spoken words (a broad mode plus a small mode of short
// function words) and of words the aligner had to place over missing speech.
struct DurationPopulations {
  std::size_t complete_count = 2000;
  std::size_t incomplete_count = 400;
  double complete_mean = 0.38, complete_std = 0.10;
  double short_word_fraction = 0.06;
  double short_word_mean = 0.10, short_word_std = 0.015;
  double incomplete_mean = 0.075;  // arithmetic mean of the lognormal
  double incomplete_sigma = 0.2;   // log-space spread
  double min_duration = 0.01;      // one aligner frame
};
void sample_duration_populations(const DurationPopulations& pop, std::uint64_t seed, std::vector<double>& complete,
                                 std::vector<double>& incomplete);

// SVG renderings of the duration histograms and the F1 curve.
std::string render_histogram_svg(const SimulationReport& report);
std::string render_f1_svg(const SimulationReport& report);

}  // namespace multipa
