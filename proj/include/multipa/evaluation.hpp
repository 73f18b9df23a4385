#pragma once

// Evaluation protocols: per-dimension Pearson correlation between predicted
// and human scores under closed- and open-response scoring, fallback scores
// for unscorable utterances, and aggregation across training seeds.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "multipa/assessment.hpp"
#include "multipa/dataset.hpp"

namespace multipa {

// Word-level report dimensions are kWordDimNames; sentence-level ones are
// kSentenceLabelNames (completeness omitted in open mode).

// A correlation that may be undefined (constant or too-short sequences).
struct PccValue {
  std::optional<double> value;
  std::string undefined_reason;  // set when value is empty
};

struct UtterancePrediction {
  std::string utterance_id;
  bool fallback = false;
  std::map<std::string, double> sentence;           // dimension -> predicted score
  std::vector<std::array<double, kWordOutputs>> words;  // per scored word
};

struct EvalFragment {
  Mode mode = Mode::kClosed;
  std::map<std::string, PccValue> word_pcc;
  std::map<std::string, PccValue> sentence_pcc;
  std::size_t utterances = 0;
  std::size_t fallback_count = 0;
  std::size_t excluded_words = 0;  // open mode: recognized words overlapping no truth word
  std::vector<UtterancePrediction> predictions;
};

// Open-response target remapping. Each recognized word's target for a
// dimension is the mean of that dimension's labels over the ground-truth
// words overlapping it in time by a positive amount; a recognized word that
// overlaps no truth word gets no target and is counted in `excluded`.
struct OpenTargets {
  std::vector<std::array<std::optional<double>, kWordOutputs>> targets;
  std::size_t excluded = 0;
};
OpenTargets map_open_response_targets(const std::vector<WordSpan>& recognized, const AlignedTranscript& truth,
                                      const std::vector<WordLabel>& truth_labels);

// Throws DegenerateInput when the training labels leave a dimension empty.
EvalFragment evaluate_closed(const Scorer& scorer, const std::vector<const DatasetRecord*>& test,
                             const LabelMinima& fallback);
EvalFragment evaluate_open(const Scorer& scorer, const std::vector<const DatasetRecord*>& test,
                           const LabelMinima& fallback);

PccValue pcc_value(const std::vector<double>& predicted, const std::vector<double>& truth);

struct DimensionSummary {
  std::vector<PccValue> per_seed;
  std::optional<double> mean;  // empty when any seed is undefined
  std::optional<double> std;   // sample std; present only with >= 2 defined seeds
};

struct EvalReport {
  Mode mode = Mode::kClosed;
  std::string label;  // system/configuration name shown in tables
  std::vector<std::uint64_t> seeds;
  std::map<std::string, DimensionSummary> word;
  std::map<std::string, DimensionSummary> sentence;
  std::vector<std::size_t> fallback_counts;  // per seed
  std::vector<std::size_t> excluded_words;   // per seed
  LabelMinima fallback_minima;
};
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

EvalReport aggregate(const std::vector<EvalFragment>& per_seed, const std::vector<std::uint64_t>& seeds,
                     const LabelMinima& minima, std::string label = "MultiPA");

// Runs `experiment` once per seed (seeds base_seed, base_seed+1, ...); each
// run returns one fragment per evaluated mode, in a fixed order. Any seed
// failure propagates; partial results are never averaged.
std::vector<EvalReport> run_seeds(const std::function<std::vector<EvalFragment>(std::uint64_t seed)>& experiment,
                                  std::size_t n_seeds, std::uint64_t base_seed, const LabelMinima& minima,
                                  const std::string& label = "MultiPA");

// Plain-text table, one row per report: system, setting, word-level PCC
// (accuracy, stress, total), sentence-level PCC (accuracy, completeness,
// fluency, prosody, total). Cells read "mean (std)", "-" when a dimension
// does not apply and "undef" when a correlation is undefined.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace multipa
