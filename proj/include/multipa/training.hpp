#pragma once

// The training loop: SGD with momentum over mini-batches of utterances,
// early stopping on a speaker-stratified validation split, and restoration
// of the best-validation weights.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "multipa/dataset.hpp"
#include "multipa/features.hpp"
#include "multipa/model.hpp"

namespace multipa {

struct TrainingConfig {
  int batch_size = 2;
  double learning_rate = 5e-5;
  double momentum = 0.7;
  int early_stop_patience = 2;
  double validation_fraction = 0.10;  // 0 disables validation and early stopping
  std::uint64_t seed = 0;
  int max_epochs = 30;

  void validate() const;  // throws ConfigError
};
void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

// Model-independent products of feature extraction for one utterance.
struct ExtractedUtterance {
  std::string utterance_id;
  std::string speaker;
  FeatureBundle bundle;
  AcousticFrameSeq frames;
  AlignedTranscript target;
};

struct TrainingExample {
  ExtractedUtterance features;
  ScoreTargets targets;
};

// Labels scaled to [0, 1] by the label ranges; missing labels are masked.
// Throws SchemaViolation when the record's word labels do not match
// word_count.
ScoreTargets make_score_targets(const DatasetRecord& record, const LabelRanges& ranges, std::size_t word_count);

// Indices of the validation subset: within each speaker, utterances are
// shuffled and given evenly spaced positions in [0, 1) with a random offset;
// the round(fraction * n) smallest positions across all speakers form the
// validation set, so every speaker is represented in proportion.
std::vector<std::size_t> stratified_validation_split(const std::vector<std::string>& speakers, double fraction,
                                                     std::uint64_t seed);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> validation_loss;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
  std::vector<std::string> validation_ids;
};
void to_json(nlohmann::json& j, const TrainingLog& log);

struct TrainingResult {
  TrainedModel trained;
  TrainingLog log;
};

// Fits the feature normalizer on the training portion, builds the model
// from `model_config` and the input widths found in the examples, and
// trains. Throws NonFiniteLoss (with epoch, batch and utterance ids) when a
// batch loss is NaN or infinite, DegenerateInput for an empty example set.
TrainingResult train(const std::vector<TrainingExample>& examples, const TrainingConfig& config,
                     const ModelConfig& model_config, const LabelRanges& ranges);

// Mean multitask loss over examples in evaluation mode.
double evaluation_loss(const MultiPAModel& model, const std::vector<ModelInput>& inputs,
                       const std::vector<const ScoreTargets*>& targets);

}  // namespace multipa
