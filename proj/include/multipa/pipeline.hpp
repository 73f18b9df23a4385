#pragma once

// End-to-end scoring: model clients -> alignment features -> network ->
// completeness, plus the application configuration and the seeded
// train/evaluate experiment runner behind the CLI.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "multipa/assessment.hpp"
#include "multipa/clients.hpp"
#include "multipa/completeness.hpp"
#include "multipa/dataset.hpp"
#include "multipa/evaluation.hpp"
#include "multipa/model.hpp"
#include "multipa/training.hpp"

namespace multipa {

struct AppConfig {
  ClientConfig clients;
  ModelConfig model;
  TrainingConfig training;
  CompletenessConfig completeness;
  // Disables the ASRp branch: the perceived transcript is treated as empty,
  // so every target unit is unaligned (ablation baseline).
  bool use_perceived_features = true;
  std::filesystem::path dataset_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path cache_path;  // overrides clients.cache_dir when set
  std::string host = "127.0.0.1";
  int port = 8080;

  void validate() const;  // value checks only; throws ConfigError
  // Throws ConfigError naming the first required path that does not exist.
  void require_paths(bool dataset, bool checkpoint) const;
  ClientConfig effective_clients() const;
};
void to_json(nlohmann::json& j, const AppConfig& c);
void from_json(const nlohmann::json& j, AppConfig& c);
// Reads a JSON config file (missing keys keep defaults) and applies the
// MULTIPA_* environment overrides. An empty path yields the defaults.
AppConfig load_app_config(const std::filesystem::path& path);

// Everything the pipeline derives from one clip before the network runs.
struct Extraction {
  ExtractedUtterance features;
  RawTranscript target;     // given text (closed) or ASRt output (open)
  RawTranscript perceived;  // ASRp output (empty when disabled)
};

class FeatureExtractor {
 public:
  FeatureExtractor(std::shared_ptr<const ModelClients> clients, bool use_perceived_features = true);

  // Closed mode requires `target` and open mode forbids it (PreconditionError).
  // Recognition and alignment failures surface as AssessmentUnavailable.
  Extraction extract(const AudioClip& audio, Mode mode, const std::optional<RawTranscript>& target,
                     const std::string& utterance_id = {}, const std::string& speaker = {}) const;

  const ModelClients& clients() const { return *clients_; }

 private:
  std::shared_ptr<const ModelClients> clients_;
  bool use_perceived_;
};

// Reads and canonicalizes a record's audio; PreconditionError on failure.
AudioClip load_record_audio(const DatasetRecord& record);

// Training examples for the records that extract cleanly in closed mode;
// failures are skipped and their ids appended to `skipped`.
std::vector<TrainingExample> extract_training_examples(const FeatureExtractor& extractor,
                                                       const std::vector<const DatasetRecord*>& records,
                                                       const LabelRanges& ranges, std::vector<std::string>* skipped);

// Scores audio with a trained model. Reentrant: concurrent calls share the
// model read-only. Extractions of dataset records can be memoized across
// assessors (the model does not influence them).
class Assessor : public Scorer {
 public:
  struct Memo {
    struct Entry {
      std::shared_ptr<const Extraction> extraction;
      std::optional<AlignedTranscript> truth;
      std::string failure;  // message of the AssessmentUnavailable / AlignmentFailure to replay
    };
    std::mutex mutex;
    std::map<std::string, Entry> entries;
  };

  Assessor(std::shared_ptr<const TrainedModel> model, std::shared_ptr<const FeatureExtractor> extractor,
           CompletenessConfig completeness, std::shared_ptr<Memo> memo = nullptr);

  // predict_utterance: closed mode attaches completeness (scaled to the
  // completeness label range), open mode scores the ASRt words.
  AssessmentResult assess_audio(const AudioClip& audio, Mode mode, const std::optional<std::string>& target_text,
                                const std::string& utterance_id = {}) const;

  AssessmentResult assess(const DatasetRecord& record, Mode mode) const override;
  AlignedTranscript align_truth(const DatasetRecord& record) const override;

  const TrainedModel& model() const { return *model_; }

 private:
  AssessmentResult score(const Extraction& extraction, Mode mode) const;

  std::shared_ptr<const TrainedModel> model_;
  std::shared_ptr<const FeatureExtractor> extractor_;
  CompletenessConfig completeness_;
  std::shared_ptr<Memo> memo_;
};

struct ExperimentResult {
  std::vector<EvalReport> reports;  // one per requested mode, in order
  LabelMinima minima;
  std::vector<std::string> skipped_training;
  std::vector<TrainingLog> logs;  // per seed
};

// For each seed: train on the train split, then evaluate the test split in
// each requested mode. Progress lines go to `log` when given.
ExperimentResult run_experiment(const AppConfig& config, const Dataset& dataset, const std::vector<Mode>& modes,
                                std::size_t n_seeds, const std::string& label = "MultiPA",
                                std::ostream* log = nullptr);

struct AblationEntry {
  std::string label;
  AppConfig config;
};
// One configuration per ASRt id (open mode; ASRp stays as configured),
// plus a configuration without perceived features when requested.
std::vector<AblationEntry> asrt_ablation_configs(const AppConfig& base, const std::vector<std::string>& asrt_ids,
                                                 bool include_no_asrp);
std::vector<EvalReport> run_ablation(const std::vector<AblationEntry>& entries, const Dataset& dataset,
                                     std::size_t n_seeds, std::ostream* log = nullptr);

}  // namespace multipa
