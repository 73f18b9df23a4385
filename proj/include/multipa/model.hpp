#pragma once

// The multi-task assessment network: a trainable adapter over acoustic
// frames, word-level pooling of phone- and frame-level inputs, a
// transformer fusion encoder over the word axis, linear sentence heads and
// convolutional word heads.

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "multipa/autograd.hpp"
#include "multipa/features.hpp"
#include "multipa/nn.hpp"
#include "multipa/types.hpp"

namespace multipa {

inline constexpr std::size_t kSentenceOutputs = 4;  // accuracy, fluency, prosody, total
inline constexpr std::size_t kWordOutputs = 3;      // accuracy, stress, total
inline constexpr std::array<const char*, kSentenceOutputs> kSentenceDimNames = {"accuracy", "fluency", "prosody",
                                                                                 "total"};
inline constexpr std::array<const char*, kWordOutputs> kWordDimNames = {"accuracy", "stress", "total"};

struct ModelConfig {
  int d = 768;               // fusion width
  int k = 3;                 // word-head kernel size
  int h = 8;                 // fusion attention heads
  int n_fusion_layers = 2;
  double dropout = 0.1;
  int ffn_dim = 2048;        // fusion feed-forward width
  int backbone_dim = 256;    // acoustic adapter width
  int backbone_layers = 1;   // encoder layers over acoustic frames
  int backbone_heads = 4;
  int max_words = 256;       // learned positional table size
  bool freeze_feature_extractor = false;

  void validate() const;  // throws ConfigError
};
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Widths of the data-dependent inputs, fixed when a model is built.
struct InputDims {
  int embedding_dim = 32;
  int acoustic_dim = 40;
  int inventory_size = 40;

  // [word features | phone vector | target emb | perceived emb | pooled phone features | pooled posteriors]
  int static_width() const;
  bool operator==(const InputDims&) const = default;
};
void to_json(nlohmann::json& j, const InputDims& d);
void from_json(const nlohmann::json& j, InputDims& d);

// Inclusive-exclusive label range per output dimension; labels are scaled
// to [0, 1] for training and predictions are mapped back and clamped.
struct LabelRanges {
  std::array<std::array<double, 2>, kSentenceOutputs> sentence{{{0, 10}, {0, 10}, {0, 10}, {0, 10}}};
  std::array<std::array<double, 2>, kWordOutputs> word{{{0, 10}, {0, 10}, {0, 10}}};
  std::array<double, 2> completeness{0, 10};

  void validate() const;
};
void to_json(nlohmann::json& j, const LabelRanges& r);
void from_json(const nlohmann::json& j, LabelRanges& r);

struct SentenceScores {
  double accuracy = 0, fluency = 0, prosody = 0, total = 0;
  double at(std::size_t i) const;
  double& at(std::size_t i);
};

struct WordScores {
  double accuracy = 0, stress = 0, total = 0;
  double at(std::size_t i) const;
  double& at(std::size_t i);
};

struct ScoreOutput {
  SentenceScores sentence;
  std::vector<WordScores> word;
  std::vector<std::string> words;    // the target words the word scores belong to
  std::optional<double> completeness;  // set by the completeness module, never the network
};
nlohmann::json to_json(const ScoreOutput& s);

// Frames whose centre (f + 1/2) * hop lies in [start, end) of each word; a
// word covering no frame centre gets the single frame nearest its midpoint.
std::vector<std::vector<std::size_t>> word_frame_groups(const AlignedTranscript& target, std::size_t frame_count,
                                                        double frame_hop);

struct PooledLevels {
  // One row per target word:
  // [word features | phone vector | embedding pair | pooled phone features | pooled posteriors | pooled frames]
  Eigen::MatrixXd words;
  std::vector<std::vector<std::size_t>> frame_groups;
};

// Level alignment: phone features (normalized) and posteriors are averaged
// per owning word via phone_to_word, acoustic frames per word span.
PooledLevels pool_levels(const FeatureBundle& bundle, const AcousticFrameSeq& frames, const AlignedTranscript& target,
                         const FeatureNormalizer& normalizer = FeatureNormalizer::identity());

// What the network consumes for one utterance: the static word-level part of
// pool_levels plus the raw frames and their word groups, so the acoustic
// adapter can be trained end to end.
struct ModelInput {
  Eigen::MatrixXd word_static;
  Eigen::MatrixXd frames;
  std::vector<std::vector<std::size_t>> frame_groups;
  std::vector<std::string> words;
};

ModelInput make_model_input(const FeatureBundle& bundle, const AcousticFrameSeq& frames,
                            const AlignedTranscript& target, const FeatureNormalizer& normalizer);

// Normalized training targets. Masked-out entries are ignored by the loss.
struct ScoreTargets {
  Eigen::MatrixXd sentence;       // 1 x 4
  Eigen::MatrixXd sentence_mask;  // 1 x 4
  Eigen::MatrixXd word;           // W x 3
  Eigen::MatrixXd word_mask;      // W x 3
};

class MultiPAModel {
 public:
  MultiPAModel(ModelConfig config, InputDims dims, std::uint64_t seed);

  struct Outputs {
    ag::Var sentence;  // 1 x 4, normalized scale
    ag::Var word;      // W x 3, normalized scale
  };

  Outputs forward(const ModelInput& input, bool training, std::mt19937_64& rng) const;
  // Evaluation-mode forward, de-normalized and clamped to the label ranges.
  ScoreOutput predict(const ModelInput& input, const LabelRanges& ranges) const;

  const ModelConfig& config() const { return config_; }
  const InputDims& dims() const { return dims_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

 private:
  ModelConfig config_;
  InputDims dims_;
  nn::ParameterStore store_;
  nn::Linear feature_projection_;
  std::vector<nn::TransformerEncoderLayer> backbone_;
  nn::Linear input_projection_;
  ag::Var positions_;
  std::vector<nn::TransformerEncoderLayer> fusion_;
  nn::Linear sentence_head_;
  nn::Conv1dSame word_head_;
};

// Sum of the 4 sentence-task MSEs and the 3 word-task MSEs (each averaged
// over labelled words), equal weights.
ag::Var multitask_loss(const MultiPAModel::Outputs& outputs, const ScoreTargets& targets);

// Everything needed to score new audio, versioned together on disk.
struct TrainedModel {
  std::unique_ptr<MultiPAModel> model;
  FeatureNormalizer normalizer = FeatureNormalizer::identity();
  LabelRanges ranges;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& trained);
// Throws CheckpointError on a missing file, foreign format, version or shape mismatch.
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace multipa
