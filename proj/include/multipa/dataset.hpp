#pragma once

// Dataset ingestion. A dataset directory holds one manifest per split
// (train.json, test.json); each manifest lists utterances with their audio
// path (relative to the manifest), target text and human scores.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "multipa/model.hpp"

namespace multipa {

enum class Split { kTrain, kTest };
std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

inline constexpr std::size_t kSentenceLabelDims = 5;
inline constexpr std::array<const char*, kSentenceLabelDims> kSentenceLabelNames = {"accuracy", "completeness",
                                                                                     "fluency", "prosody", "total"};
// Index of each network sentence output within the sentence label array.
inline constexpr std::array<std::size_t, kSentenceOutputs> kSentenceOutputLabelIndex = {0, 2, 3, 4};
inline constexpr std::size_t kCompletenessLabelIndex = 1;

using Label = std::optional<double>;

struct WordLabel {
  std::string word;
  std::array<Label, kWordOutputs> scores;  // accuracy, stress, total
};

struct DatasetRecord {
  std::string utterance_id;
  std::filesystem::path audio_path;  // absolute
  std::string target_text;
  std::vector<std::string> target_words;  // normalized
  std::string speaker;
  std::array<Label, kSentenceLabelDims> sentence_labels;
  std::vector<WordLabel> word_labels;
  Split split = Split::kTrain;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  LabelRanges ranges;

  std::vector<const DatasetRecord*> split(Split which) const;
};

inline constexpr const char* kManifestFormat = "multipa-manifest";
inline constexpr int kManifestVersion = 1;

// `path` is a dataset directory (reads train.json and/or test.json) or a
// single manifest file. Throws SchemaViolation naming the offending record.
Dataset load_dataset(const std::filesystem::path& path);

// Parses one manifest document; audio paths resolve against base_dir.
std::vector<DatasetRecord> parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                          LabelRanges& ranges_out);

nlohmann::json manifest_json(const std::vector<DatasetRecord>& records, Split split, const LabelRanges& ranges,
                             const std::filesystem::path& base_dir);
void write_manifest(const std::filesystem::path& path, const std::vector<DatasetRecord>& records, Split split,
                    const LabelRanges& ranges);

// Converts the speechocean762 release layout (train/ and test/ Kaldi-style
// wav.scp, utt2spk; resource/scores.json) into manifests under out_dir.
// Returns the number of records written per split.
std::array<std::size_t, 2> convert_speechocean762(const std::filesystem::path& corpus_root,
                                                  const std::filesystem::path& out_dir);

// Per-dimension minimum label over a record set ("lowest training score").
struct LabelMinima {
  std::array<double, kSentenceLabelDims> sentence{};
  std::array<double, kWordOutputs> word{};
};
LabelMinima label_minima(const std::vector<const DatasetRecord*>& records);
void to_json(nlohmann::json& j, const LabelMinima& m);
void from_json(const nlohmann::json& j, LabelMinima& m);

}  // namespace multipa
