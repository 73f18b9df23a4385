#pragma once

// Uniform access to the pretrained models the pipeline consumes: two
// recognizer tiers, a forced aligner, a contextual word embedder and the
// acoustic front end. Backends load lazily (loading is serialized), are
// read-shared afterwards, and every output can be cached on disk.

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "multipa/phones.hpp"
#include "multipa/types.hpp"

namespace multipa {

enum class AsrTier { kPerceived, kTarget };

struct ClientConfig {
  // "builtin": the bundled tone-speech models; "cache-only": serve outputs
  // previously written to cache_dir (e.g. by an offline extraction run with
  // the real pretrained models) and fail with ModelUnavailable on a miss.
  std::string backend = "builtin";
  std::string asrp_model_id = "base.en";
  std::string asrt_model_id = "medium.en";
  std::string aligner_model_id = "tone-viterbi";
  std::string embedder_model_id = "hash-embed-32";
  std::string backbone_model_id = "logmel-40";
  int embedder_layer = -1;  // -1 = final hidden layer
  int backbone_layer = -1;
  bool allow_shared_asr = false;
  std::filesystem::path cache_dir;     // empty disables the cache
  std::filesystem::path lexicon_path;  // empty uses the built-in lexicon

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const ClientConfig& c);
// Fields absent from the document keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ClientConfig& c);

// Overrides from MULTIPA_BACKEND, MULTIPA_ASRP_MODEL, MULTIPA_ASRT_MODEL,
// MULTIPA_ALIGNER_MODEL, MULTIPA_EMBEDDER_MODEL, MULTIPA_BACKBONE_MODEL,
// MULTIPA_CACHE_DIR and MULTIPA_LEXICON when set.
void apply_environment(ClientConfig& config);

// Content-addressed store of client outputs. Keys combine output kind, model
// id, audio hash and transcript hash. Writes are atomic renames, so identical
// concurrent writers are harmless (last write wins).
class ResultCache {
 public:
  explicit ResultCache(std::filesystem::path root);

  static std::string key(std::string_view kind, std::string_view model_id, std::uint64_t audio_hash,
                         std::uint64_t transcript_hash);

  std::filesystem::path path_for(const std::string& key, std::string_view extension) const;
  std::optional<std::vector<std::uint8_t>> get(const std::string& key, std::string_view extension) const;
  void put(const std::string& key, std::string_view extension, std::span<const std::uint8_t> bytes) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

std::uint64_t transcript_hash(const RawTranscript& transcript);

struct ClientStats {
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
};

class ModelClients {
 public:
  explicit ModelClients(ClientConfig config);
  ~ModelClients();
  ModelClients(const ModelClients&) = delete;
  ModelClients& operator=(const ModelClients&) = delete;

  // Throws ModelUnavailable or EmptyTranscript.
  RawTranscript transcribe(const AudioClip& audio, AsrTier tier) const;
  // Throws AlignmentFailure (including for an empty transcript) or ModelUnavailable.
  AlignedTranscript force_align(const RawTranscript& transcript, const AudioClip& audio) const;
  // Throws EmptyTranscript or ModelUnavailable.
  WordEmbeddingSeq word_embeddings(const RawTranscript& transcript) const;
  // Throws PreconditionError for invalid audio, ModelUnavailable otherwise.
  AcousticFrameSeq acoustic_frames(const AudioClip& audio) const;

  const ClientConfig& config() const { return config_; }
  const Lexicon& lexicon() const;
  const PhoneInventory& inventory() const { return PhoneInventory::arpabet(); }
  ClientStats stats() const;

 private:
  struct Backends;
  Backends& backends() const;

  ClientConfig config_;
  std::optional<ResultCache> cache_;
  mutable std::once_flag load_once_;
  mutable std::unique_ptr<Backends> backends_;
  mutable std::atomic<std::uint64_t> hits_{0}, misses_{0};
};

}  // namespace multipa
