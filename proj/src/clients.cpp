#include "multipa/clients.hpp"

#include <cstdlib>
#include <fstream>

#include "multipa/acoustic.hpp"
#include "multipa/aligned_io.hpp"
#include "multipa/audio.hpp"
#include "multipa/binary_io.hpp"
#include "multipa/embedding.hpp"
#include "multipa/errors.hpp"
#include "multipa/text.hpp"
#include "multipa/tone_speech.hpp"

namespace multipa {

namespace {

constexpr std::string_view kMatrixMagic = "MPAMAT01";

std::vector<std::uint8_t> encode_matrix(const Eigen::MatrixXd& m, double hop) {
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, kMatrixMagic.data(), kMatrixMagic.size());
  binio::put<double>(out, hop);
  binio::put_matrix(out, m);
  return out;
}

std::pair<Eigen::MatrixXd, double> decode_matrix(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "cached matrix");
  r.expect_magic(kMatrixMagic);
  const double hop = r.get<double>();
  Eigen::MatrixXd m = r.matrix();
  r.expect_done();
  return {std::move(m), hop};
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

void ClientConfig::validate() const {
  if (backend != "builtin" && backend != "cache-only") {
    throw ConfigError("client backend must be 'builtin' or 'cache-only', got '" + backend + "'");
  }
  for (const auto* id : {&asrp_model_id, &asrt_model_id, &aligner_model_id, &embedder_model_id, &backbone_model_id}) {
    if (id->empty()) throw ConfigError("model ids must be non-empty");
  }
  if (asrp_model_id == asrt_model_id && !allow_shared_asr) {
    throw ConfigError("asrp_model_id and asrt_model_id are both '" + asrp_model_id +
                      "'; set allow_shared_asr to use one recognizer for both tiers");
  }
  if (embedder_layer < -1 || backbone_layer < -1) throw ConfigError("layer indices must be >= -1");
  if (backend == "cache-only" && cache_dir.empty()) throw ConfigError("the cache-only backend needs cache_dir");
}

void to_json(nlohmann::json& j, const ClientConfig& c) {
  j = {{"backend", c.backend},
       {"asrp_model_id", c.asrp_model_id},
       {"asrt_model_id", c.asrt_model_id},
       {"aligner_model_id", c.aligner_model_id},
       {"embedder_model_id", c.embedder_model_id},
       {"backbone_model_id", c.backbone_model_id},
       {"embedder_layer", c.embedder_layer},
       {"backbone_layer", c.backbone_layer},
       {"allow_shared_asr", c.allow_shared_asr},
       {"cache_dir", c.cache_dir.string()},
       {"lexicon_path", c.lexicon_path.string()}};
}

void from_json(const nlohmann::json& j, ClientConfig& c) {
  if (!j.is_object()) throw ConfigError("client config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "backend") c.backend = value.get<std::string>();
      else if (key == "asrp_model_id") c.asrp_model_id = value.get<std::string>();
      else if (key == "asrt_model_id") c.asrt_model_id = value.get<std::string>();
      else if (key == "aligner_model_id") c.aligner_model_id = value.get<std::string>();
      else if (key == "embedder_model_id") c.embedder_model_id = value.get<std::string>();
      else if (key == "backbone_model_id") c.backbone_model_id = value.get<std::string>();
      else if (key == "embedder_layer") c.embedder_layer = value.get<int>();
      else if (key == "backbone_layer") c.backbone_layer = value.get<int>();
      else if (key == "allow_shared_asr") c.allow_shared_asr = value.get<bool>();
      else if (key == "cache_dir") c.cache_dir = value.get<std::string>();
      else if (key == "lexicon_path") c.lexicon_path = value.get<std::string>();
      else throw ConfigError("unknown client config key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("client config key '" + key + "' has the wrong type");
    }
  }
}

void apply_environment(ClientConfig& c) {
  auto env = [](const char* name, auto setter) {
    if (const char* v = std::getenv(name); v != nullptr && *v != '\0') setter(std::string(v));
  };
  env("MULTIPA_BACKEND", [&](std::string v) { c.backend = std::move(v); });
  env("MULTIPA_ASRP_MODEL", [&](std::string v) { c.asrp_model_id = std::move(v); });
  env("MULTIPA_ASRT_MODEL", [&](std::string v) { c.asrt_model_id = std::move(v); });
  env("MULTIPA_ALIGNER_MODEL", [&](std::string v) { c.aligner_model_id = std::move(v); });
  env("MULTIPA_EMBEDDER_MODEL", [&](std::string v) { c.embedder_model_id = std::move(v); });
  env("MULTIPA_BACKBONE_MODEL", [&](std::string v) { c.backbone_model_id = std::move(v); });
  env("MULTIPA_CACHE_DIR", [&](std::string v) { c.cache_dir = std::move(v); });
  env("MULTIPA_LEXICON", [&](std::string v) { c.lexicon_path = std::move(v); });
}

ResultCache::ResultCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::string ResultCache::key(std::string_view kind, std::string_view model_id, std::uint64_t audio_hash,
                             std::uint64_t transcript_hash) {
  std::string material(kind);
  material += '\n';
  material += model_id;
  material += '\n' + hex64(audio_hash) + '\n' + hex64(transcript_hash);
  return std::string(kind) + "/" + hex64(fnv1a64(material));
}

std::filesystem::path ResultCache::path_for(const std::string& key, std::string_view extension) const {
  return root_ / (key + std::string(extension));
}

std::optional<std::vector<std::uint8_t>> ResultCache::get(const std::string& key, std::string_view extension) const {
  const auto path = path_for(key, extension);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void ResultCache::put(const std::string& key, std::string_view extension, std::span<const std::uint8_t> bytes) const {
  binio::write_file_atomic(path_for(key, extension), bytes);
}

std::uint64_t transcript_hash(const RawTranscript& transcript) {
  return fnv1a64(std::string(to_string(transcript.source)) + "\n" + transcript.text());
}

struct ModelClients::Backends {
  Lexicon lexicon;
  std::optional<tone::FrameRecognizer> asrp, asrt;
  std::optional<tone::ViterbiAligner> aligner;
  std::optional<HashingEmbedder> embedder;
  std::optional<LogMelFrontEnd> backbone;
};

ModelClients::ModelClients(ClientConfig config) : config_(std::move(config)) {
  config_.validate();
  if (!config_.cache_dir.empty()) cache_.emplace(config_.cache_dir);
}

ModelClients::~ModelClients() = default;

ModelClients::Backends& ModelClients::backends() const {
  std::call_once(load_once_, [this] {
    auto b = std::make_unique<Backends>();
    b->lexicon = config_.lexicon_path.empty() ? Lexicon::builtin() : Lexicon::load(config_.lexicon_path);
    if (config_.backend == "builtin") {
      b->asrp.emplace(tone::recognizer_tier(config_.asrp_model_id), b->lexicon);
      b->asrt.emplace(tone::recognizer_tier(config_.asrt_model_id), b->lexicon);
      if (config_.aligner_model_id != "tone-viterbi") {
        throw ModelUnavailable("unknown aligner model '" + config_.aligner_model_id + "'");
      }
      b->aligner.emplace(b->lexicon);
      b->embedder.emplace(config_.embedder_model_id, config_.embedder_layer);
      if (config_.backbone_layer > 0) {
        throw ModelUnavailable("backbone '" + config_.backbone_model_id + "' has a single output layer");
      }
      b->backbone.emplace(config_.backbone_model_id);
    }
    backends_ = std::move(b);
  });
  return *backends_;
}

const Lexicon& ModelClients::lexicon() const { return backends().lexicon; }

ClientStats ModelClients::stats() const { return {hits_.load(), misses_.load()}; }

RawTranscript ModelClients::transcribe(const AudioClip& audio, AsrTier tier) const {
  validate_audio(audio);
  auto& b = backends();
  const std::string& model = tier == AsrTier::kPerceived ? config_.asrp_model_id : config_.asrt_model_id;
  const auto source = tier == AsrTier::kPerceived ? TranscriptSource::kAsrP : TranscriptSource::kAsrT;
  const std::string key = ResultCache::key("asr", model, audio_hash(audio), 0);
  std::optional<std::string> text;
  if (cache_) {
    if (auto bytes = cache_->get(key, ".txt")) text = std::string(bytes->begin(), bytes->end());
  }
  if (text) {
    ++hits_;
  } else {
    ++misses_;
    if (config_.backend == "cache-only") throw ModelUnavailable("no cached transcript for '" + audio.id + "' (" + model + ")");
    const auto& recognizer = tier == AsrTier::kPerceived ? *b.asrp : *b.asrt;
    try {
      text = join_words(recognizer.recognize(audio));
    } catch (const EmptyTranscript&) {
      text = std::string();
    }
    if (cache_) cache_->put(key, ".txt", as_bytes(*text));
  }
  RawTranscript out = make_transcript(*text, source);
  if (out.empty()) throw EmptyTranscript("no speech recognized in '" + audio.id + "'");
  return out;
}

AlignedTranscript ModelClients::force_align(const RawTranscript& transcript, const AudioClip& audio) const {
  if (transcript.empty()) throw AlignmentFailure("cannot align an empty transcript");
  validate_audio(audio);
  auto& b = backends();
  const std::string key =
      ResultCache::key("align", config_.aligner_model_id, audio_hash(audio), transcript_hash(transcript));
  if (cache_) {
    auto doc = cache_->get(key, ".json");
    auto post = cache_->get(key, ".post");
    if (doc && post) {
      ++hits_;
      try {
        auto aligned = aligned_from_json(nlohmann::json::parse(doc->begin(), doc->end()));
        attach_posteriors(aligned, *post);
        aligned.utterance_id = audio.id;
        aligned.source = transcript.source;
        return aligned;
      } catch (const nlohmann::json::exception& e) {
        throw PreconditionError("corrupt cache entry " + key + ": " + e.what());
      }
    }
  }
  ++misses_;
  if (config_.backend == "cache-only") throw ModelUnavailable("no cached alignment for '" + audio.id + "'");
  AlignedTranscript aligned = b.aligner->align(transcript, audio);
  if (cache_) {
    const std::string doc = aligned_to_json(aligned).dump();
    cache_->put(key, ".post", encode_posterior_sidecar(aligned));
    cache_->put(key, ".json", as_bytes(doc));
  }
  return aligned;
}

WordEmbeddingSeq ModelClients::word_embeddings(const RawTranscript& transcript) const {
  if (transcript.empty()) throw EmptyTranscript("cannot embed an empty transcript");
  auto& b = backends();
  const std::string key = ResultCache::key("embed", config_.embedder_model_id + "#" + std::to_string(config_.embedder_layer),
                                           0, fnv1a64(transcript.text()));
  if (cache_) {
    if (auto bytes = cache_->get(key, ".mat")) {
      ++hits_;
      return {decode_matrix(*bytes).first};
    }
  }
  ++misses_;
  if (config_.backend == "cache-only") throw ModelUnavailable("no cached embeddings for '" + transcript.text() + "'");
  auto out = b.embedder->embed(transcript);
  if (cache_) cache_->put(key, ".mat", encode_matrix(out.vectors, 0.0));
  return out;
}

AcousticFrameSeq ModelClients::acoustic_frames(const AudioClip& audio) const {
  validate_audio(audio);
  auto& b = backends();
  const std::string key = ResultCache::key("frames", config_.backbone_model_id + "#" + std::to_string(config_.backbone_layer),
                                           audio_hash(audio), 0);
  if (cache_) {
    if (auto bytes = cache_->get(key, ".mat")) {
      ++hits_;
      auto [m, hop] = decode_matrix(*bytes);
      return {std::move(m), hop};
    }
  }
  ++misses_;
  if (config_.backend == "cache-only") throw ModelUnavailable("no cached acoustic frames for '" + audio.id + "'");
  auto out = b.backbone->frames(audio);
  if (cache_) cache_->put(key, ".mat", encode_matrix(out.frames, out.frame_hop));
  return out;
}

}  // namespace multipa
