#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <thread>

#include <unistd.h>

#include "doctest.h"
#include "multipa/acoustic.hpp"
#include "multipa/aligned_io.hpp"
#include "multipa/clients.hpp"
#include "multipa/embedding.hpp"
#include "multipa/errors.hpp"
#include "multipa/text.hpp"
#include "multipa/tone_speech.hpp"

using namespace multipa;
namespace fs = std::filesystem;

namespace {

AudioClip fixture_clip() {
  auto audio = tone::synthesize(tone::canonical_speech({"we", "call", "it", "bear"}));
  audio.id = "fixture-we-call-it-bear";
  return audio;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("multipa-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("transcribe: fixture utterance, silence, determinism") {
  ModelClients clients{ClientConfig{}};
  const auto audio = fixture_clip();
  const std::vector<std::string> golden{"we", "call", "it", "bear"};
  const auto p = clients.transcribe(audio, AsrTier::kPerceived);
  CHECK(p.words == golden);
  CHECK(p.source == TranscriptSource::kAsrP);
  CHECK(clients.transcribe(audio, AsrTier::kTarget).words == golden);
  CHECK(clients.transcribe(audio, AsrTier::kPerceived).words == p.words);

  AudioClip silence;
  silence.samples.assign(16000, 0.0f);
  silence.id = "silence";
  CHECK_THROWS_AS(clients.transcribe(silence, AsrTier::kPerceived), EmptyTranscript);
  CHECK_THROWS_AS(clients.transcribe(silence, AsrTier::kTarget), EmptyTranscript);
}

TEST_CASE("transcribe hears substituted phones") {
  auto speech = tone::canonical_speech({"we", "call", "it", "bear"});
  speech[3].phones[2].label = "D";  // B EH D
  auto audio = tone::synthesize(speech);
  audio.id = "sub";
  ModelClients clients{ClientConfig{}};
  const auto heard = clients.transcribe(audio, AsrTier::kPerceived);
  CHECK(heard.words == std::vector<std::string>{"we", "call", "it", "bed"});
}

TEST_CASE("force_align contract and inserted-word span") {
  ModelClients clients{ClientConfig{}};
  const auto audio = fixture_clip();
  const auto aligned = clients.force_align(make_transcript("we call it bear", TranscriptSource::kTarget), audio);
  REQUIRE(aligned.words.size() == 4);
  CHECK_NOTHROW(validate_aligned(aligned, clients.inventory().size()));
  for (std::size_t i = 1; i < aligned.words.size(); ++i) CHECK(aligned.words[i].start >= aligned.words[i - 1].start);
  for (const auto& w : aligned.words) {
    CHECK_FALSE(w.phones.empty());
    for (const auto& ph : w.phones) {
      CHECK(std::accumulate(ph.posterior.begin(), ph.posterior.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-4));
    }
  }

  // golden alignment of a transcript with a word that is not in the audio
  const auto inserted = clients.force_align(make_transcript("we call it a bear", TranscriptSource::kTarget), audio);
  REQUIRE(inserted.words.size() == 5);
  CHECK(inserted.words[3].text == "a");
  CHECK(inserted.words[3].start == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(inserted.words[3].end == doctest::Approx(0.86).epsilon(1e-12));
  CHECK(inserted.words[3].duration() < 0.1);
  CHECK(inserted.words[4].start == doctest::Approx(0.86).epsilon(1e-12));
  CHECK(inserted.words[4].end == doctest::Approx(1.11).epsilon(1e-12));

  CHECK_THROWS_AS(clients.force_align(RawTranscript{}, audio), AlignmentFailure);
  // more phones than frames
  RawTranscript long_text = make_transcript("we call it bear we call it bear", TranscriptSource::kTarget);
  AudioClip tiny;
  tiny.samples.assign(320, 0.0f);
  CHECK_THROWS_AS(clients.force_align(long_text, tiny), AlignmentFailure);
}

TEST_CASE("word embeddings") {
  ModelClients clients{ClientConfig{}};
  const auto four = clients.word_embeddings(make_transcript("we call it bear", TranscriptSource::kTarget));
  CHECK(four.size() == 4);
  CHECK(four.dim() == 32);
  CHECK(clients.word_embeddings(make_transcript("bear", TranscriptSource::kTarget)).size() == 1);
  const auto other = clients.word_embeddings(make_transcript("a bear sleeps", TranscriptSource::kTarget));
  CHECK_FALSE(other.vectors.row(1).isApprox(four.vectors.row(3)));  // contextual
  CHECK_THROWS_AS(clients.word_embeddings(RawTranscript{}), EmptyTranscript);

  // the input layer is context free
  HashingEmbedder static_layer("hash-embed-16", 0);
  const auto a = static_layer.embed(make_transcript("we call it bear", TranscriptSource::kTarget));
  const auto b = static_layer.embed(make_transcript("a bear sleeps", TranscriptSource::kTarget));
  CHECK(a.vectors.row(3) == b.vectors.row(1));
  CHECK_THROWS_AS(HashingEmbedder("roberta-base"), ModelUnavailable);
  CHECK_THROWS_AS(HashingEmbedder("hash-embed-8", 5), ConfigError);
}

TEST_CASE("sub-token pooling matches an explicit average") {
  CHECK(subword_pieces("bear") == std::vector<std::string>{"_bear"});
  CHECK(subword_pieces("sleeping") == std::vector<std::string>{"_slee", "pin", "g"});
  Eigen::MatrixXd pieces(5, 2);
  pieces << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const auto pooled = pool_subtokens(pieces, {0, 0, 1, 2, 2}, 3);
  CHECK(pooled(0, 0) == 2.0);
  CHECK(pooled(0, 1) == 3.0);
  CHECK(pooled(1, 0) == 5.0);
  CHECK(pooled(2, 1) == 9.0);
  CHECK_THROWS_AS(pool_subtokens(pieces, {0, 0, 2, 2, 2}, 3), PreconditionError);
}

TEST_CASE("acoustic frames") {
  ModelClients clients{ClientConfig{}};
  AudioClip two_seconds;
  two_seconds.samples.assign(32000, 0.01f);
  const auto frames = clients.acoustic_frames(two_seconds);
  CHECK(std::abs(static_cast<long>(frames.size()) - 100) <= 2);
  CHECK(frames.frame_hop == 0.020);
  const auto golden = clients.acoustic_frames(fixture_clip());
  CHECK(golden.size() == 64);
  CHECK(golden.dim() == 40);
  CHECK(golden.frames.allFinite());
  AudioClip empty;
  CHECK_THROWS_AS(clients.acoustic_frames(empty), PreconditionError);
}

TEST_CASE("client config: validation, JSON and environment") {
  ClientConfig shared;
  shared.asrt_model_id = shared.asrp_model_id;
  CHECK_THROWS_AS(shared.validate(), ConfigError);
  shared.allow_shared_asr = true;
  CHECK_NOTHROW(shared.validate());

  ClientConfig c;
  c.cache_dir = "/tmp/x";
  nlohmann::json j = c;
  ClientConfig back;
  from_json(j, back);
  CHECK(nlohmann::json(back) == j);
  CHECK_THROWS_AS(from_json(nlohmann::json{{"bogus", 1}}, back), ConfigError);
  CHECK_THROWS_AS(from_json(nlohmann::json{{"asrp_model_id", 3}}, back), ConfigError);

  ::setenv("MULTIPA_ASRP_MODEL", "small.en", 1);
  ::setenv("MULTIPA_CACHE_DIR", "/tmp/env-cache", 1);
  ClientConfig e;
  apply_environment(e);
  CHECK(e.asrp_model_id == "small.en");
  CHECK(e.cache_dir == "/tmp/env-cache");
  ::unsetenv("MULTIPA_ASRP_MODEL");
  ::unsetenv("MULTIPA_CACHE_DIR");

  ClientConfig unknown;
  unknown.asrp_model_id = "large-v9";
  ModelClients clients(unknown);
  CHECK_THROWS_AS(clients.transcribe(fixture_clip(), AsrTier::kPerceived), ModelUnavailable);
}

TEST_CASE("aligned transcript JSON and posterior sidecar round trip") {
  ModelClients clients{ClientConfig{}};
  const auto aligned = clients.force_align(make_transcript("we call it bear", TranscriptSource::kAsrT), fixture_clip());
  const auto dir = fresh_dir("aligned-io");
  save_aligned(aligned, dir / "a.json", dir / "a.post");
  const auto back = load_aligned(dir / "a.json", dir / "a.post");
  REQUIRE(back.words.size() == aligned.words.size());
  CHECK(back.source == TranscriptSource::kAsrT);
  for (std::size_t i = 0; i < back.words.size(); ++i) {
    CHECK(back.words[i].start == aligned.words[i].start);
    for (std::size_t k = 0; k < back.words[i].phones.size(); ++k) {
      CHECK(back.words[i].phones[k].posterior == aligned.words[i].phones[k].posterior);
      CHECK(back.words[i].phones[k].end == aligned.words[i].phones[k].end);
    }
  }
  auto other = aligned;
  other.utterance_id = "someone-else";
  CHECK_THROWS_AS(attach_posteriors(other, encode_posterior_sidecar(aligned)), PreconditionError);
  fs::remove_all(dir);
}

TEST_CASE("disk cache: hits are identical, cache-only serves and misses") {
  const auto dir = fresh_dir("cache");
  ClientConfig cfg;
  cfg.cache_dir = dir;
  const auto audio = fixture_clip();
  const auto text = make_transcript("we call it bear", TranscriptSource::kTarget);
  AlignedTranscript cold;
  {
    ModelClients clients(cfg);
    cold = clients.force_align(text, audio);
    clients.transcribe(audio, AsrTier::kPerceived);
    clients.word_embeddings(text);
    clients.acoustic_frames(audio);
    CHECK(clients.stats().cache_misses == 4);
    const auto warm = clients.force_align(text, audio);
    CHECK(clients.stats().cache_hits == 1);
    CHECK(aligned_to_json(warm) == aligned_to_json(cold));
  }
  ClientConfig offline = cfg;
  offline.backend = "cache-only";
  ModelClients served(offline);
  CHECK(served.transcribe(audio, AsrTier::kPerceived).words == std::vector<std::string>{"we", "call", "it", "bear"});
  const auto hit = served.force_align(text, audio);
  CHECK(hit.words.back().phones.back().posterior == cold.words.back().phones.back().posterior);
  CHECK(served.acoustic_frames(audio).size() == 64);
  CHECK_THROWS_AS(served.transcribe(audio, AsrTier::kTarget), ModelUnavailable);
  CHECK_THROWS_AS(served.word_embeddings(make_transcript("bear", TranscriptSource::kTarget)), ModelUnavailable);
  fs::remove_all(dir);
}

TEST_CASE("disk cache tolerates concurrent writers of one key") {
  const auto dir = fresh_dir("cache-race");
  ClientConfig cfg;
  cfg.cache_dir = dir;
  ModelClients clients(cfg);
  const auto audio = fixture_clip();
  const auto text = make_transcript("we call it bear", TranscriptSource::kTarget);
  std::vector<std::thread> workers;
  std::vector<nlohmann::json> results(8);
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] { results[i] = aligned_to_json(clients.force_align(text, audio)); });
  }
  for (auto& t : workers) t.join();
  for (const auto& r : results) CHECK(r == results.front());
  std::size_t stray = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().string().find(".tmp.") != std::string::npos) ++stray;
  }
  CHECK(stray == 0);
  CHECK(aligned_to_json(clients.force_align(text, audio)) == results.front());
  fs::remove_all(dir);
}
