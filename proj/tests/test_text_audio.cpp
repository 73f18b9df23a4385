#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "multipa/audio.hpp"
#include "multipa/errors.hpp"
#include "multipa/phones.hpp"
#include "multipa/text.hpp"

using namespace multipa;

TEST_CASE("text normalization") {
  CHECK(normalize_words("We call it \"Bear\"!") == std::vector<std::string>{"we", "call", "it", "bear"});
  CHECK(normalize_words("  don't   STOP,now ") == std::vector<std::string>{"don't", "stop", "now"});
  CHECK(normalize_words("well-known 'quoted'") == std::vector<std::string>{"well", "known", "quoted"});
  CHECK(normalize_words("...").empty());
  CHECK(make_transcript("Hi there", TranscriptSource::kAsrP).source == TranscriptSource::kAsrP);
}

TEST_CASE("phone inventory and lexicon") {
  const auto& inv = PhoneInventory::arpabet();
  CHECK(inv.size() == 40);
  CHECK(inv.symbol(inv.silence_index()) == "[SIL]");
  CHECK(inv.index_of("AH0") == inv.index_of("AH"));
  CHECK(PhoneInventory::canonical_label("sil") == "[SIL]");
  CHECK_THROWS_AS(inv.index_of("XX"), PreconditionError);

  const auto& lex = Lexicon::builtin();
  CHECK(lex.pronounce("bear") == std::vector<std::string>{"B", "EH", "R"});
  CHECK(lex.nearest_word({"B", "EH", "R"}) == "bear");
  CHECK(lex.nearest_word({"B", "EH", "D", "Z"}) == "bed");
  const auto oov = lex.pronounce("blorpt");
  CHECK_FALSE(oov.empty());
  for (const auto& p : oov) CHECK(inv.find(p).has_value());

  const auto custom = Lexicon::from_text(";;; c\nHELLO(2)  HH AH0 L OW1\n");
  CHECK(custom.pronounce("hello") == std::vector<std::string>{"HH", "AH", "L", "OW"});
  CHECK_THROWS_AS(Lexicon::from_text("X  QQ\n"), PreconditionError);
}

TEST_CASE("wav encode/decode and resampling") {
  AudioClip clip;
  clip.sample_rate = 8000;
  for (int i = 0; i < 8000; ++i) clip.samples.push_back(0.5f * static_cast<float>(std::sin(2 * std::numbers::pi * 440 * i / 8000.0)));
  const auto bytes = encode_wav(clip);
  const auto back = decode_wav(bytes, "x");
  CHECK(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); i += 97) CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-3).scale(1.0));

  const auto canon = canonicalize(back);
  CHECK(canon.sample_rate == 16000);
  CHECK(canon.samples.size() == 16000);
  // the tone survives resampling: compare against the analytic signal mid-clip
  for (std::size_t i = 4000; i < 12000; i += 501) {
    const double expected = 0.5 * std::sin(2 * std::numbers::pi * 440 * static_cast<double>(i) / 16000.0);
    CHECK(canon.samples[i] == doctest::Approx(expected).epsilon(0.02).scale(1.0));
  }

  CHECK_THROWS_AS(decode_wav(std::vector<std::uint8_t>{1, 2, 3}), PreconditionError);
  AudioClip empty;
  CHECK_THROWS_AS(canonicalize(empty), PreconditionError);
}

TEST_CASE("validate_aligned catches broken transcripts") {
  AlignedTranscript t{"u", TranscriptSource::kTarget, {}};
  CHECK_THROWS_AS(validate_aligned(t), PreconditionError);
  t.words.push_back({"we", 0.1, 0.3, {TimedPhone{"W", 0.1, 0.2, {}}, TimedPhone{"IY", 0.2, 0.3, {}}}});
  CHECK_NOTHROW(validate_aligned(t));
  t.words.push_back({"go", 0.05, 0.4, {TimedPhone{"G", 0.05, 0.4, {}}}});
  CHECK_THROWS_AS(validate_aligned(t), PreconditionError);
}
