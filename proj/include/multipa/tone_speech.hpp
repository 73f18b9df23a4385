#pragma once

// A self-contained "tone speech" model family. Every phone of the inventory
// is voiced as a pure tone at its own frequency; silence is silence. Over
// such signals the frame classifier below is an exact acoustic model, which
// gives the pipeline a forced aligner and a recognizer that behave like the
// real ones (short spans for words missing from the audio, recognition
// errors for substituted phones) while running offline and deterministically.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "multipa/phones.hpp"
#include "multipa/types.hpp"

namespace multipa::tone {

inline constexpr double kFrameHop = 0.010;       // aligner resolution, seconds
inline constexpr int kHopSamples = 160;
inline constexpr int kWindowSamples = 512;

double phone_frequency(std::size_t phone_index);

struct SpokenPhone {
  std::string label;     // phone actually voiced
  double duration = 0.0; // seconds
};

struct SpokenWord {
  std::vector<SpokenPhone> phones;
  double pause_after = 0.05;  // seconds of silence following the word
};

struct SynthesisOptions {
  double leading_silence = 0.15;
  double trailing_silence = 0.15;
  double amplitude = 0.3;
  double noise_std = 0.002;
  std::uint64_t noise_seed = 1;
};

// Canonical pronunciation of a word list with uniform phone durations.
std::vector<SpokenWord> canonical_speech(const std::vector<std::string>& words, const Lexicon& lexicon = Lexicon::builtin(),
                                         double phone_duration = 0.08, double pause = 0.05);

AudioClip synthesize(const std::vector<SpokenWord>& words, const SynthesisOptions& options = {},
                     const PhoneInventory& inventory = PhoneInventory::arpabet());

// Per-frame posterior over the phone inventory (rows = frames at 10 ms hop).
Eigen::MatrixXd frame_posteriors(const AudioClip& audio, const PhoneInventory& inventory = PhoneInventory::arpabet());

// Viterbi forced alignment of a word sequence against frame posteriors.
// Each phone occupies at least one frame; optional silence may separate
// words and pad both ends. Throws AlignmentFailure when the transcript is
// empty or has more phones than the audio has frames.
class ViterbiAligner {
 public:
  explicit ViterbiAligner(const Lexicon& lexicon = Lexicon::builtin(),
                          const PhoneInventory& inventory = PhoneInventory::arpabet());

  AlignedTranscript align(const RawTranscript& transcript, const AudioClip& audio) const;
  AlignedTranscript align(const RawTranscript& transcript, const Eigen::MatrixXd& posteriors,
                          const std::string& utterance_id) const;

 private:
  const Lexicon* lexicon_;
  const PhoneInventory* inventory_;
};

// Decoder settings that stand in for recognizer capacity.
struct RecognizerTier {
  int smoothing_half_width = 0;  // majority filter over 2w+1 frames
  int min_phone_frames = 2;      // shorter runs are absorbed by neighbours
  int min_pause_frames = 2;      // silence this long separates words
};

// Maps "tiny.en", "base.en", "small.en", "medium.en" (optionally prefixed
// "whisper-" or "openai/whisper-") to decoder tiers. Throws ModelUnavailable
// for other ids.
RecognizerTier recognizer_tier(const std::string& model_id);

class FrameRecognizer {
 public:
  explicit FrameRecognizer(RecognizerTier tier, const Lexicon& lexicon = Lexicon::builtin(),
                           const PhoneInventory& inventory = PhoneInventory::arpabet());

  // Throws EmptyTranscript when no speech is found.
  std::vector<std::string> recognize(const AudioClip& audio) const;
  std::vector<std::string> recognize(const Eigen::MatrixXd& posteriors) const;

 private:
  RecognizerTier tier_;
  const Lexicon* lexicon_;
  const PhoneInventory* inventory_;
};

}  // namespace multipa::tone
