#pragma once

// Domain types shared across the pipeline: audio, transcripts, and the
// time-stamped transcripts produced by forced alignment.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace multipa {

inline constexpr int kCanonicalSampleRate = 16000;

struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kCanonicalSampleRate;
  std::string id;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Throws PreconditionError unless the clip is canonical, non-empty and finite.
void validate_audio(const AudioClip& audio);

enum class TranscriptSource { kTarget, kAsrP, kAsrT };

std::string_view to_string(TranscriptSource source);
TranscriptSource transcript_source_from_string(std::string_view name);

struct RawTranscript {
  std::vector<std::string> words;
  TranscriptSource source = TranscriptSource::kTarget;

  bool empty() const { return words.empty(); }
  std::string text() const;
};

struct TimedPhone {
  std::string label;
  double start = 0.0;
  double end = 0.0;
  // One entry per phone inventory symbol; empty when posteriors are unavailable.
  std::vector<double> posterior;

  double duration() const { return end - start; }
};

struct TimedWord {
  std::string text;
  double start = 0.0;
  double end = 0.0;
  std::vector<TimedPhone> phones;

  double duration() const { return end - start; }
};

struct AlignedTranscript {
  std::string utterance_id;
  TranscriptSource source = TranscriptSource::kTarget;
  std::vector<TimedWord> words;

  std::size_t phone_count() const;
  RawTranscript raw() const;
};

// Tolerance used when checking containment and overlap of aligner spans.
inline constexpr double kSpanSlack = 0.020;

// Checks the AlignedTranscript invariants; throws PreconditionError with a
// description of the first violation.
void validate_aligned(const AlignedTranscript& aligned, std::size_t inventory_size = 0);

// One embedding row per transcript word.
struct WordEmbeddingSeq {
  Eigen::MatrixXd vectors;

  std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
};

// Time-ordered frame vectors from the acoustic front end.
struct AcousticFrameSeq {
  Eigen::MatrixXd frames;  // rows = frames
  double frame_hop = 0.020;

  std::size_t size() const { return static_cast<std::size_t>(frames.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(frames.cols()); }
};

AlignedTranscript shifted(const AlignedTranscript& aligned, double delta_seconds);

}  // namespace multipa
