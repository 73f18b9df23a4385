#include "multipa/types.hpp"

#include <cmath>
#include <string>

#include "multipa/errors.hpp"
#include "multipa/text.hpp"

namespace multipa {

void validate_audio(const AudioClip& audio) {
  if (audio.sample_rate != kCanonicalSampleRate) {
    throw PreconditionError("audio '" + audio.id + "' has sample rate " +
                            std::to_string(audio.sample_rate) + ", expected 16000");
  }
  if (audio.samples.empty()) throw PreconditionError("audio '" + audio.id + "' is empty");
  for (float s : audio.samples) {
    if (!std::isfinite(s)) throw PreconditionError("audio '" + audio.id + "' has non-finite samples");
  }
}

std::string_view to_string(TranscriptSource source) {
  switch (source) {
    case TranscriptSource::kTarget: return "target";
    case TranscriptSource::kAsrP: return "asrp";
    case TranscriptSource::kAsrT: return "asrt";
  }
  return "target";
}

TranscriptSource transcript_source_from_string(std::string_view name) {
  if (name == "target") return TranscriptSource::kTarget;
  if (name == "asrp") return TranscriptSource::kAsrP;
  if (name == "asrt") return TranscriptSource::kAsrT;
  throw PreconditionError("unknown transcript source '" + std::string(name) + "'");
}

std::string RawTranscript::text() const { return join_words(words); }

std::size_t AlignedTranscript::phone_count() const {
  std::size_t n = 0;
  for (const auto& w : words) n += w.phones.size();
  return n;
}

RawTranscript AlignedTranscript::raw() const {
  RawTranscript t;
  t.source = source;
  t.words.reserve(words.size());
  for (const auto& w : words) t.words.push_back(w.text);
  return t;
}

void validate_aligned(const AlignedTranscript& aligned, std::size_t inventory_size) {
  const std::string& id = aligned.utterance_id;
  if (aligned.words.empty()) throw PreconditionError(id + ": aligned transcript has no words");
  double prev_start = -1.0;
  double prev_end = 0.0;
  for (std::size_t i = 0; i < aligned.words.size(); ++i) {
    const TimedWord& w = aligned.words[i];
    const std::string where = id + " word " + std::to_string(i) + " '" + w.text + "'";
    if (w.text.empty()) throw PreconditionError(where + ": empty text");
    if (!(w.start >= 0.0 && w.start <= w.end)) throw PreconditionError(where + ": bad span");
    if (w.start < prev_start) throw PreconditionError(where + ": words not time-ordered");
    if (i > 0 && w.start < prev_end - kSpanSlack) throw PreconditionError(where + ": overlaps previous word");
    if (w.phones.empty()) throw PreconditionError(where + ": no phones");
    double phone_prev = w.start - kSpanSlack;
    for (const TimedPhone& p : w.phones) {
      if (!(p.start >= 0.0 && p.start <= p.end)) throw PreconditionError(where + ": bad phone span");
      if (p.start < phone_prev) throw PreconditionError(where + ": phones not time-ordered");
      if (p.start < w.start - kSpanSlack || p.end > w.end + kSpanSlack) {
        throw PreconditionError(where + ": phone '" + p.label + "' outside word span");
      }
      phone_prev = p.start;
      if (!p.posterior.empty()) {
        if (inventory_size != 0 && p.posterior.size() != inventory_size) {
          throw PreconditionError(where + ": posterior width mismatch");
        }
        double sum = 0.0;
        for (double v : p.posterior) {
          if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError(where + ": posterior entry outside [0,1]");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-4) throw PreconditionError(where + ": posterior does not sum to 1");
      }
    }
    prev_start = w.start;
    prev_end = w.end;
  }
}

AlignedTranscript shifted(const AlignedTranscript& aligned, double delta_seconds) {
  AlignedTranscript out = aligned;
  for (auto& w : out.words) {
    w.start += delta_seconds;
    w.end += delta_seconds;
    for (auto& p : w.phones) {
      p.start += delta_seconds;
      p.end += delta_seconds;
    }
  }
  return out;
}

}  // namespace multipa
