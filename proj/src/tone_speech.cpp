#include "multipa/tone_speech.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "multipa/errors.hpp"

namespace multipa::tone {

namespace {

// Power of a tone of this amplitude is the "silence" score of every frame:
// frames whose strongest phone tone is weaker than this read as silence.
constexpr double kSilenceReferenceAmplitude = 0.02;
constexpr double kRampSeconds = 0.004;

struct AnalysisBank {
  std::vector<double> window;             // Hann, kWindowSamples
  std::vector<std::vector<double>> cos_t; // per inventory index (empty for silence)
  std::vector<std::vector<double>> sin_t;
  double silence_power = 0.0;
};

const AnalysisBank& analysis_bank(const PhoneInventory& inventory) {
  static const AnalysisBank bank = [&] {
    AnalysisBank b;
    const int n = kWindowSamples;
    b.window.resize(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      b.window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
      wsum += b.window[i];
    }
    b.cos_t.resize(inventory.size());
    b.sin_t.resize(inventory.size());
    for (std::size_t k = 0; k < inventory.size(); ++k) {
      if (k == inventory.silence_index()) continue;
      const double w = 2.0 * std::numbers::pi * phone_frequency(k) / kCanonicalSampleRate;
      b.cos_t[k].resize(n);
      b.sin_t[k].resize(n);
      for (int i = 0; i < n; ++i) {
        b.cos_t[k][i] = std::cos(w * i) * b.window[i];
        b.sin_t[k][i] = std::sin(w * i) * b.window[i];
      }
    }
    const double a = kSilenceReferenceAmplitude * wsum / 2.0;
    b.silence_power = a * a;
    return b;
  }();
  return bank;
}

}  // namespace

double phone_frequency(std::size_t phone_index) {
  if (phone_index == 0) return 0.0;
  return 200.0 + 75.0 * static_cast<double>(phone_index);
}

std::vector<SpokenWord> canonical_speech(const std::vector<std::string>& words, const Lexicon& lexicon,
                                         double phone_duration, double pause) {
  std::vector<SpokenWord> out;
  for (const auto& w : words) {
    SpokenWord sw;
    for (const auto& p : lexicon.pronounce(w)) sw.phones.push_back({p, phone_duration});
    sw.pause_after = pause;
    out.push_back(std::move(sw));
  }
  return out;
}

AudioClip synthesize(const std::vector<SpokenWord>& words, const SynthesisOptions& options,
                     const PhoneInventory& inventory) {
  const double sr = kCanonicalSampleRate;
  std::vector<float> out(static_cast<std::size_t>(std::lround(options.leading_silence * sr)), 0.0f);
  const auto ramp = static_cast<std::size_t>(kRampSeconds * sr);
  for (const auto& word : words) {
    for (const auto& phone : word.phones) {
      if (phone.duration <= 0.0) throw PreconditionError("synthesize: phone duration must be positive");
      const std::size_t idx = inventory.index_of(phone.label);
      const auto n = static_cast<std::size_t>(std::lround(phone.duration * sr));
      const double w = 2.0 * std::numbers::pi * phone_frequency(idx) / sr;
      for (std::size_t i = 0; i < n; ++i) {
        double gain = options.amplitude;
        const std::size_t edge = std::min(i, n - 1 - i);
        if (edge < ramp) gain *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) / ramp);
        out.push_back(idx == inventory.silence_index() ? 0.0f : static_cast<float>(gain * std::sin(w * i)));
      }
    }
    out.resize(out.size() + static_cast<std::size_t>(std::lround(std::max(0.0, word.pause_after) * sr)), 0.0f);
  }
  out.resize(out.size() + static_cast<std::size_t>(std::lround(options.trailing_silence * sr)), 0.0f);
  if (options.noise_std > 0.0) {
    std::mt19937_64 rng(options.noise_seed);
    std::normal_distribution<double> noise(0.0, options.noise_std);
    for (auto& s : out) s += static_cast<float>(noise(rng));
  }
  AudioClip clip;
  clip.samples = std::move(out);
  clip.sample_rate = kCanonicalSampleRate;
  return clip;
}

Eigen::MatrixXd frame_posteriors(const AudioClip& audio, const PhoneInventory& inventory) {
  validate_audio(audio);
  const auto& bank = analysis_bank(inventory);
  const auto total = static_cast<long>(audio.samples.size());
  const long frames = std::max<long>(1, total / kHopSamples);
  const std::size_t k_count = inventory.size();
  Eigen::MatrixXd post(frames, static_cast<Eigen::Index>(k_count));
  std::vector<double> seg(kWindowSamples);
  for (long t = 0; t < frames; ++t) {
    const long begin = t * kHopSamples + kHopSamples / 2 - kWindowSamples / 2;
    for (int i = 0; i < kWindowSamples; ++i) {
      const long j = begin + i;
      seg[i] = (j >= 0 && j < total) ? audio.samples[static_cast<std::size_t>(j)] : 0.0;
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      double p;
      if (k == inventory.silence_index()) {
        p = bank.silence_power;
      } else {
        double re = 0.0, im = 0.0;
        const auto& c = bank.cos_t[k];
        const auto& s = bank.sin_t[k];
        for (int i = 0; i < kWindowSamples; ++i) {
          re += seg[i] * c[i];
          im += seg[i] * s[i];
        }
        p = re * re + im * im;
      }
      post(t, static_cast<Eigen::Index>(k)) = p + 1e-12;
      norm += p + 1e-12;
    }
    post.row(t) /= norm;
  }
  return post;
}

ViterbiAligner::ViterbiAligner(const Lexicon& lexicon, const PhoneInventory& inventory)
    : lexicon_(&lexicon), inventory_(&inventory) {}

AlignedTranscript ViterbiAligner::align(const RawTranscript& transcript, const AudioClip& audio) const {
  return align(transcript, frame_posteriors(audio, *inventory_), audio.id);
}

AlignedTranscript ViterbiAligner::align(const RawTranscript& transcript, const Eigen::MatrixXd& posteriors,
                                        const std::string& utterance_id) const {
  if (transcript.empty()) throw AlignmentFailure("cannot align an empty transcript");
  if (posteriors.cols() != static_cast<Eigen::Index>(inventory_->size())) {
    throw PreconditionError("posterior width does not match the phone inventory");
  }
  struct State {
    std::size_t phone;  // inventory index
    int word = -1;      // -1 for optional silence
    bool optional = false;
  };
  std::vector<State> states;
  const std::size_t sil = inventory_->silence_index();
  std::vector<std::vector<std::string>> prons;
  states.push_back({sil, -1, true});
  std::size_t mandatory = 0;
  for (std::size_t w = 0; w < transcript.words.size(); ++w) {
    auto pron = lexicon_->pronounce(transcript.words[w]);
    if (pron.empty()) throw AlignmentFailure("no pronunciation for '" + transcript.words[w] + "'");
    for (const auto& p : pron) states.push_back({inventory_->index_of(p), static_cast<int>(w), false});
    mandatory += pron.size();
    prons.push_back(std::move(pron));
    states.push_back({sil, -1, true});
  }
  const long T = posteriors.rows();
  const long S = static_cast<long>(states.size());
  if (static_cast<long>(mandatory) > T) {
    throw AlignmentFailure("transcript has " + std::to_string(mandatory) + " phones but audio has only " +
                           std::to_string(T) + " frames");
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd logp = posteriors.array().max(1e-300).log().matrix();
  std::vector<double> delta(S, kNegInf), next(S);
  std::vector<std::uint8_t> back(static_cast<std::size_t>(T * S), 0);
  delta[0] = logp(0, static_cast<Eigen::Index>(states[0].phone));
  delta[1] = logp(0, static_cast<Eigen::Index>(states[1].phone));
  for (long t = 1; t < T; ++t) {
    for (long s = 0; s < S; ++s) {
      double best = delta[s];
      std::uint8_t step = 0;
      if (s >= 1 && delta[s - 1] > best) {
        best = delta[s - 1];
        step = 1;
      }
      if (s >= 2 && states[s - 1].optional && delta[s - 2] > best) {
        best = delta[s - 2];
        step = 2;
      }
      next[s] = best == kNegInf ? kNegInf : best + logp(t, static_cast<Eigen::Index>(states[s].phone));
      back[static_cast<std::size_t>(t * S + s)] = step;
    }
    std::swap(delta, next);
  }
  long s = delta[S - 1] >= delta[S - 2] ? S - 1 : S - 2;
  if (delta[s] == kNegInf) throw AlignmentFailure("no complete alignment path");
  std::vector<long> path(T);
  for (long t = T - 1; t >= 0; --t) {
    path[t] = s;
    s -= back[static_cast<std::size_t>(t * S + s)];
  }

  AlignedTranscript out;
  out.utterance_id = utterance_id;
  out.source = transcript.source;
  out.words.resize(transcript.words.size());
  for (std::size_t w = 0; w < transcript.words.size(); ++w) out.words[w].text = transcript.words[w];
  long t = 0;
  while (t < T) {
    const long st = path[t];
    long u = t;
    while (u < T && path[u] == st) ++u;
    const State& state = states[st];
    if (state.word >= 0) {
      TimedPhone phone;
      phone.label = inventory_->symbol(state.phone);
      phone.start = static_cast<double>(t) * kFrameHop;
      phone.end = static_cast<double>(u) * kFrameHop;
      const Eigen::VectorXd avg = posteriors.middleRows(t, u - t).colwise().mean().transpose();
      phone.posterior.assign(avg.data(), avg.data() + avg.size());
      out.words[state.word].phones.push_back(std::move(phone));
    }
    t = u;
  }
  for (auto& word : out.words) {
    word.start = word.phones.front().start;
    word.end = word.phones.back().end;
  }
  return out;
}

RecognizerTier recognizer_tier(const std::string& model_id) {
  std::string id = model_id;
  for (const std::string prefix : {"openai/whisper-", "whisper-"}) {
    if (id.rfind(prefix, 0) == 0) id = id.substr(prefix.size());
  }
  if (id == "tiny.en") return {0, 1, 2};
  if (id == "base.en") return {0, 2, 2};
  if (id == "small.en") return {1, 3, 3};
  if (id == "medium.en") return {2, 3, 3};
  throw ModelUnavailable("unknown recognizer model '" + model_id + "'");
}

FrameRecognizer::FrameRecognizer(RecognizerTier tier, const Lexicon& lexicon, const PhoneInventory& inventory)
    : tier_(tier), lexicon_(&lexicon), inventory_(&inventory) {}

std::vector<std::string> FrameRecognizer::recognize(const AudioClip& audio) const {
  return recognize(frame_posteriors(audio, *inventory_));
}

std::vector<std::string> FrameRecognizer::recognize(const Eigen::MatrixXd& posteriors) const {
  const long T = posteriors.rows();
  const auto K = static_cast<std::size_t>(posteriors.cols());
  std::vector<std::size_t> labels(T);
  for (long t = 0; t < T; ++t) {
    Eigen::Index k;
    posteriors.row(t).maxCoeff(&k);
    labels[t] = static_cast<std::size_t>(k);
  }
  // majority filter; the centre label wins ties
  if (tier_.smoothing_half_width > 0) {
    std::vector<std::size_t> smoothed(T);
    std::vector<int> votes(K);
    const long w = tier_.smoothing_half_width;
    for (long t = 0; t < T; ++t) {
      std::fill(votes.begin(), votes.end(), 0);
      for (long u = std::max(0L, t - w); u <= std::min(T - 1, t + w); ++u) ++votes[labels[u]];
      std::size_t best = labels[t];
      for (std::size_t k = 0; k < K; ++k) {
        if (votes[k] > votes[best]) best = k;
      }
      smoothed[t] = best;
    }
    labels = std::move(smoothed);
  }

  struct Run {
    std::size_t label;
    long length;
  };
  auto runs_of = [](const std::vector<Run>& in) {
    std::vector<Run> out;
    for (const auto& r : in) {
      if (!out.empty() && out.back().label == r.label) {
        out.back().length += r.length;
      } else {
        out.push_back(r);
      }
    }
    return out;
  };
  std::vector<Run> runs;
  for (std::size_t l : labels) runs.push_back({l, 1});
  runs = runs_of(runs);

  const std::size_t sil = inventory_->silence_index();
  // absorb phone runs too short to be real into their left neighbour
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].label != sil && runs[i].length < tier_.min_phone_frames) {
      if (i > 0) {
        runs[i].label = runs[i - 1].label;
      } else if (i + 1 < runs.size()) {
        runs[i].label = runs[i + 1].label;
      } else {
        runs[i].label = sil;
      }
    }
  }
  runs = runs_of(runs);

  std::vector<std::string> words;
  std::vector<std::string> phones;
  auto flush = [&] {
    if (!phones.empty()) words.push_back(lexicon_->nearest_word(phones));
    phones.clear();
  };
  for (const auto& run : runs) {
    if (run.label == sil) {
      if (run.length >= tier_.min_pause_frames) flush();
      continue;
    }
    if (phones.empty() || phones.back() != inventory_->symbol(run.label)) phones.push_back(inventory_->symbol(run.label));
  }
  flush();
  if (words.empty()) throw EmptyTranscript("no speech detected");
  return words;
}

}  // namespace multipa::tone
