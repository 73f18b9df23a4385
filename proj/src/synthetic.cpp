#include "multipa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "multipa/audio.hpp"
#include "multipa/errors.hpp"
#include "multipa/phones.hpp"
#include "multipa/text.hpp"
#include "multipa/tone_speech.hpp"

namespace multipa {

namespace fs = std::filesystem;

namespace {

bool is_vowel(const std::string& phone) {
  static const std::set<std::string> vowels = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                               "EY", "IH", "IY", "OW", "OY", "UH", "UW"};
  return vowels.count(phone) > 0;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }
double clamp10(double v) { return std::clamp(v, 0.0, 10.0); }

}  // namespace

void SyntheticCorpusOptions::validate() const {
  if (train_utterances + test_utterances == 0) throw ConfigError("synthetic corpus needs at least one utterance");
  if (speakers == 0) throw ConfigError("synthetic corpus needs at least one speaker");
  if (min_words == 0 || max_words < min_words) throw ConfigError("need 1 <= min_words <= max_words");
  if (!(substitution_rate >= 0.0 && substitution_rate <= 1.0)) throw ConfigError("substitution_rate must lie in [0, 1]");
  if (!(omission_rate >= 0.0 && omission_rate < 1.0)) throw ConfigError("omission_rate must lie in [0, 1)");
}

std::vector<SyntheticUtterance> generate_synthetic_corpus(const SyntheticCorpusOptions& options) {
  options.validate();
  const Lexicon& lexicon = Lexicon::builtin();
  const PhoneInventory& inventory = PhoneInventory::arpabet();
  std::vector<std::string> vocab;
  for (const auto& w : lexicon.words()) {
    const auto n = lexicon.pronounce(w).size();
    if (n >= 2 && n <= 5) vocab.push_back(w);
  }
  if (vocab.size() < options.max_words) throw ConfigError("built-in lexicon too small for the requested sentence length");
  std::vector<std::string> speech_phones;
  for (std::size_t i = 0; i < inventory.size(); ++i) {
    if (i != inventory.silence_index()) speech_phones.push_back(inventory.symbol(i));
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> skill(options.speakers);
  for (std::size_t s = 0; s < options.speakers; ++s) {
    // Evenly spread skills with jitter so every corpus spans the range.
    skill[s] = std::clamp((static_cast<double>(s) + unit(rng)) / static_cast<double>(options.speakers), 0.0, 1.0);
  }

  const std::size_t total = options.train_utterances + options.test_utterances;
  std::vector<SyntheticUtterance> out;
  out.reserve(total);
  for (std::size_t u = 0; u < total; ++u) {
    const std::size_t spk = u % options.speakers;
    const double s = skill[spk];
    const double weakness = 1.0 - s;
    std::uniform_int_distribution<std::size_t> len(options.min_words, options.max_words);
    std::vector<std::string> words = vocab;
    std::shuffle(words.begin(), words.end(), rng);
    words.resize(len(rng));

    DatasetRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "syn%04zu", u);
    rec.utterance_id = id;
    rec.speaker = "spk" + std::to_string(spk);
    rec.split = u < options.train_utterances ? Split::kTrain : Split::kTest;
    rec.target_text = join_words(words);
    rec.target_words = words;

    std::vector<tone::SpokenWord> spoken;
    std::size_t omitted = 0, hesitations = 0;
    double jitter_sum = 0.0;
    std::size_t phone_total = 0;
    double word_acc_sum = 0.0, stress_sum = 0.0;
    std::lognormal_distribution<double> jitter(0.0, 0.08 + 0.30 * weakness);
    for (std::size_t w = 0; w < words.size(); ++w) {
      WordLabel wl;
      wl.word = words[w];
      const bool omit = unit(rng) < options.omission_rate * weakness && omitted + 1 < words.size();
      if (omit) {
        ++omitted;
        wl.scores = {0.0, 5.0, 0.0};
        rec.word_labels.push_back(wl);
        word_acc_sum += 0.0;
        stress_sum += 5.0;
        continue;
      }
      tone::SpokenWord sw;
      std::size_t substituted = 0;
      bool rushed_stress = false;
      bool first_vowel = true;
      for (const auto& p : lexicon.pronounce(words[w])) {
        std::string label = p;
        if (unit(rng) < options.substitution_rate * (0.2 + weakness)) {
          std::uniform_int_distribution<std::size_t> pick(0, speech_phones.size() - 1);
          do label = speech_phones[pick(rng)];
          while (label == p);
          ++substituted;
        }
        double d = std::clamp(0.08 * jitter(rng), 0.04, 0.16);
        jitter_sum += std::abs(std::log(d / 0.08));
        ++phone_total;
        if (is_vowel(p) && first_vowel) {
          first_vowel = false;
          if (unit(rng) < 0.35 * weakness) {
            rushed_stress = true;
            d = 0.03;
          }
        }
        sw.phones.push_back({label, d});
      }
      sw.pause_after = 0.05;
      if (w + 1 < words.size() && unit(rng) < 0.4 * weakness) {
        sw.pause_after = 0.25 + 0.35 * unit(rng);
        ++hesitations;
      }
      spoken.push_back(std::move(sw));
      const double n = static_cast<double>(lexicon.pronounce(words[w]).size());
      const double acc = clamp10(std::round(10.0 * (1.0 - 1.5 * static_cast<double>(substituted) / n)));
      const double stress = rushed_stress ? 5.0 : 10.0;
      wl.scores = {acc, stress, clamp10(std::round(0.8 * acc + 0.2 * stress))};
      rec.word_labels.push_back(wl);
      word_acc_sum += acc;
      stress_sum += stress;
    }

    const double nw = static_cast<double>(words.size());
    const double mean_jitter = phone_total ? jitter_sum / static_cast<double>(phone_total) : 0.0;
    const double accuracy = clamp10(round1(word_acc_sum / nw));
    const double completeness = round1(10.0 * (1.0 - static_cast<double>(omitted) / nw));
    const double fluency = clamp10(round1(10.0 - 2.5 * static_cast<double>(hesitations) - 8.0 * mean_jitter));
    const double prosody = clamp10(round1(0.6 * fluency + 0.4 * (stress_sum / nw) - 0.5 * unit(rng)));
    const double total = clamp10(round1((accuracy + fluency + prosody) / 3.0));
    rec.sentence_labels = {accuracy, completeness, fluency, prosody, total};

    tone::SynthesisOptions synth;
    synth.noise_seed = options.seed * 1000003ULL + u;
    SyntheticUtterance su;
    su.audio = tone::synthesize(spoken, synth, inventory);
    su.audio.id = rec.utterance_id;
    su.record = std::move(rec);
    out.push_back(std::move(su));
  }
  return out;
}

void write_synthetic_corpus(const fs::path& out_dir, const SyntheticCorpusOptions& options) {
  auto corpus = generate_synthetic_corpus(options);
  fs::create_directories(out_dir / "wav");
  std::vector<DatasetRecord> train, test;
  for (auto& u : corpus) {
    u.record.audio_path = fs::absolute(out_dir / "wav" / (u.record.utterance_id + ".wav"));
    write_wav(u.record.audio_path, u.audio);
    (u.record.split == Split::kTrain ? train : test).push_back(u.record);
  }
  if (!train.empty()) write_manifest(out_dir / "train.json", train, Split::kTrain, LabelRanges{});
  if (!test.empty()) write_manifest(out_dir / "test.json", test, Split::kTest, LabelRanges{});
}

}  // namespace multipa
