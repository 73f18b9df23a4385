#include "multipa/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "multipa/errors.hpp"
#include "multipa/metrics.hpp"

namespace multipa {

namespace {

// Prediction/truth pairs collected per dimension.
struct Columns {
  std::map<std::string, std::vector<double>> predicted, truth;

  void add(const std::string& dim, double p, const std::optional<double>& t) {
    if (!t) return;
    predicted[dim].push_back(p);
    truth[dim].push_back(*t);
  }
};

std::map<std::string, PccValue> correlate(const Columns& c, const std::vector<std::string>& dims) {
  std::map<std::string, PccValue> out;
  for (const auto& d : dims) {
    const auto p = c.predicted.find(d);
    out[d] = p == c.predicted.end() ? PccValue{std::nullopt, "no labelled samples"}
                                    : pcc_value(p->second, c.truth.at(d));
  }
  return out;
}

std::vector<std::string> sentence_dims(Mode mode) {
  std::vector<std::string> dims;
  for (std::size_t i = 0; i < kSentenceLabelDims; ++i) {
    if (mode == Mode::kOpen && i == kCompletenessLabelIndex) continue;
    dims.emplace_back(kSentenceLabelNames[i]);
  }
  return dims;
}

std::vector<std::string> word_dims() { return {kWordDimNames.begin(), kWordDimNames.end()}; }

double sentence_prediction(const ScoreOutput& s, std::size_t label_index) {
  if (label_index == kCompletenessLabelIndex) {
    if (!s.completeness) throw PreconditionError("closed-mode assessment is missing the completeness score");
    return *s.completeness;
  }
  for (std::size_t i = 0; i < kSentenceOutputs; ++i) {
    if (kSentenceOutputLabelIndex[i] == label_index) return s.sentence.at(i);
  }
  throw PreconditionError("unknown sentence dimension");
}

UtterancePrediction fallback_prediction(const DatasetRecord& r, Mode mode, const LabelMinima& minima,
                                        Columns& sentence, Columns& word) {
  UtterancePrediction up;
  up.utterance_id = r.utterance_id;
  up.fallback = true;
  for (std::size_t i = 0; i < kSentenceLabelDims; ++i) {
    if (mode == Mode::kOpen && i == kCompletenessLabelIndex) continue;
    up.sentence[kSentenceLabelNames[i]] = minima.sentence[i];
    sentence.add(kSentenceLabelNames[i], minima.sentence[i], r.sentence_labels[i]);
  }
  // One fallback prediction per ground-truth word, in both modes.
  for (const auto& w : r.word_labels) {
    up.words.push_back(minima.word);
    for (std::size_t i = 0; i < kWordOutputs; ++i) word.add(kWordDimNames[i], minima.word[i], w.scores[i]);
  }
  return up;
}

EvalFragment evaluate(const Scorer& scorer, const std::vector<const DatasetRecord*>& test, const LabelMinima& minima,
                      Mode mode) {
  EvalFragment f;
  f.mode = mode;
  Columns sentence, word;
  for (const DatasetRecord* r : test) {
    ++f.utterances;
    AssessmentResult result;
    AlignedTranscript truth;
    try {
      result = scorer.assess(*r, mode);
      if (mode == Mode::kOpen) truth = scorer.align_truth(*r);
    } catch (const AssessmentUnavailable&) {
      ++f.fallback_count;
      f.predictions.push_back(fallback_prediction(*r, mode, minima, sentence, word));
      continue;
    } catch (const AlignmentFailure&) {
      ++f.fallback_count;
      f.predictions.push_back(fallback_prediction(*r, mode, minima, sentence, word));
      continue;
    } catch (const EmptyTranscript&) {
      ++f.fallback_count;
      f.predictions.push_back(fallback_prediction(*r, mode, minima, sentence, word));
      continue;
    }

    UtterancePrediction up;
    up.utterance_id = r->utterance_id;
    for (std::size_t i = 0; i < kSentenceLabelDims; ++i) {
      if (mode == Mode::kOpen && i == kCompletenessLabelIndex) continue;
      const double p = sentence_prediction(result.scores, i);
      up.sentence[kSentenceLabelNames[i]] = p;
      sentence.add(kSentenceLabelNames[i], p, r->sentence_labels[i]);
    }
    const auto& ws = result.scores.word;
    for (const auto& w : ws) up.words.push_back({w.accuracy, w.stress, w.total});

    if (mode == Mode::kClosed) {
      if (!r->word_labels.empty() && ws.size() != r->word_labels.size()) {
        throw SchemaViolation(r->utterance_id, "scorer returned " + std::to_string(ws.size()) + " word scores for " +
                                                   std::to_string(r->word_labels.size()) + " labelled words");
      }
      for (std::size_t k = 0; k < r->word_labels.size(); ++k) {
        for (std::size_t i = 0; i < kWordOutputs; ++i) word.add(kWordDimNames[i], ws[k].at(i), r->word_labels[k].scores[i]);
      }
    } else if (!r->word_labels.empty()) {
      if (result.word_spans.size() != ws.size()) {
        throw PreconditionError(r->utterance_id + ": open-mode assessment lacks word spans");
      }
      const auto mapped = map_open_response_targets(result.word_spans, truth, r->word_labels);
      f.excluded_words += mapped.excluded;
      for (std::size_t k = 0; k < ws.size(); ++k) {
        for (std::size_t i = 0; i < kWordOutputs; ++i) word.add(kWordDimNames[i], ws[k].at(i), mapped.targets[k][i]);
      }
    }
    f.predictions.push_back(std::move(up));
  }
  f.word_pcc = correlate(word, word_dims());
  f.sentence_pcc = correlate(sentence, sentence_dims(mode));
  return f;
}

nlohmann::json pcc_json(const PccValue& v) {
  if (v.value) return *v.value;
  return {{"undefined", v.undefined_reason}};
}

PccValue pcc_from_json(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), {}};
  return {std::nullopt, j.at("undefined").get<std::string>()};
}

nlohmann::json summary_json(const DimensionSummary& s) {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& v : s.per_seed) per_seed.push_back(pcc_json(v));
  nlohmann::json j = {{"per_seed", std::move(per_seed)}};
  j["mean"] = s.mean ? nlohmann::json(*s.mean) : nlohmann::json(nullptr);
  if (s.std) j["std"] = *s.std;
  return j;
}

DimensionSummary summary_from_json(const nlohmann::json& j) {
  DimensionSummary s;
  for (const auto& v : j.at("per_seed")) s.per_seed.push_back(pcc_from_json(v));
  if (!j.at("mean").is_null()) s.mean = j.at("mean").get<double>();
  if (j.contains("std")) s.std = j.at("std").get<double>();
  return s;
}

DimensionSummary summarize(const std::vector<PccValue>& values) {
  DimensionSummary s;
  s.per_seed = values;
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v.value) defined.push_back(*v.value);
  }
  if (defined.size() == values.size() && !defined.empty()) {
    s.mean = mean(defined);
    if (defined.size() >= 2) s.std = sample_std(defined);
  }
  return s;
}

}  // namespace

OpenTargets map_open_response_targets(const std::vector<WordSpan>& recognized, const AlignedTranscript& truth,
                                      const std::vector<WordLabel>& truth_labels) {
  if (truth.words.size() != truth_labels.size()) {
    throw PreconditionError("ground-truth alignment has " + std::to_string(truth.words.size()) + " words but " +
                            std::to_string(truth_labels.size()) + " word labels");
  }
  OpenTargets out;
  out.targets.resize(recognized.size());
  for (std::size_t k = 0; k < recognized.size(); ++k) {
    std::array<double, kWordOutputs> sum{};
    std::array<std::size_t, kWordOutputs> count{};
    bool any = false;
    for (std::size_t t = 0; t < truth.words.size(); ++t) {
      const auto& tw = truth.words[t];
      if (!spans_overlap(recognized[k].start, recognized[k].end, tw.start, tw.end)) continue;
      any = true;
      for (std::size_t i = 0; i < kWordOutputs; ++i) {
        if (!truth_labels[t].scores[i]) continue;
        sum[i] += *truth_labels[t].scores[i];
        ++count[i];
      }
    }
    if (!any) {
      ++out.excluded;
      continue;
    }
    for (std::size_t i = 0; i < kWordOutputs; ++i) {
      if (count[i] > 0) out.targets[k][i] = sum[i] / static_cast<double>(count[i]);
    }
  }
  return out;
}

PccValue pcc_value(const std::vector<double>& predicted, const std::vector<double>& truth) {
  try {
    return {pcc(predicted, truth), {}};
  } catch (const DegenerateInput& e) {
    return {std::nullopt, e.what()};
  }
}

EvalFragment evaluate_closed(const Scorer& scorer, const std::vector<const DatasetRecord*>& test,
                             const LabelMinima& fallback) {
  return evaluate(scorer, test, fallback, Mode::kClosed);
}

EvalFragment evaluate_open(const Scorer& scorer, const std::vector<const DatasetRecord*>& test,
                           const LabelMinima& fallback) {
  return evaluate(scorer, test, fallback, Mode::kOpen);
}

EvalReport aggregate(const std::vector<EvalFragment>& per_seed, const std::vector<std::uint64_t>& seeds,
                     const LabelMinima& minima, std::string label) {
  if (per_seed.empty()) throw DegenerateInput("no evaluation runs to aggregate");
  if (per_seed.size() != seeds.size()) throw PreconditionError("one seed per evaluation run is required");
  EvalReport r;
  r.mode = per_seed.front().mode;
  r.label = std::move(label);
  r.seeds = seeds;
  r.fallback_minima = minima;
  auto collect = [&](auto member, const std::vector<std::string>& dims, std::map<std::string, DimensionSummary>& into) {
    for (const auto& d : dims) {
      std::vector<PccValue> values;
      for (const auto& f : per_seed) values.push_back((f.*member).at(d));
      into[d] = summarize(values);
    }
  };
  for (const auto& f : per_seed) {
    if (f.mode != r.mode) throw PreconditionError("cannot aggregate fragments of different modes");
    r.fallback_counts.push_back(f.fallback_count);
    r.excluded_words.push_back(f.excluded_words);
  }
  collect(&EvalFragment::word_pcc, word_dims(), r.word);
  collect(&EvalFragment::sentence_pcc, sentence_dims(r.mode), r.sentence);
  return r;
}

std::vector<EvalReport> run_seeds(const std::function<std::vector<EvalFragment>(std::uint64_t)>& experiment,
                                  std::size_t n_seeds, std::uint64_t base_seed, const LabelMinima& minima,
                                  const std::string& label) {
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<EvalFragment>> by_mode;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = base_seed + s;
    auto fragments = experiment(seed);
    if (s == 0) by_mode.resize(fragments.size());
    if (fragments.size() != by_mode.size()) {
      throw PreconditionError("seed " + std::to_string(seed) + " returned a different number of evaluations");
    }
    for (std::size_t m = 0; m < fragments.size(); ++m) by_mode[m].push_back(std::move(fragments[m]));
    seeds.push_back(seed);
  }
  std::vector<EvalReport> out;
  for (const auto& fragments : by_mode) out.push_back(aggregate(fragments, seeds, minima, label));
  return out;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json word = nlohmann::json::object(), sentence = nlohmann::json::object();
  for (const auto& [d, s] : r.word) word[d] = summary_json(s);
  for (const auto& [d, s] : r.sentence) sentence[d] = summary_json(s);
  j = {{"mode", std::string(to_string(r.mode))},
       {"label", r.label},
       {"seeds", r.seeds},
       {"word", std::move(word)},
       {"sentence", std::move(sentence)},
       {"fallback_count", r.fallback_counts},
       {"excluded_words", r.excluded_words},
       {"fallback_minima", r.fallback_minima}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  try {
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    r.label = j.at("label").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.word.clear();
    r.sentence.clear();
    for (const auto& [d, s] : j.at("word").items()) r.word[d] = summary_from_json(s);
    for (const auto& [d, s] : j.at("sentence").items()) r.sentence[d] = summary_from_json(s);
    r.fallback_counts = j.at("fallback_count").get<std::vector<std::size_t>>();
    r.excluded_words = j.at("excluded_words").get<std::vector<std::size_t>>();
    r.fallback_minima = j.at("fallback_minima").get<LabelMinima>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation("", std::string("malformed evaluation report: ") + e.what());
  }
}

std::string render_table(const std::vector<EvalReport>& reports) {
  auto cell = [](const std::map<std::string, DimensionSummary>& m, const std::string& d) -> std::string {
    const auto it = m.find(d);
    if (it == m.end()) return "-";
    const auto& s = it->second;
    if (!s.mean) return "undef";
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << *s.mean;
    if (s.std) out << " (" << std::setprecision(3) << *s.std << ")";
    return out.str();
  };
  const std::vector<std::string> headers = {"System",    "Setting",   "W-Acc",   "W-Stress", "W-Total",
                                            "S-Acc",     "S-Comp",    "S-Fluency", "S-Prosody", "S-Total"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.label, r.mode == Mode::kClosed ? "closed" : "open", cell(r.word, "accuracy"),
                    cell(r.word, "stress"), cell(r.word, "total"), cell(r.sentence, "accuracy"),
                    cell(r.sentence, "completeness"), cell(r.sentence, "fluency"), cell(r.sentence, "prosody"),
                    cell(r.sentence, "total")});
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    out << "|";
    for (std::size_t c = 0; c < cells.size(); ++c) out << " " << std::left << std::setw(static_cast<int>(width[c])) << cells[c] << " |";
    out << "\n";
  };
  line(headers);
  out << "|";
  for (auto w : width) out << std::string(w + 2, '-') << "|";
  out << "\n";
  for (const auto& row : rows) line(row);
  return out.str();
}

}  // namespace multipa
