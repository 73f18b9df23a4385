#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "multipa/errors.hpp"
#include "multipa/evaluation.hpp"

using namespace multipa;

namespace {

AlignedTranscript timed(const std::vector<std::pair<double, double>>& spans) {
  AlignedTranscript t;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    TimedWord w;
    w.text = "w" + std::to_string(i);
    w.start = spans[i].first;
    w.end = spans[i].second;
    t.words.push_back(w);
  }
  return t;
}

std::vector<WordSpan> spans_of(const AlignedTranscript& t) {
  std::vector<WordSpan> out;
  for (const auto& w : t.words) out.push_back({w.start, w.end});
  return out;
}

WordLabel word_label(double acc, double stress, double total) { return {"w", {{acc, stress, total}}}; }

// Records with varied labels and simple word timings (word k spans [k, k+1)).
std::vector<DatasetRecord> stub_records(std::size_t n) {
  std::vector<DatasetRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    DatasetRecord r;
    r.utterance_id = "u" + std::to_string(i);
    r.split = Split::kTest;
    const double b = static_cast<double>(i % 7);
    r.sentence_labels = {3 + b, 4 + 0.5 * b, 2 + b * b / 7, 9 - b, 1 + (i % 3) + b};
    for (std::size_t k = 0; k < 3 + i % 2; ++k) {
      const double v = static_cast<double>((i * 3 + k * 5) % 11);
      r.word_labels.push_back(word_label(v, (i + k) % 2 ? 10.0 : 5.0, 10.0 - v));
      r.target_words.push_back("w" + std::to_string(k));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<const DatasetRecord*> pointers(const std::vector<DatasetRecord>& v) {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : v) out.push_back(&r);
  return out;
}

AlignedTranscript truth_alignment(const DatasetRecord& r) {
  std::vector<std::pair<double, double>> s;
  for (std::size_t k = 0; k < r.word_labels.size(); ++k) s.emplace_back(k, k + 1.0);
  return timed(s);
}

// Returns the human labels as predictions (ASRt == ground truth in open mode).
class PerfectScorer : public Scorer {
 public:
  AssessmentResult assess(const DatasetRecord& r, Mode mode) const override {
    AssessmentResult a;
    a.mode = mode;
    a.scores.sentence = {*r.sentence_labels[0], *r.sentence_labels[2], *r.sentence_labels[3], *r.sentence_labels[4]};
    if (mode == Mode::kClosed) a.scores.completeness = *r.sentence_labels[1];
    for (const auto& w : r.word_labels) a.scores.word.push_back({*w.scores[0], *w.scores[1], *w.scores[2]});
    a.word_spans = spans_of(truth_alignment(r));
    return a;
  }
  AlignedTranscript align_truth(const DatasetRecord& r) const override { return truth_alignment(r); }
};

class FailingScorer : public Scorer {
 public:
  AssessmentResult assess(const DatasetRecord& r, Mode) const override {
    throw AssessmentUnavailable(r.utterance_id + ": injected failure");
  }
  AlignedTranscript align_truth(const DatasetRecord& r) const override { return truth_alignment(r); }
};

// Fails on a given subset of utterances, otherwise perfect.
class PartialScorer : public PerfectScorer {
 public:
  explicit PartialScorer(std::set<std::string> failing) : failing_(std::move(failing)) {}
  AssessmentResult assess(const DatasetRecord& r, Mode mode) const override {
    if (failing_.count(r.utterance_id)) throw AssessmentUnavailable("injected");
    return PerfectScorer::assess(r, mode);
  }

 private:
  std::set<std::string> failing_;
};

LabelMinima minima_of(const std::vector<DatasetRecord>& train) { return label_minima(pointers(train)); }

}  // namespace

TEST_CASE("open-response target remapping examples") {
  const auto truth = timed({{0.0, 1.0}, {1.0, 2.0}, {3.0, 4.0}});
  const std::vector<WordLabel> labels = {word_label(6, 10, 6), word_label(10, 5, 10), word_label(8, 10, 8)};

  SUBCASE("one overlapping truth word") {
    const auto m = map_open_response_targets({{3.2, 3.8}}, truth, labels);
    CHECK(*m.targets[0][0] == 8.0);
    CHECK(m.excluded == 0);
  }
  SUBCASE("two overlapping truth words are averaged") {
    const auto m = map_open_response_targets({{0.5, 1.5}}, truth, labels);
    CHECK(*m.targets[0][0] == 8.0);
    CHECK(*m.targets[0][1] == 7.5);
  }
  SUBCASE("touching spans do not overlap; no overlap excludes the word") {
    const auto m = map_open_response_targets({{2.0, 3.0}, {4.0, 4.5}}, truth, labels);
    CHECK_FALSE(m.targets[0][0].has_value());
    CHECK_FALSE(m.targets[1][0].has_value());
    CHECK(m.excluded == 2);
  }
  SUBCASE("identity when the recognized words are the truth words") {
    const auto m = map_open_response_targets(spans_of(truth), truth, labels);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < 3; ++i) CHECK(*m.targets[k][i] == *labels[k].scores[i]);
    }
  }
  SUBCASE("missing labels are skipped in the mean") {
    auto partial = labels;
    partial[1].scores[0].reset();
    const auto m = map_open_response_targets({{0.5, 1.5}}, truth, partial);
    CHECK(*m.targets[0][0] == 6.0);
  }
  CHECK_THROWS_AS(map_open_response_targets({}, truth, {labels[0]}), PreconditionError);
}

TEST_CASE("every truth word with positive overlap contributes (fuzzed)") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> t, r;
    double c = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double len = 0.1 + u(rng) / 10;
      t.emplace_back(c, c + len);
      c += len + u(rng) / 20;
    }
    double d = 0.0;
    while (d < c) {
      const double len = 0.05 + u(rng) / 8;
      r.emplace_back(d, d + len);
      d += len + u(rng) / 30;
    }
    std::vector<WordLabel> labels;
    for (int k = 0; k < 6; ++k) labels.push_back(word_label(k, k, k));
    const auto truth = timed(t);
    const auto rec = timed(r);
    const auto m = map_open_response_targets(spans_of(rec), truth, labels);
    std::size_t excluded = 0;
    for (std::size_t k = 0; k < rec.words.size(); ++k) {
      std::vector<double> hits;
      for (std::size_t j = 0; j < 6; ++j) {
        if (spans_overlap(rec.words[k].start, rec.words[k].end, t[j].first, t[j].second)) hits.push_back(static_cast<double>(j));
      }
      if (hits.empty()) {
        ++excluded;
        CHECK_FALSE(m.targets[k][0].has_value());
      } else {
        double s = 0;
        for (double h : hits) s += h;
        CHECK(*m.targets[k][0] == doctest::Approx(s / hits.size()).epsilon(1e-15));
      }
    }
    CHECK(m.excluded == excluded);
  }
}

TEST_CASE("perfect stub scorer gives PCC 1 in both modes") {
  const auto test = stub_records(20);
  const auto minima = minima_of(stub_records(5));
  const PerfectScorer scorer;
  const auto closed = evaluate_closed(scorer, pointers(test), minima);
  CHECK(closed.fallback_count == 0);
  CHECK(closed.utterances == 20);
  for (const auto& [d, v] : closed.word_pcc) CHECK(*v.value == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& [d, v] : closed.sentence_pcc) CHECK(*v.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(closed.sentence_pcc.size() == 5);

  // ASRt output identical to the truth: word-level open report equals closed.
  const auto open = evaluate_open(scorer, pointers(test), minima);
  CHECK(open.sentence_pcc.count("completeness") == 0);
  CHECK(open.sentence_pcc.size() == 4);
  CHECK(open.excluded_words == 0);
  for (const auto& [d, v] : closed.word_pcc) CHECK(*open.word_pcc.at(d).value == *v.value);
}

TEST_CASE("failing scorer: every utterance falls back to the training minima") {
  const auto test = stub_records(20);
  const auto train = stub_records(9);
  const auto minima = minima_of(train);
  const FailingScorer scorer;
  for (Mode mode : {Mode::kClosed, Mode::kOpen}) {
    const auto f = mode == Mode::kClosed ? evaluate_closed(scorer, pointers(test), minima)
                                         : evaluate_open(scorer, pointers(test), minima);
    CHECK(f.fallback_count == 20);
    REQUIRE(f.predictions.size() == 20);
    for (std::size_t u = 0; u < 20; ++u) {
      const auto& p = f.predictions[u];
      CHECK(p.fallback);
      for (std::size_t i = 0; i < kSentenceLabelDims; ++i) {
        if (mode == Mode::kOpen && i == kCompletenessLabelIndex) {
          CHECK(p.sentence.count("completeness") == 0);
          continue;
        }
        CHECK(p.sentence.at(kSentenceLabelNames[i]) == minima.sentence[i]);
      }
      CHECK(p.words.size() == test[u].word_labels.size());
      for (const auto& w : p.words) CHECK(w == minima.word);
    }
    // Constant predictions: correlations are reported as undefined.
    for (const auto& [d, v] : f.sentence_pcc) {
      CHECK_FALSE(v.value.has_value());
      CHECK_FALSE(v.undefined_reason.empty());
    }
  }
}

TEST_CASE("fallback count equals the number of unavailable utterances") {
  const auto test = stub_records(20);
  const auto minima = minima_of(stub_records(9));
  const PartialScorer scorer({"u2", "u7", "u11"});
  const auto f = evaluate_closed(scorer, pointers(test), minima);
  CHECK(f.fallback_count == 3);
  std::size_t flagged = 0;
  for (const auto& p : f.predictions) flagged += p.fallback ? 1 : 0;
  CHECK(flagged == 3);
  // Fallback utterances stay in the correlation.
  CHECK(*f.sentence_pcc.at("total").value < 1.0);
}

TEST_CASE("pcc_value reports undefined correlations") {
  CHECK(*pcc_value({1, 2, 3}, {2, 4, 7}).value > 0.9);
  const auto c = pcc_value({1, 1, 1}, {1, 2, 3});
  CHECK_FALSE(c.value.has_value());
  CHECK_FALSE(c.undefined_reason.empty());
  CHECK_FALSE(pcc_value({1}, {1}).value.has_value());
}

TEST_CASE("run_seeds aggregation") {
  const auto test = stub_records(12);
  const auto minima = minima_of(stub_records(4));
  const PerfectScorer scorer;
  auto experiment = [&](std::uint64_t) {
    return std::vector<EvalFragment>{evaluate_closed(scorer, pointers(test), minima),
                                     evaluate_open(scorer, pointers(test), minima)};
  };
  SUBCASE("one seed: no std") {
    const auto reports = run_seeds(experiment, 1, 100, minima);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].mode == Mode::kClosed);
    CHECK(reports[1].mode == Mode::kOpen);
    CHECK(reports[0].seeds == std::vector<std::uint64_t>{100});
    for (const auto& [d, s] : reports[0].sentence) CHECK_FALSE(s.std.has_value());
  }
  SUBCASE("deterministic stub: std is zero") {
    const auto reports = run_seeds(experiment, 5, 0, minima);
    CHECK(reports[0].seeds.size() == 5);
    for (const auto& [d, s] : reports[0].word) {
      CHECK(s.per_seed.size() == 5);
      CHECK(*s.std == 0.0);
      CHECK(*s.mean == doctest::Approx(1.0));
    }
  }
  SUBCASE("mean and sample std across seeds") {
    std::vector<double> values = {0.5, 0.7, 0.6};
    std::size_t call = 0;
    auto varying = [&](std::uint64_t) {
      auto f = evaluate_closed(scorer, pointers(test), minima);
      f.sentence_pcc["total"].value = values[call++];
      return std::vector<EvalFragment>{f};
    };
    const auto r = run_seeds(varying, 3, 0, minima)[0];
    CHECK(*r.sentence.at("total").mean == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(*r.sentence.at("total").std == doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("a failing seed aborts the run") {
    auto flaky = [&](std::uint64_t seed) -> std::vector<EvalFragment> {
      if (seed == 2) throw NonFiniteLoss("seed 2 diverged");
      return experiment(seed);
    };
    CHECK_THROWS_AS(run_seeds(flaky, 5, 0, minima), NonFiniteLoss);
  }
  SUBCASE("undefined seeds leave the mean undefined") {
    const FailingScorer failing;
    auto fails = [&](std::uint64_t) { return std::vector<EvalFragment>{evaluate_closed(failing, pointers(test), minima)}; };
    const auto r = run_seeds(fails, 2, 0, minima)[0];
    CHECK_FALSE(r.sentence.at("total").mean.has_value());
    CHECK(r.fallback_counts == std::vector<std::size_t>{12, 12});
  }
  CHECK_THROWS_AS(run_seeds(experiment, 0, 0, minima), ConfigError);
}

TEST_CASE("report JSON round trip and table rendering") {
  const auto test = stub_records(12);
  const auto minima = minima_of(stub_records(4));
  const PartialScorer scorer({"u3"});
  auto experiment = [&](std::uint64_t) {
    return std::vector<EvalFragment>{evaluate_closed(scorer, pointers(test), minima),
                                     evaluate_open(FailingScorer{}, pointers(test), minima)};
  };
  const auto reports = run_seeds(experiment, 2, 7, minima);
  for (const auto& r : reports) {
    const nlohmann::json j = r;
    const auto back = j.get<EvalReport>();
    CHECK(nlohmann::json(back) == j);
    CHECK(back.fallback_minima.sentence == minima.sentence);
  }
  CHECK_THROWS_AS((nlohmann::json{{"mode", "closed"}}.get<EvalReport>()), SchemaViolation);

  const auto table = render_table(reports);
  CHECK(table.find("| System") == 0);
  CHECK(table.find("closed") != std::string::npos);
  CHECK(table.find("undef") != std::string::npos);  // open row: constant fallback predictions
  // Open row shows "-" for completeness.
  const auto open_row = table.substr(table.rfind("MultiPA"));
  CHECK(open_row.find(" - ") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);
}
