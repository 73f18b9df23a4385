#include <random>

#include "doctest.h"
#include "multipa/errors.hpp"
#include "multipa/features.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace multipa;

namespace {

TimedPhone phone(const std::string& label, double start, double end) {
  const auto& inv = PhoneInventory::arpabet();
  TimedPhone p{label, start, end, std::vector<double>(inv.size(), 0.0)};
  p.posterior[inv.index_of(label)] = 1.0;
  return p;
}

// A word whose phones split [start, end] evenly.
TimedWord word(const std::string& text, double start, double end, std::vector<std::string> labels) {
  TimedWord w{text, start, end, {}};
  const double step = (end - start) / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    w.phones.push_back(phone(labels[i], start + step * i, i + 1 == labels.size() ? end : start + step * (i + 1)));
  }
  return w;
}

AlignedTranscript transcript(std::vector<TimedWord> words, TranscriptSource src = TranscriptSource::kTarget) {
  return AlignedTranscript{"utt", src, std::move(words)};
}

WordEmbeddingSeq embeddings(std::size_t n, std::size_t dim, double base) {
  WordEmbeddingSeq e;
  e.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < e.vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < e.vectors.cols(); ++c) e.vectors(r, c) = base + static_cast<double>(r * 10 + c);
  return e;
}

}  // namespace

TEST_CASE("levenshtein examples") {
  CHECK(levenshtein("word", "word") == 0);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("kitten", "sitting") == oracle::edit_distance("kitten", "sitting"));
  CHECK(levenshtein("kitten", "sitting") == 3);
  const std::vector<std::string> a{"K", "AE", "T"}, b{"K", "AH", "T", "S"};
  CHECK(levenshtein(a, b) == 2);
}

TEST_CASE("levenshtein symmetric, zero iff equal (fuzzed)") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 12), ch(0, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string a, b;
    for (int i = len(rng); i > 0; --i) a.push_back(static_cast<char>('a' + ch(rng)));
    for (int i = len(rng); i > 0; --i) b.push_back(static_cast<char>('a' + ch(rng)));
    CHECK(levenshtein(a, b) == levenshtein(b, a));
    CHECK(levenshtein(a, a) == 0);
    CHECK((levenshtein(a, b) == 0) == (a == b));
  }
}

TEST_CASE("align_words_by_time") {
  SUBCASE("identical transcripts pair one-to-one") {
    auto t = transcript({word("we", 0.1, 0.3, {"W", "IY"}), word("call", 0.35, 0.7, {"K", "AO", "L"})});
    const auto wpa = align_words_by_time(t, t);
    REQUIRE(wpa.pairs.size() == 2);
    CHECK(wpa.pairs[0] == std::vector<std::size_t>{0});
    CHECK(wpa.pairs[1] == std::vector<std::size_t>{1});
  }
  SUBCASE("split perceived word counts twice") {
    auto t = transcript({word("sometime", 0.0, 0.6, {"S", "AH", "M", "T", "AY", "M"})});
    auto p = transcript({word("some", 0.0, 0.3, {"S", "AH", "M"}), word("time", 0.3, 0.6, {"T", "AY", "M"})},
                        TranscriptSource::kAsrP);
    const auto wpa = align_words_by_time(t, p);
    CHECK(wpa.pairs[0] == std::vector<std::size_t>{0, 1});
    const auto f = compute_word_features(t, p, wpa);
    CHECK(f[0].aligned_word_count == 2);
  }
  SUBCASE("perceived word inside a silent gap aligns to nothing") {
    auto t = transcript({word("we", 0.0, 0.3, {"W", "IY"}), word("go", 0.8, 1.0, {"G", "OW"})});
    auto p = transcript({word("uh", 0.4, 0.6, {"AH"})}, TranscriptSource::kAsrP);
    const auto wpa = align_words_by_time(t, p);
    CHECK(wpa.pairs[0].empty());
    CHECK(wpa.pairs[1].empty());
  }
  SUBCASE("touching spans do not overlap") {
    auto t = transcript({word("we", 0.0, 0.3, {"W", "IY"})});
    auto p = transcript({word("go", 0.3, 0.5, {"G", "OW"})}, TranscriptSource::kAsrP);
    CHECK(align_words_by_time(t, p).pairs[0].empty());
  }
}

TEST_CASE("word features") {
  SUBCASE("duration arithmetic") {
    auto t = transcript({word("bear", 0.50, 0.88, {"B", "EH", "R"})});
    const auto f = compute_word_features(t, t, align_words_by_time(t, t));
    CHECK(f[0].duration == doctest::Approx(0.38).epsilon(1e-12));
  }
  SUBCASE("identity case") {
    auto t = transcript({word("we", 0.1, 0.3, {"W", "IY"}), word("call", 0.35, 0.7, {"K", "AO", "L"}),
                         word("it", 0.9, 1.0, {"IH", "T"})});
    const auto f = compute_word_features(t, t, align_words_by_time(t, t));
    for (const auto& v : f) {
      CHECK(v.distance == 0.0);
      CHECK(v.time_diff_start == 0.0);
      CHECK(v.time_diff_end == 0.0);
      CHECK(v.phone_ratio == 1.0);
      CHECK(v.aligned_word_count == 1.0);
      CHECK(v.phone_distance == 0.0);
    }
    CHECK(f[0].interval == 0.0);
    CHECK(f[1].interval == doctest::Approx(0.05));
    CHECK(f[2].interval == doctest::Approx(0.2));
  }
  SUBCASE("phone ratio 3 over 4") {
    auto t = transcript({word("cat", 0.0, 0.3, {"K", "AE", "T"})});
    auto p = transcript({word("cats", 0.0, 0.35, {"K", "AE", "T", "S"})}, TranscriptSource::kAsrP);
    const auto f = compute_word_features(t, p, align_words_by_time(t, p));
    CHECK(f[0].phone_ratio == 0.75);
    CHECK(f[0].distance == 1.0);
    CHECK(f[0].phone_distance == 1.0);
    CHECK(f[0].time_diff_start == 0.0);
    CHECK(f[0].time_diff_end == doctest::Approx(-0.05));
  }
  SUBCASE("unaligned sentinel") {
    auto t = transcript({word("bear", 0.5, 0.9, {"B", "EH", "R"})});
    auto p = transcript({word("we", 0.0, 0.2, {"W", "IY"})}, TranscriptSource::kAsrP);
    const auto f = compute_word_features(t, p, align_words_by_time(t, p));
    CHECK(f[0].aligned_word_count == 0.0);
    CHECK(f[0].distance == 4.0);
    CHECK(f[0].phone_distance == 3.0);
    CHECK(f[0].phone_ratio == 0.0);
    CHECK(f[0].time_diff_start == f[0].duration);
    CHECK(f[0].time_diff_end == f[0].duration);
  }
  SUBCASE("merged span of several perceived words") {
    auto t = transcript({word("today", 0.2, 0.8, {"T", "AH", "D", "EY"})});
    auto p = transcript({word("to", 0.1, 0.4, {"T", "UW"}), word("day", 0.45, 0.9, {"D", "EY"})},
                        TranscriptSource::kAsrP);
    const auto f = compute_word_features(t, p, align_words_by_time(t, p));
    CHECK(f[0].time_diff_start == doctest::Approx(0.1));
    CHECK(f[0].time_diff_end == doctest::Approx(-0.1));
    CHECK(f[0].distance == static_cast<double>(levenshtein("today", "today")));
    CHECK(f[0].phone_ratio == 1.0);
  }
  SUBCASE("mismatched alignment rejected") {
    auto t = transcript({word("we", 0.0, 0.2, {"W", "IY"})});
    CHECK_THROWS_AS(compute_word_features(t, t, WordPairAlignment{}), PreconditionError);
  }
}

TEST_CASE("phone features") {
  auto t = transcript({word("cat", 0.0, 0.3, {"K", "AE", "T"})});
  SUBCASE("identical transcripts") {
    const auto f = compute_phone_features(t, t);
    REQUIRE(f.size() == 3);
    for (const auto& v : f) {
      CHECK(v.time_diff == 0.0);
      CHECK(v.aligned_phone_count == 1.0);
      CHECK(v.phone_prob_target == 1.0);
      CHECK(v.phone_prob_perceived == 1.0);
    }
  }
  SUBCASE("phone overlapping two perceived phones") {
    auto p = transcript({TimedWord{"kit", 0.0, 0.3, {phone("K", 0.0, 0.05), phone("IH", 0.05, 0.15), phone("T", 0.15, 0.3)}}},
                        TranscriptSource::kAsrP);
    const auto f = compute_phone_features(t, p);
    CHECK(f[0].aligned_phone_count == 2.0);  // K [0,0.1] overlaps K and IH
    CHECK(f[0].phone_prob_perceived == 1.0);  // largest overlap is K
    CHECK(f[1].aligned_phone_count == 2.0);  // AE [0.1,0.2] overlaps IH and T
    CHECK(f[1].phone_prob_perceived == 0.0);  // posterior of AE has no IH mass
  }
  SUBCASE("unaligned phone sentinel") {
    auto p = transcript({word("go", 1.0, 1.2, {"G", "OW"})}, TranscriptSource::kAsrP);
    const auto f = compute_phone_features(t, p);
    for (const auto& v : f) {
      CHECK(v.aligned_phone_count == 0.0);
      CHECK(v.phone_prob_perceived == 0.0);
      CHECK(v.time_diff == v.duration);
    }
  }
  SUBCASE("missing posterior is a precondition violation") {
    auto bad = t;
    bad.words[0].phones[1].posterior.clear();
    CHECK_THROWS_AS(compute_phone_features(bad, t), PreconditionError);
  }
}

TEST_CASE("feature bundle") {
  const auto& inv = PhoneInventory::arpabet();
  auto t = transcript({word("we", 0.0, 0.2, {"W", "IY"}), word("call", 0.25, 0.6, {"K", "AO", "L"}),
                       word("it", 0.65, 0.8, {"IH", "T"}), word("a", 0.85, 0.9, {"AH"}),
                       word("little", 0.95, 1.4, {"L", "IH", "T", "AH", "L"})});
  auto p = transcript({word("we", 0.0, 0.2, {"W", "IY"}), word("all", 0.25, 0.6, {"AO", "L"})}, TranscriptSource::kAsrP);
  const auto b = build_feature_bundle(t, p, embeddings(5, 3, 0.0), embeddings(2, 3, 100.0));

  CHECK(b.word_count() == 5);
  CHECK(b.phone_count() == 13);
  CHECK(b.phone_to_word == std::vector<std::size_t>{0, 0, 1, 1, 1, 2, 2, 3, 4, 4, 4, 4, 4});
  CHECK(b.phone_vectors.cols() == static_cast<Eigen::Index>(inv.size()));
  CHECK(b.phone_vectors(4, static_cast<Eigen::Index>(inv.index_of("L"))) == 2.0);
  CHECK(b.phone_vectors.row(4).sum() == 5.0);
  CHECK(b.word_embed_pairs.cols() == 6);
  // target half copies the target embedding; perceived half averages the aligned ones
  CHECK(b.word_embed_pairs(1, 0) == 10.0);
  CHECK(b.word_embed_pairs(1, 3) == 110.0);
  // unaligned target word: zero perceived half
  CHECK(b.word_embed_pairs.row(3).tail(3).isZero(0.0));
  CHECK(b.phone_posteriors.rows() == 13);

  SUBCASE("embedding length mismatch rejected") {
    CHECK_THROWS_AS(build_feature_bundle(t, p, embeddings(4, 3, 0.0), embeddings(2, 3, 0.0)), PreconditionError);
  }
  SUBCASE("empty perceived transcript leaves every word unaligned") {
    AlignedTranscript none{"utt", TranscriptSource::kAsrP, {}};
    WordEmbeddingSeq empty;
    empty.vectors.resize(0, 3);
    const auto nb = build_feature_bundle(t, none, embeddings(5, 3, 0.0), empty);
    for (const auto& f : nb.word_features) CHECK(f.aligned_word_count == 0.0);
    CHECK(nb.word_embed_pairs.rightCols(3).isZero(0.0));
  }
}

TEST_CASE("feature properties (fuzzed)") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> nwords(1, 12);
  std::uniform_int_distribution<int> shift_us(-200000, 5000000);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = testing::random_aligned(rng, nwords(rng), TranscriptSource::kTarget);
    const auto p = testing::perturbed(rng, t);
    const auto et = embeddings(t.words.size(), 4, 0.5);
    const auto ep = embeddings(p.words.size(), 4, 7.0);
    const auto b = build_feature_bundle(t, p, et, ep);

    // length laws
    CHECK(b.word_features.size() == t.words.size());
    CHECK(b.phone_features.size() == t.phone_count());
    CHECK(b.phone_to_word.size() == t.phone_count());

    // every listed perceived word genuinely overlaps its target word
    const auto wpa = align_words_by_time(t, p);
    for (std::size_t i = 0; i < wpa.pairs.size(); ++i) {
      for (std::size_t j : wpa.pairs[i]) {
        CHECK(spans_overlap(t.words[i].start, t.words[i].end, p.words[j].start, p.words[j].end));
      }
    }

    // invariants of the vectors
    for (const auto& f : b.word_features) {
      CHECK(f.duration >= 0.0);
      CHECK(f.interval >= 0.0);
      CHECK(f.phone_ratio >= 0.0);
    }
    for (const auto& f : b.phone_features) {
      CHECK(f.phone_prob_target >= 0.0);
      CHECK(f.phone_prob_target <= 1.0);
      CHECK(f.phone_prob_perceived >= 0.0);
      CHECK(f.phone_prob_perceived <= 1.0);
    }

    // global time shift leaves every feature bit-identical
    const double delta = shift_us(rng) / 1e6;
    const auto shifted_bundle = build_feature_bundle(shifted(t, delta), shifted(p, delta), et, ep);
    CHECK(shifted_bundle == b);

    // identity law
    const auto self = build_feature_bundle(t, t, et, et);
    for (const auto& f : self.word_features) {
      CHECK(f.distance == 0.0);
      CHECK(f.phone_distance == 0.0);
      CHECK(f.time_diff_start == 0.0);
      CHECK(f.time_diff_end == 0.0);
      CHECK(f.phone_ratio == 1.0);
      CHECK(f.aligned_word_count == 1.0);
    }
    for (const auto& f : self.phone_features) {
      CHECK(f.time_diff == 0.0);
      CHECK(f.aligned_phone_count == 1.0);
    }
  }
}

TEST_CASE("bundle binary record round-trips and rejects bad input") {
  std::mt19937_64 rng(5);
  const auto t = testing::random_aligned(rng, 6, TranscriptSource::kTarget);
  const auto p = testing::perturbed(rng, t);
  const auto b = build_feature_bundle(t, p, embeddings(t.words.size(), 4, 0.0), embeddings(p.words.size(), 4, 1.0));
  auto bytes = serialize_bundle(b);
  CHECK(deserialize_bundle(bytes) == b);
  bytes[8] = 99;  // version field
  CHECK_THROWS_AS(deserialize_bundle(bytes), PreconditionError);
  bytes.resize(20);
  CHECK_THROWS_AS(deserialize_bundle(bytes), PreconditionError);
}

TEST_CASE("normalizer fits training statistics") {
  std::mt19937_64 rng(9);
  std::vector<FeatureBundle> bundles;
  for (int i = 0; i < 5; ++i) {
    const auto t = testing::random_aligned(rng, 5, TranscriptSource::kTarget);
    const auto p = testing::perturbed(rng, t);
    bundles.push_back(build_feature_bundle(t, p, embeddings(5, 2, 0.0), embeddings(p.words.size(), 2, 0.0)));
  }
  const auto norm = FeatureNormalizer::fit(bundles);
  Eigen::MatrixXd all(0, WordFeatureVector::kWidth);
  for (const auto& b : bundles) {
    Eigen::MatrixXd next(all.rows() + b.word_features.size(), all.cols());
    next << all, b.word_feature_matrix();
    all = next;
  }
  const Eigen::MatrixXd z = norm.normalize_words(all);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    CHECK(z.col(c).mean() == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
  }
}
