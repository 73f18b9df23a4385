#include "multipa/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "multipa/binary_io.hpp"
#include "multipa/errors.hpp"

namespace multipa {
namespace {

using Ticks = std::int64_t;  // microseconds

Ticks to_ticks(double seconds) { return static_cast<Ticks>(std::llround(seconds * 1e6)); }
double to_seconds(Ticks ticks) { return static_cast<double>(ticks) / 1e6; }

struct Span {
  Ticks start;
  Ticks end;
};

Span span_of(const TimedWord& w) { return {to_ticks(w.start), to_ticks(w.end)}; }
Span span_of(const TimedPhone& p) { return {to_ticks(p.start), to_ticks(p.end)}; }

Ticks overlap(Span a, Span b) { return std::min(a.end, b.end) - std::max(a.start, b.start); }

struct FlatPhone {
  const TimedPhone* phone;
  std::size_t word;
};

std::vector<FlatPhone> flatten(const AlignedTranscript& t) {
  std::vector<FlatPhone> out;
  for (std::size_t w = 0; w < t.words.size(); ++w) {
    for (const auto& p : t.words[w].phones) out.push_back({&p, w});
  }
  return out;
}

// Indices j of `others` overlapping `span`, in order.
template <typename Item, typename SpanFn>
std::vector<std::size_t> overlapping(Span span, const std::vector<Item>& others, SpanFn span_fn) {
  std::vector<std::size_t> hits;
  for (std::size_t j = 0; j < others.size(); ++j) {
    const Span s = span_fn(others[j]);
    if (overlap(span, s) > 0) hits.push_back(j);
  }
  return hits;
}

}  // namespace

std::array<double, WordFeatureVector::kWidth> WordFeatureVector::to_array() const {
  return {duration, interval, time_diff_start, time_diff_end, distance, aligned_word_count, phone_distance, phone_ratio};
}

WordFeatureVector WordFeatureVector::from_array(std::span<const double> v) {
  if (v.size() != kWidth) throw PreconditionError("word feature width mismatch");
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

std::array<double, PhoneFeatureVector::kWidth> PhoneFeatureVector::to_array() const {
  return {duration, interval, time_diff, aligned_phone_count, phone_prob_target, phone_prob_perceived};
}

PhoneFeatureVector PhoneFeatureVector::from_array(std::span<const double> v) {
  if (v.size() != kWidth) throw PreconditionError("phone feature width mismatch");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

Eigen::MatrixXd FeatureBundle::word_feature_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(word_features.size()), WordFeatureVector::kWidth);
  for (std::size_t i = 0; i < word_features.size(); ++i) {
    const auto a = word_features[i].to_array();
    for (std::size_t c = 0; c < a.size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = a[c];
  }
  return m;
}

Eigen::MatrixXd FeatureBundle::phone_feature_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(phone_features.size()), PhoneFeatureVector::kWidth);
  for (std::size_t i = 0; i < phone_features.size(); ++i) {
    const auto a = phone_features[i].to_array();
    for (std::size_t c = 0; c < a.size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = a[c];
  }
  return m;
}

bool FeatureBundle::operator==(const FeatureBundle& o) const {
  auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return word_features == o.word_features && phone_features == o.phone_features &&
         same(phone_vectors, o.phone_vectors) && same(word_embed_pairs, o.word_embed_pairs) &&
         same(phone_posteriors, o.phone_posteriors) && phone_to_word == o.phone_to_word;
}

WordPairAlignment align_words_by_time(const AlignedTranscript& target, const AlignedTranscript& perceived) {
  WordPairAlignment wpa;
  wpa.pairs.reserve(target.words.size());
  for (const auto& w : target.words) {
    wpa.pairs.push_back(overlapping(span_of(w), perceived.words, [](const TimedWord& p) { return span_of(p); }));
  }
  return wpa;
}

std::vector<WordFeatureVector> compute_word_features(const AlignedTranscript& target,
                                                     const AlignedTranscript& perceived,
                                                     const WordPairAlignment& alignment) {
  if (alignment.pairs.size() != target.words.size()) {
    throw PreconditionError("word alignment length does not match target word count");
  }
  std::vector<WordFeatureVector> out;
  out.reserve(target.words.size());
  Ticks prev_end = 0;
  for (std::size_t i = 0; i < target.words.size(); ++i) {
    const TimedWord& tw = target.words[i];
    const Span ts = span_of(tw);
    WordFeatureVector f;
    f.duration = to_seconds(ts.end - ts.start);
    f.interval = i == 0 ? 0.0 : to_seconds(std::max<Ticks>(0, ts.start - prev_end));
    prev_end = ts.end;

    std::vector<std::string> target_phones;
    for (const auto& p : tw.phones) target_phones.push_back(p.label);

    const auto& aligned = alignment.pairs[i];
    if (aligned.empty()) {
      f.time_diff_start = f.duration;
      f.time_diff_end = f.duration;
      f.distance = static_cast<double>(tw.text.size());
      f.aligned_word_count = 0.0;
      f.phone_distance = static_cast<double>(target_phones.size());
      f.phone_ratio = 0.0;
      out.push_back(f);
      continue;
    }

    Ticks merged_start = std::numeric_limits<Ticks>::max();
    Ticks merged_end = std::numeric_limits<Ticks>::min();
    std::string perceived_text;
    std::vector<std::string> perceived_phones;
    for (std::size_t j : aligned) {
      if (j >= perceived.words.size()) throw PreconditionError("word alignment index out of range");
      const TimedWord& pw = perceived.words[j];
      const Span ps = span_of(pw);
      merged_start = std::min(merged_start, ps.start);
      merged_end = std::max(merged_end, ps.end);
      perceived_text += pw.text;
      for (const auto& p : pw.phones) perceived_phones.push_back(p.label);
    }
    f.time_diff_start = to_seconds(ts.start - merged_start);
    f.time_diff_end = to_seconds(ts.end - merged_end);
    f.distance = static_cast<double>(levenshtein(tw.text, perceived_text));
    f.aligned_word_count = static_cast<double>(aligned.size());
    f.phone_distance = static_cast<double>(levenshtein(target_phones, perceived_phones));
    f.phone_ratio = perceived_phones.empty()
                        ? 0.0
                        : static_cast<double>(target_phones.size()) / static_cast<double>(perceived_phones.size());
    out.push_back(f);
  }
  return out;
}

std::vector<PhoneFeatureVector> compute_phone_features(const AlignedTranscript& target,
                                                       const AlignedTranscript& perceived,
                                                       const PhoneInventory& inventory) {
  const auto target_phones = flatten(target);
  const auto perceived_phones = flatten(perceived);
  std::vector<PhoneFeatureVector> out;
  out.reserve(target_phones.size());
  Ticks prev_end = 0;
  for (std::size_t i = 0; i < target_phones.size(); ++i) {
    const TimedPhone& tp = *target_phones[i].phone;
    if (tp.posterior.size() != inventory.size()) {
      throw PreconditionError("target phone '" + tp.label + "' in " + target.utterance_id +
                              " lacks a posterior over the phone inventory");
    }
    const Span ts = span_of(tp);
    PhoneFeatureVector f;
    f.duration = to_seconds(ts.end - ts.start);
    f.interval = i == 0 ? 0.0 : to_seconds(std::max<Ticks>(0, ts.start - prev_end));
    prev_end = ts.end;
    f.phone_prob_target = tp.posterior[inventory.index_of(tp.label)];

    const auto hits = overlapping(ts, perceived_phones, [](const FlatPhone& p) { return span_of(*p.phone); });
    f.aligned_phone_count = static_cast<double>(hits.size());
    if (hits.empty()) {
      f.time_diff = f.duration;
      f.phone_prob_perceived = 0.0;
    } else {
      Ticks merged_start = std::numeric_limits<Ticks>::max();
      Ticks merged_end = std::numeric_limits<Ticks>::min();
      std::size_t best = hits.front();
      Ticks best_overlap = -1;
      for (std::size_t j : hits) {
        const Span ps = span_of(*perceived_phones[j].phone);
        merged_start = std::min(merged_start, ps.start);
        merged_end = std::max(merged_end, ps.end);
        if (const Ticks ov = overlap(ts, ps); ov > best_overlap) {
          best_overlap = ov;
          best = j;
        }
      }
      // Integer halving keeps this exactly shift-invariant.
      const Ticks offset_sum = (ts.start - merged_start) + (ts.end - merged_end);
      f.time_diff = static_cast<double>(offset_sum) / 2e6;
      f.phone_prob_perceived = tp.posterior[inventory.index_of(perceived_phones[best].phone->label)];
    }
    out.push_back(f);
  }
  return out;
}

Eigen::VectorXd phone_vector(const TimedWord& word, const PhoneInventory& inventory) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(inventory.size()));
  for (const auto& p : word.phones) {
    const std::size_t idx = inventory.index_of(p.label);
    if (idx != inventory.silence_index()) v(static_cast<Eigen::Index>(idx)) += 1.0;
  }
  return v;
}

FeatureBundle build_feature_bundle(const AlignedTranscript& target, const AlignedTranscript& perceived,
                                   const WordEmbeddingSeq& embeddings_target,
                                   const WordEmbeddingSeq& embeddings_perceived,
                                   const PhoneInventory& inventory) {
  const auto n_words = static_cast<Eigen::Index>(target.words.size());
  if (embeddings_target.size() != target.words.size()) {
    throw PreconditionError("target embeddings do not match target word count");
  }
  if (embeddings_perceived.size() != perceived.words.size()) {
    throw PreconditionError("perceived embeddings do not match perceived word count");
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(embeddings_target.dim());
  if (!perceived.words.empty() && embeddings_perceived.vectors.cols() != dim) {
    throw PreconditionError("embedding widths differ between transcripts");
  }

  FeatureBundle b;
  const WordPairAlignment wpa = align_words_by_time(target, perceived);
  b.word_features = compute_word_features(target, perceived, wpa);
  b.phone_features = compute_phone_features(target, perceived, inventory);

  const auto inv = static_cast<Eigen::Index>(inventory.size());
  b.phone_vectors.resize(n_words, inv);
  b.word_embed_pairs = Eigen::MatrixXd::Zero(n_words, 2 * dim);
  for (Eigen::Index i = 0; i < n_words; ++i) {
    b.phone_vectors.row(i) = phone_vector(target.words[static_cast<std::size_t>(i)], inventory).transpose();
    b.word_embed_pairs.row(i).head(dim) = embeddings_target.vectors.row(i);
    const auto& aligned = wpa.pairs[static_cast<std::size_t>(i)];
    if (!aligned.empty()) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dim);
      for (std::size_t j : aligned) acc += embeddings_perceived.vectors.row(static_cast<Eigen::Index>(j));
      b.word_embed_pairs.row(i).tail(dim) = acc / static_cast<double>(aligned.size());
    }
  }

  const auto n_phones = static_cast<Eigen::Index>(target.phone_count());
  b.phone_posteriors.resize(n_phones, inv);
  b.phone_to_word.reserve(static_cast<std::size_t>(n_phones));
  Eigen::Index row = 0;
  for (std::size_t w = 0; w < target.words.size(); ++w) {
    for (const auto& p : target.words[w].phones) {
      for (Eigen::Index c = 0; c < inv; ++c) b.phone_posteriors(row, c) = p.posterior[static_cast<std::size_t>(c)];
      b.phone_to_word.push_back(w);
      ++row;
    }
  }
  return b;
}

FeatureNormalizer FeatureNormalizer::identity() {
  FeatureNormalizer n;
  n.word_std.fill(1.0);
  n.phone_std.fill(1.0);
  return n;
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureBundle> bundles) {
  FeatureNormalizer n = identity();
  auto fit_columns = [](auto&& rows_of, auto& mean, auto& stddev) {
    const std::size_t width = mean.size();
    std::vector<double> sum(width, 0.0), sq(width, 0.0);
    std::size_t count = 0;
    rows_of([&](const auto& row) {
      for (std::size_t c = 0; c < width; ++c) sum[c] += row[c];
      ++count;
    });
    if (count == 0) return;
    for (std::size_t c = 0; c < width; ++c) mean[c] = sum[c] / static_cast<double>(count);
    rows_of([&](const auto& row) {
      for (std::size_t c = 0; c < width; ++c) sq[c] += (row[c] - mean[c]) * (row[c] - mean[c]);
    });
    for (std::size_t c = 0; c < width; ++c) {
      const double sd = std::sqrt(sq[c] / static_cast<double>(count));
      stddev[c] = sd > 1e-8 ? sd : 1.0;  // constant columns pass through centered
    }
  };
  fit_columns(
      [&](auto&& visit) {
        for (const auto& b : bundles)
          for (const auto& f : b.word_features) visit(f.to_array());
      },
      n.word_mean, n.word_std);
  fit_columns(
      [&](auto&& visit) {
        for (const auto& b : bundles)
          for (const auto& f : b.phone_features) visit(f.to_array());
      },
      n.phone_mean, n.phone_std);
  return n;
}

Eigen::MatrixXd FeatureNormalizer::normalize_words(const Eigen::MatrixXd& m) const {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    out.col(c) = (out.col(c).array() - word_mean[static_cast<std::size_t>(c)]) / word_std[static_cast<std::size_t>(c)];
  }
  return out;
}

Eigen::MatrixXd FeatureNormalizer::normalize_phones(const Eigen::MatrixXd& m) const {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    out.col(c) = (out.col(c).array() - phone_mean[static_cast<std::size_t>(c)]) / phone_std[static_cast<std::size_t>(c)];
  }
  return out;
}

std::vector<std::uint8_t> serialize_bundle(const FeatureBundle& b) {
  using namespace binio;
  std::vector<std::uint8_t> out;
  put_bytes(out, kFeatureBundleMagic, sizeof(kFeatureBundleMagic));
  put<std::uint32_t>(out, kFeatureBundleVersion);
  put_matrix(out, b.word_feature_matrix());
  put_matrix(out, b.phone_feature_matrix());
  put_matrix(out, b.phone_vectors);
  put_matrix(out, b.word_embed_pairs);
  put_matrix(out, b.phone_posteriors);
  put<std::uint64_t>(out, b.phone_to_word.size());
  for (std::size_t w : b.phone_to_word) put<std::uint64_t>(out, w);
  return out;
}

FeatureBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "feature bundle record");
  r.expect_magic(std::string_view(kFeatureBundleMagic, sizeof(kFeatureBundleMagic)));
  if (const auto version = r.get<std::uint32_t>(); version != kFeatureBundleVersion) {
    throw PreconditionError("feature bundle schema version " + std::to_string(version) + " is not supported");
  }
  FeatureBundle b;
  const Eigen::MatrixXd words = r.matrix();
  const Eigen::MatrixXd phones = r.matrix();
  if (words.cols() != WordFeatureVector::kWidth || phones.cols() != PhoneFeatureVector::kWidth) {
    throw PreconditionError("feature bundle widths do not match this build");
  }
  for (Eigen::Index i = 0; i < words.rows(); ++i) {
    std::array<double, WordFeatureVector::kWidth> a{};
    for (std::size_t c = 0; c < a.size(); ++c) a[c] = words(i, static_cast<Eigen::Index>(c));
    b.word_features.push_back(WordFeatureVector::from_array(a));
  }
  for (Eigen::Index i = 0; i < phones.rows(); ++i) {
    std::array<double, PhoneFeatureVector::kWidth> a{};
    for (std::size_t c = 0; c < a.size(); ++c) a[c] = phones(i, static_cast<Eigen::Index>(c));
    b.phone_features.push_back(PhoneFeatureVector::from_array(a));
  }
  b.phone_vectors = r.matrix();
  b.word_embed_pairs = r.matrix();
  b.phone_posteriors = r.matrix();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) b.phone_to_word.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
  r.expect_done();
  return b;
}

}  // namespace multipa
