#pragma once

// Hand-crafted alignment features computed from two force-aligned
// transcripts of the same utterance: the target (or its ASR substitute) and
// the perceived transcript.
//
// Cross-transcript matching is purely temporal: a perceived unit is aligned
// to a target unit iff their spans overlap by a strictly positive amount.
// A perceived transcript with no words is legal and leaves every target
// unit unaligned.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "multipa/edit_distance.hpp"
#include "multipa/phones.hpp"
#include "multipa/types.hpp"

namespace multipa {

// For each target word, the time-ordered perceived word indices it overlaps.
struct WordPairAlignment {
  std::vector<std::vector<std::size_t>> pairs;
};

struct WordFeatureVector {
  static constexpr std::size_t kWidth = 8;

  double duration = 0.0;
  double interval = 0.0;
  double time_diff_start = 0.0;  // target start - merged perceived start
  double time_diff_end = 0.0;    // target end - merged perceived end
  double distance = 0.0;         // character edit distance
  double aligned_word_count = 0.0;
  double phone_distance = 0.0;   // phone-label edit distance
  double phone_ratio = 0.0;      // target phones / aligned perceived phones

  std::array<double, kWidth> to_array() const;
  static WordFeatureVector from_array(std::span<const double> values);
  bool operator==(const WordFeatureVector&) const = default;
};

struct PhoneFeatureVector {
  static constexpr std::size_t kWidth = 6;

  double duration = 0.0;
  double interval = 0.0;
  double time_diff = 0.0;  // mean of start and end offsets, target - perceived
  double aligned_phone_count = 0.0;
  double phone_prob_target = 0.0;
  double phone_prob_perceived = 0.0;

  std::array<double, kWidth> to_array() const;
  static PhoneFeatureVector from_array(std::span<const double> values);
  bool operator==(const PhoneFeatureVector&) const = default;
};

struct FeatureBundle {
  std::vector<WordFeatureVector> word_features;
  std::vector<PhoneFeatureVector> phone_features;
  Eigen::MatrixXd phone_vectors;      // words x inventory, phone counts
  Eigen::MatrixXd word_embed_pairs;   // words x (2 * embedding dim)
  Eigen::MatrixXd phone_posteriors;   // phones x inventory
  std::vector<std::size_t> phone_to_word;

  std::size_t word_count() const { return word_features.size(); }
  std::size_t phone_count() const { return phone_features.size(); }
  Eigen::MatrixXd word_feature_matrix() const;   // words x 8
  Eigen::MatrixXd phone_feature_matrix() const;  // phones x 6

  bool operator==(const FeatureBundle& other) const;
};

// Strictly positive overlap of [a0,a1] and [b0,b1].
inline bool spans_overlap(double a0, double a1, double b0, double b1) {
  return std::min(a1, b1) - std::max(a0, b0) > 0.0;
}

WordPairAlignment align_words_by_time(const AlignedTranscript& target, const AlignedTranscript& perceived);

std::vector<WordFeatureVector> compute_word_features(const AlignedTranscript& target,
                                                     const AlignedTranscript& perceived,
                                                     const WordPairAlignment& alignment);

// Requires posteriors on every target phone (PreconditionError otherwise).
std::vector<PhoneFeatureVector> compute_phone_features(const AlignedTranscript& target,
                                                       const AlignedTranscript& perceived,
                                                       const PhoneInventory& inventory = PhoneInventory::arpabet());

// Multi-hot phone counts of one word.
Eigen::VectorXd phone_vector(const TimedWord& word, const PhoneInventory& inventory = PhoneInventory::arpabet());

FeatureBundle build_feature_bundle(const AlignedTranscript& target, const AlignedTranscript& perceived,
                                   const WordEmbeddingSeq& embeddings_target,
                                   const WordEmbeddingSeq& embeddings_perceived,
                                   const PhoneInventory& inventory = PhoneInventory::arpabet());

// Z-score statistics for the scalar word and phone features, fitted on the
// training split and stored with the model.
struct FeatureNormalizer {
  std::array<double, WordFeatureVector::kWidth> word_mean{};
  std::array<double, WordFeatureVector::kWidth> word_std{};
  std::array<double, PhoneFeatureVector::kWidth> phone_mean{};
  std::array<double, PhoneFeatureVector::kWidth> phone_std{};

  static FeatureNormalizer identity();
  static FeatureNormalizer fit(std::span<const FeatureBundle> bundles);

  Eigen::MatrixXd normalize_words(const Eigen::MatrixXd& word_matrix) const;
  Eigen::MatrixXd normalize_phones(const Eigen::MatrixXd& phone_matrix) const;
};

// Versioned binary record for the feature cache.
inline constexpr char kFeatureBundleMagic[8] = {'M', 'P', 'A', 'F', 'B', 'N', 'D', 'L'};
inline constexpr std::uint32_t kFeatureBundleVersion = 1;

std::vector<std::uint8_t> serialize_bundle(const FeatureBundle& bundle);
FeatureBundle deserialize_bundle(std::span<const std::uint8_t> bytes);

}  // namespace multipa
