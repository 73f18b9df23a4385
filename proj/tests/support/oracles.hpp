#pragma once

// Independent reference implementations used only by tests. They share no
// code with the library paths they check.

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace multipa::oracle {

// Edit distance by memoized recursion over suffixes (Wagner-Fischer
// recurrence, top-down). Exponential without the memo; fine for short inputs.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    if (auto it = memo.find({i, j}); it != memo.end()) return it->second;
    std::size_t best;
    if (a[i] == b[j]) {
      best = self(self, i + 1, j + 1);
    } else {
      best = 1 + self(self, i + 1, j + 1);       // substitute
      best = std::min(best, 1 + self(self, i + 1, j));  // delete from a
      best = std::min(best, 1 + self(self, i, j + 1));  // insert into a
    }
    memo[{i, j}] = best;
    return best;
  };
  return rec(rec, 0, 0);
}

// One-pass raw-moment Pearson correlation in extended precision.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double a = x[i], b = y[i];
    sx += a;
    sy += b;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  const long double num = n * sxy - sx * sy;
  const long double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
  return static_cast<double>(num / den);
}

}  // namespace multipa::oracle

#include <Eigen/Dense>

#include "multipa/features.hpp"
#include "multipa/types.hpp"

namespace multipa::oracle {

// Word-level pooling by brute force: for every word and every column, scan
// all source rows, add the ones the word owns, divide by the count.
inline Eigen::MatrixXd pool_by_owner(const Eigen::MatrixXd& rows, const std::vector<std::size_t>& owner,
                                     std::size_t words) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(words), rows.cols());
  for (std::size_t w = 0; w < words; ++w) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      double acc = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < owner.size(); ++r) {
        if (owner[r] == w) {
          acc += rows(static_cast<Eigen::Index>(r), c);
          ++n;
        }
      }
      if (n > 0) out(static_cast<Eigen::Index>(w), c) = acc / static_cast<double>(n);
    }
  }
  return out;
}

// Frame -> word ownership for word-span pooling. Frames may belong to no
// word; words owning no frame borrow the frame nearest their midpoint.
inline Eigen::MatrixXd pool_frames(const Eigen::MatrixXd& frames, double hop, const AlignedTranscript& target) {
  const std::size_t words = target.words.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(words), frames.cols());
  for (std::size_t w = 0; w < words; ++w) {
    const auto& word = target.words[w];
    std::vector<std::size_t> owner(static_cast<std::size_t>(frames.rows()), words);
    std::size_t n = 0;
    for (Eigen::Index f = 0; f < frames.rows(); ++f) {
      const double centre = (static_cast<double>(f) + 0.5) * hop;
      if (word.start <= centre && centre < word.end) {
        owner[static_cast<std::size_t>(f)] = w;
        ++n;
      }
    }
    if (n == 0) {
      long nearest = static_cast<long>(std::floor((word.start + word.end) / 2.0 / hop));
      nearest = std::max(0L, std::min<long>(nearest, static_cast<long>(frames.rows()) - 1));
      owner[static_cast<std::size_t>(nearest)] = w;
    }
    out.row(static_cast<Eigen::Index>(w)) = pool_by_owner(frames, owner, words).row(static_cast<Eigen::Index>(w));
  }
  return out;
}

// Reference pool_levels (identity normalization).
inline Eigen::MatrixXd pool_levels(const FeatureBundle& b, const AcousticFrameSeq& frames,
                                   const AlignedTranscript& target) {
  const std::size_t words = b.word_count();
  Eigen::MatrixXd wf(static_cast<Eigen::Index>(words), 8), pf(static_cast<Eigen::Index>(b.phone_count()), 6);
  for (std::size_t i = 0; i < words; ++i) {
    const auto a = b.word_features[i].to_array();
    for (std::size_t c = 0; c < a.size(); ++c) wf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = a[c];
  }
  for (std::size_t i = 0; i < b.phone_count(); ++i) {
    const auto a = b.phone_features[i].to_array();
    for (std::size_t c = 0; c < a.size(); ++c) pf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = a[c];
  }
  const std::vector<Eigen::MatrixXd> parts = {wf,
                                              b.phone_vectors,
                                              b.word_embed_pairs,
                                              pool_by_owner(pf, b.phone_to_word, words),
                                              pool_by_owner(b.phone_posteriors, b.phone_to_word, words),
                                              pool_frames(frames.frames, frames.frame_hop, target)};
  Eigen::Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(words), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) out(r, at + c) = p(r, c);
    }
    at += p.cols();
  }
  return out;
}

}  // namespace multipa::oracle
