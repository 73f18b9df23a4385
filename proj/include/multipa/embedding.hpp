#pragma once

// Contextual word embeddings from a deterministic hashing model: words are
// split into sub-token pieces, every piece has a fixed pseudo-random vector,
// and each layer mixes a word's vector with its neighbours'.

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "multipa/types.hpp"

namespace multipa {

// Sub-token pieces of one word: a word-initial piece of up to four characters
// marked with a leading "_", then three-character continuation pieces.
std::vector<std::string> subword_pieces(std::string_view word);

// Mean-pools piece rows into word rows. piece_to_word[i] names the word that
// piece i belongs to; every word must own at least one piece.
Eigen::MatrixXd pool_subtokens(const Eigen::MatrixXd& pieces, const std::vector<std::size_t>& piece_to_word,
                               std::size_t word_count);

class HashingEmbedder {
 public:
  static constexpr int kLayers = 2;

  // model_id: "hash-embed-<dim>"; layer in [0, kLayers] or -1 for the last.
  explicit HashingEmbedder(std::string model_id, int layer = -1);

  std::size_t dim() const { return dim_; }
  const std::string& model_id() const { return model_id_; }

  WordEmbeddingSeq embed(const RawTranscript& transcript) const;

 private:
  Eigen::VectorXd piece_vector(const std::string& piece) const;

  std::string model_id_;
  std::size_t dim_ = 32;
  int layer_ = kLayers;
};

}  // namespace multipa
