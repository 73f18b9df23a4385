#include "multipa/embedding.hpp"

#include <cmath>
#include <random>

#include "model_ids.hpp"
#include "multipa/audio.hpp"
#include "multipa/errors.hpp"

namespace multipa {

std::vector<std::string> subword_pieces(std::string_view word) {
  std::vector<std::string> pieces;
  if (word.empty()) return pieces;
  const std::size_t head = std::min<std::size_t>(4, word.size());
  pieces.push_back("_" + std::string(word.substr(0, head)));
  for (std::size_t i = head; i < word.size(); i += 3) pieces.emplace_back(word.substr(i, 3));
  return pieces;
}

Eigen::MatrixXd pool_subtokens(const Eigen::MatrixXd& pieces, const std::vector<std::size_t>& piece_to_word,
                               std::size_t word_count) {
  if (static_cast<std::size_t>(pieces.rows()) != piece_to_word.size()) {
    throw PreconditionError("pool_subtokens: piece map length mismatch");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(word_count), pieces.cols());
  std::vector<int> counts(word_count, 0);
  for (std::size_t i = 0; i < piece_to_word.size(); ++i) {
    const std::size_t w = piece_to_word[i];
    if (w >= word_count) throw PreconditionError("pool_subtokens: piece maps past the last word");
    out.row(static_cast<Eigen::Index>(w)) += pieces.row(static_cast<Eigen::Index>(i));
    ++counts[w];
  }
  for (std::size_t w = 0; w < word_count; ++w) {
    if (counts[w] == 0) throw PreconditionError("pool_subtokens: word without pieces");
    out.row(static_cast<Eigen::Index>(w)) /= counts[w];
  }
  return out;
}

HashingEmbedder::HashingEmbedder(std::string model_id, int layer) : model_id_(std::move(model_id)) {
  dim_ = detail::parse_sized_model_id(model_id_, "hash-embed-", 4096);
  if (layer < -1 || layer > kLayers) {
    throw ConfigError("embedder layer " + std::to_string(layer) + " out of range [-1, " + std::to_string(kLayers) + "]");
  }
  layer_ = layer == -1 ? kLayers : layer;
}

Eigen::VectorXd HashingEmbedder::piece_vector(const std::string& piece) const {
  std::mt19937_64 rng(fnv1a64(model_id_ + "|" + piece));
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  return v;
}

WordEmbeddingSeq HashingEmbedder::embed(const RawTranscript& transcript) const {
  if (transcript.empty()) throw EmptyTranscript("cannot embed an empty transcript");
  std::vector<std::size_t> owner;
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t w = 0; w < transcript.words.size(); ++w) {
    for (const auto& piece : subword_pieces(transcript.words[w])) {
      rows.push_back(piece_vector(piece));
      owner.push_back(w);
    }
  }
  Eigen::MatrixXd pieces(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < rows.size(); ++i) pieces.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();

  // contextual layers act on the piece sequence; words are pooled at the end
  const Eigen::Index n = pieces.rows();
  for (int layer = 0; layer < layer_; ++layer) {
    Eigen::MatrixXd mixed = pieces;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i > 0) mixed.row(i) += 0.25 * pieces.row(i - 1);
      if (i + 1 < n) mixed.row(i) += 0.25 * pieces.row(i + 1);
    }
    pieces = mixed.array().tanh().matrix();
  }
  WordEmbeddingSeq out;
  out.vectors = pool_subtokens(pieces, owner, transcript.words.size());
  return out;
}

}  // namespace multipa
