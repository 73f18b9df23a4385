#pragma once

// Layers built on the autograd engine. Parameters live in a ParameterStore
// under stable hierarchical names, which is what checkpoints serialize.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "multipa/autograd.hpp"

namespace multipa::nn {

class ParameterStore {
 public:
  // Uniform(-bound, bound) initialisation.
  ag::Var uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng);
  ag::Var normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double std, std::mt19937_64& rng);
  ag::Var constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);

  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
  ag::Var find(const std::string& name) const;  // nullptr when absent
  std::size_t scalar_count() const;

  void zero_grad();
  // Marks every parameter whose name starts with prefix as (non-)trainable.
  void set_trainable(const std::string& prefix, bool trainable);

 private:
  ag::Var add(const std::string& name, Eigen::MatrixXd value);
  std::vector<std::pair<std::string, ag::Var>> entries_;
};

struct Linear {
  ag::Var weight;  // in x out
  ag::Var bias;    // 1 x out
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, std::mt19937_64& rng);
  ag::Var operator()(const ag::Var& x) const;
};

struct LayerNorm {
  ag::Var gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index dim);
  ag::Var operator()(const ag::Var& x) const;
};

struct MultiHeadAttention {
  Linear q, k, v, out;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, Eigen::Index dim, int heads, std::mt19937_64& rng);
  ag::Var operator()(const ag::Var& x, double dropout, std::mt19937_64& rng, bool training) const;
};

// Post-norm encoder layer: x = LN(x + MHA(x)); x = LN(x + FFN(x)), FFN with ReLU.
struct TransformerEncoderLayer {
  MultiHeadAttention attention;
  Linear ff1, ff2;
  LayerNorm norm1, norm2;
  double dropout = 0.0;
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(ParameterStore& store, const std::string& name, Eigen::Index dim, int heads,
                          Eigen::Index ffn_dim, double dropout, std::mt19937_64& rng);
  ag::Var operator()(const ag::Var& x, std::mt19937_64& rng, bool training) const;
};

// 1-D convolution over the row (time) axis with same padding.
struct Conv1dSame {
  ag::Var weight;  // (k * in) x out
  ag::Var bias;    // 1 x out
  int kernel = 1;
  Conv1dSame() = default;
  Conv1dSame(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, int kernel,
             std::mt19937_64& rng);
  ag::Var operator()(const ag::Var& x) const;
};

// SGD with classical momentum: v <- mu * v + g; p <- p - lr * v.
class Sgd {
 public:
  Sgd(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}
  void step(const ParameterStore& store);

 private:
  double lr_;
  double momentum_;
  std::map<const ag::Node*, Eigen::MatrixXd> velocity_;
};

}  // namespace multipa::nn
