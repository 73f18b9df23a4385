#include "multipa/nn.hpp"

#include <cmath>

#include "multipa/errors.hpp"

namespace multipa::nn {

ag::Var ParameterStore::add(const std::string& name, Eigen::MatrixXd value) {
  if (find(name)) throw PreconditionError("duplicate parameter name '" + name + "'");
  auto var = ag::parameter(std::move(value));
  entries_.emplace_back(name, var);
  return var;
}

ag::Var ParameterStore::uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return add(name, std::move(m));
}

ag::Var ParameterStore::normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double std,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return add(name, std::move(m));
}

ag::Var ParameterStore::constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(name, Eigen::MatrixXd::Constant(rows, cols, value));
}

ag::Var ParameterStore::find(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return v;
  }
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : entries_) n += static_cast<std::size_t>(v->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, v] : entries_) v->zero_grad();
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [n, v] : entries_) {
    if (n.rfind(prefix, 0) == 0) {
      v->requires_grad = trainable;
      v->zero_grad();
    }
  }
}

Linear::Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
               std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = store.uniform(name + ".weight", in, out, bound, rng);
  bias = store.uniform(name + ".bias", 1, out, bound, rng);
}

ag::Var Linear::operator()(const ag::Var& x) const { return ag::add_row(ag::matmul(x, weight), bias); }

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index dim) {
  gamma = store.constant(name + ".gamma", 1, dim, 1.0);
  beta = store.constant(name + ".beta", 1, dim, 0.0);
}

ag::Var LayerNorm::operator()(const ag::Var& x) const { return ag::layer_norm(x, gamma, beta); }

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, Eigen::Index dim, int h,
                                       std::mt19937_64& rng)
    : heads(h) {
  if (h <= 0 || dim % h != 0) throw ConfigError("attention width must be divisible by the head count");
  q = Linear(store, name + ".q", dim, dim, rng);
  k = Linear(store, name + ".k", dim, dim, rng);
  v = Linear(store, name + ".v", dim, dim, rng);
  out = Linear(store, name + ".out", dim, dim, rng);
}

ag::Var MultiHeadAttention::operator()(const ag::Var& x, double dropout, std::mt19937_64& rng, bool training) const {
  const Eigen::Index dim = x->cols();
  const Eigen::Index head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const auto qx = q(x), kx = k(x), vx = v(x);
  std::vector<ag::Var> per_head;
  per_head.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto qh = ag::slice_cols(qx, h * head_dim, head_dim);
    const auto kh = ag::slice_cols(kx, h * head_dim, head_dim);
    const auto vh = ag::slice_cols(vx, h * head_dim, head_dim);
    auto weights = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt));
    weights = ag::dropout(weights, dropout, rng, training);
    per_head.push_back(ag::matmul(weights, vh));
  }
  return out(heads == 1 ? per_head.front() : ag::concat_cols(per_head));
}

TransformerEncoderLayer::TransformerEncoderLayer(ParameterStore& store, const std::string& name, Eigen::Index dim,
                                                 int heads, Eigen::Index ffn_dim, double p, std::mt19937_64& rng)
    : dropout(p) {
  attention = MultiHeadAttention(store, name + ".attn", dim, heads, rng);
  ff1 = Linear(store, name + ".ff1", dim, ffn_dim, rng);
  ff2 = Linear(store, name + ".ff2", ffn_dim, dim, rng);
  norm1 = LayerNorm(store, name + ".norm1", dim);
  norm2 = LayerNorm(store, name + ".norm2", dim);
}

ag::Var TransformerEncoderLayer::operator()(const ag::Var& x, std::mt19937_64& rng, bool training) const {
  auto a = ag::dropout(attention(x, dropout, rng, training), dropout, rng, training);
  auto h = norm1(ag::add(x, a));
  auto f = ff2(ag::dropout(ag::relu(ff1(h)), dropout, rng, training));
  return norm2(ag::add(h, ag::dropout(f, dropout, rng, training)));
}

Conv1dSame::Conv1dSame(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, int k,
                       std::mt19937_64& rng)
    : kernel(k) {
  if (k <= 0 || k % 2 == 0) throw ConfigError("convolution kernel size must be odd and positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * k));
  weight = store.uniform(name + ".weight", in * k, out, bound, rng);
  bias = store.uniform(name + ".bias", 1, out, bound, rng);
}

ag::Var Conv1dSame::operator()(const ag::Var& x) const {
  return ag::add_row(ag::matmul(ag::unfold_same(x, kernel), weight), bias);
}

void Sgd::step(const ParameterStore& store) {
  for (const auto& [_, p] : store.entries()) {
    if (!p->requires_grad || p->grad.size() == 0) continue;
    auto [it, inserted] = velocity_.try_emplace(p.get(), p->grad);
    if (!inserted) it->second = momentum_ * it->second + p->grad;
    p->value -= lr_ * it->second;
  }
}

}  // namespace multipa::nn
