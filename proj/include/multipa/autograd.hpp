#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
// Every op builds a node holding its value and a closure that pushes the
// node's gradient to its parents; backward() runs the closures in reverse
// topological order. Rows index sequence positions throughout.

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace multipa::ag {

using Matrix = Eigen::MatrixXd;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(const Node&)> backprop;

  void accumulate(const Matrix& g);
  void zero_grad() { grad.resize(0, 0); }
  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
};

Var constant(Matrix value);
Var parameter(Matrix value);

// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // broadcast a 1 x n row over a's rows
Var transpose(const Var& a);

Var relu(const Var& a);
Var gelu(const Var& a);  // exact (erf) form
Var tanh(const Var& a);

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax_rows(const Var& x);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index first, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index first, Eigen::Index count);

Var mean_rows(const Var& a);  // 1 x cols
// Row i of the result is the mean of a's rows listed in groups[i]; every
// group must be non-empty. Rows are summed in the listed order.
Var segment_mean(const Var& a, const std::vector<std::vector<std::size_t>>& groups);
// W x d -> W x (k*d): block j of row i holds input row i + j - k/2 (zero
// outside the sequence), i.e. the receptive field of a same-padded conv1d.
Var unfold_same(const Var& a, int k);

// Inverted dropout; identity when !training or p == 0.
Var dropout(const Var& a, double p, std::mt19937_64& rng, bool training);

// Sum over columns c of mean over rows r with mask(r,c) != 0 of
// (pred - target)^2; columns with no labelled rows contribute 0.
Var masked_column_mse(const Var& pred, const Matrix& target, const Matrix& mask);

Var sum(const std::vector<Var>& scalars);

}  // namespace multipa::ag
