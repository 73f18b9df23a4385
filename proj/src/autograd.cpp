#include "multipa/autograd.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "multipa/errors.hpp"

namespace multipa::ag {

namespace {

Var make(Matrix value, std::vector<Var> parents, std::function<void(const Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return node;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols()) {
    throw PreconditionError(std::string(op) + ": shape mismatch " + std::to_string(a->rows()) + "x" +
                            std::to_string(a->cols()) + " vs " + std::to_string(b->rows()) + "x" +
                            std::to_string(b->cols()));
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

void backward(const Var& root) {
  if (root->rows() != 1 || root->cols() != 1) throw PreconditionError("backward needs a scalar root");
  if (!root->requires_grad) return;
  // iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->grad.size() != 0) node->backprop(*node);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows()) throw PreconditionError("matmul: inner dimensions differ");
  return make(a->value * b->value, {a, b}, [a, b](const Node& n) {
    if (a->requires_grad) a->accumulate(n.grad * b->value.transpose());
    if (b->requires_grad) b->accumulate(a->value.transpose() * n.grad);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make(a->value + b->value, {a, b}, [a, b](const Node& n) {
    a->accumulate(n.grad);
    b->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make(a->value - b->value, {a, b}, [a, b](const Node& n) {
    a->accumulate(n.grad);
    b->accumulate(-n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make(a->value.cwiseProduct(b->value), {a, b}, [a, b](const Node& n) {
    if (a->requires_grad) a->accumulate(n.grad.cwiseProduct(b->value));
    if (b->requires_grad) b->accumulate(n.grad.cwiseProduct(a->value));
  });
}

Var scale(const Var& a, double s) {
  return make(a->value * s, {a}, [a, s](const Node& n) { a->accumulate(n.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row->rows() != 1 || row->cols() != a->cols()) throw PreconditionError("add_row: bias shape mismatch");
  Matrix out = a->value.rowwise() + row->value.row(0);
  return make(std::move(out), {a, row}, [a, row](const Node& n) {
    a->accumulate(n.grad);
    if (row->requires_grad) row->accumulate(n.grad.colwise().sum());
  });
}

Var transpose(const Var& a) {
  return make(a->value.transpose(), {a}, [a](const Node& n) { a->accumulate(n.grad.transpose()); });
}

Var relu(const Var& a) {
  return make(a->value.cwiseMax(0.0), {a}, [a](const Node& n) {
    a->accumulate((a->value.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Var gelu(const Var& a) {
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Matrix out = a->value.unaryExpr([=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return make(std::move(out), {a}, [a, inv_sqrt2](const Node& n) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = a->value.unaryExpr([=](double x) {
      return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
    });
    a->accumulate(d.cwiseProduct(n.grad));
  });
}

Var tanh(const Var& a) {
  Matrix out = a->value.array().tanh().matrix();
  return make(out, {a}, [a, out](const Node& n) {
    a->accumulate((1.0 - out.array().square()).matrix().cwiseProduct(n.grad));
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index cols = x->cols();
  if (gamma->rows() != 1 || gamma->cols() != cols || beta->rows() != 1 || beta->cols() != cols) {
    throw PreconditionError("layer_norm: parameter shape mismatch");
  }
  Matrix xhat(x->rows(), cols);
  Eigen::VectorXd inv_std(x->rows());
  for (Eigen::Index r = 0; r < x->rows(); ++r) {
    const double mu = x->value.row(r).mean();
    const double var = (x->value.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x->value.row(r).array() - mu) * inv_std[r];
  }
  Matrix out = (xhat.array().rowwise() * gamma->value.row(0).array()).rowwise() + beta->value.row(0).array();
  return make(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std](const Node& n) {
    if (gamma->requires_grad) gamma->accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
    if (beta->requires_grad) beta->accumulate(n.grad.colwise().sum());
    if (x->requires_grad) {
      const Matrix dxhat = n.grad.array().rowwise() * gamma->value.row(0).array();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      x->accumulate(dx);
    }
  });
}

Var softmax_rows(const Var& x) {
  Matrix out(x->rows(), x->cols());
  for (Eigen::Index r = 0; r < x->rows(); ++r) {
    const double m = x->value.row(r).maxCoeff();
    out.row(r) = (x->value.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make(out, {x}, [x, out](const Node& n) {
    const Eigen::VectorXd dots = n.grad.cwiseProduct(out).rowwise().sum();
    x->accumulate(out.cwiseProduct(n.grad.colwise() - dots));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw PreconditionError("concat_cols: nothing to concatenate");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p->rows() != parts.front()->rows()) throw PreconditionError("concat_cols: row counts differ");
    cols += p->cols();
  }
  Matrix out(parts.front()->rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p->cols()) = p->value;
    at += p->cols();
  }
  return make(std::move(out), parts, [parts](const Node& n) {
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) p->accumulate(n.grad.middleCols(at, p->cols()));
      at += p->cols();
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a->cols()) throw PreconditionError("slice_cols out of range");
  return make(a->value.middleCols(first, count), {a}, [a, first, count](const Node& n) {
    Matrix g = Matrix::Zero(a->rows(), a->cols());
    g.middleCols(first, count) = n.grad;
    a->accumulate(g);
  });
}

Var slice_rows(const Var& a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a->rows()) throw PreconditionError("slice_rows out of range");
  return make(a->value.middleRows(first, count), {a}, [a, first, count](const Node& n) {
    Matrix g = Matrix::Zero(a->rows(), a->cols());
    g.middleRows(first, count) = n.grad;
    a->accumulate(g);
  });
}

Var mean_rows(const Var& a) {
  if (a->rows() == 0) throw PreconditionError("mean_rows of an empty matrix");
  return make(a->value.colwise().mean(), {a}, [a](const Node& n) {
    a->accumulate(Matrix::Ones(a->rows(), 1) * (n.grad / static_cast<double>(a->rows())));
  });
}

Var segment_mean(const Var& a, const std::vector<std::vector<std::size_t>>& groups) {
  Matrix out(static_cast<Eigen::Index>(groups.size()), a->cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw PreconditionError("segment_mean: empty group");
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(a->cols());
    for (std::size_t r : groups[g]) {
      if (r >= static_cast<std::size_t>(a->rows())) throw PreconditionError("segment_mean: row out of range");
      acc += a->value.row(static_cast<Eigen::Index>(r));
    }
    out.row(static_cast<Eigen::Index>(g)) = acc / static_cast<double>(groups[g].size());
  }
  return make(std::move(out), {a}, [a, groups](const Node& n) {
    Matrix g = Matrix::Zero(a->rows(), a->cols());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const double w = 1.0 / static_cast<double>(groups[i].size());
      for (std::size_t r : groups[i]) g.row(static_cast<Eigen::Index>(r)) += w * n.grad.row(static_cast<Eigen::Index>(i));
    }
    a->accumulate(g);
  });
}

Var unfold_same(const Var& a, int k) {
  if (k <= 0 || k % 2 == 0) throw PreconditionError("unfold_same: kernel size must be odd and positive");
  const Eigen::Index w = a->rows(), d = a->cols(), half = k / 2;
  Matrix out = Matrix::Zero(w, k * d);
  for (Eigen::Index i = 0; i < w; ++i) {
    for (int j = 0; j < k; ++j) {
      const Eigen::Index src = i + j - half;
      if (src >= 0 && src < w) out.block(i, j * d, 1, d) = a->value.row(src);
    }
  }
  return make(std::move(out), {a}, [a, k, half](const Node& n) {
    const Eigen::Index w = a->rows(), d = a->cols();
    Matrix g = Matrix::Zero(w, d);
    for (Eigen::Index i = 0; i < w; ++i) {
      for (int j = 0; j < k; ++j) {
        const Eigen::Index src = i + j - half;
        if (src >= 0 && src < w) g.row(src) += n.grad.block(i, j * d, 1, d);
      }
    }
    a->accumulate(g);
  });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng, bool training) {
  if (!training || p <= 0.0) return a;
  if (p >= 1.0) throw PreconditionError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a->rows(), a->cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  return make(a->value.cwiseProduct(mask), {a}, [a, mask](const Node& n) { a->accumulate(n.grad.cwiseProduct(mask)); });
}

Var masked_column_mse(const Var& pred, const Matrix& target, const Matrix& mask) {
  if (pred->rows() != target.rows() || pred->cols() != target.cols() || mask.rows() != target.rows() ||
      mask.cols() != target.cols()) {
    throw PreconditionError("masked_column_mse: shape mismatch");
  }
  Eigen::RowVectorXd counts = (mask.array() != 0.0).cast<double>().matrix().colwise().sum();
  Matrix weights(mask.rows(), mask.cols());
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      weights(r, c) = (mask(r, c) != 0.0 && counts[c] > 0.0) ? 1.0 / counts[c] : 0.0;
    }
  }
  // masked-out entries may hold NaN placeholders; select rather than multiply
  const Matrix diff = (weights.array() != 0.0).select(pred->value - target, 0.0);
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseProduct(diff).cwiseProduct(weights).sum();
  return make(std::move(out), {pred}, [pred, diff, weights](const Node& n) {
    pred->accumulate(2.0 * n.grad(0, 0) * diff.cwiseProduct(weights));
  });
}

Var sum(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw PreconditionError("sum of nothing");
  Matrix out = Matrix::Zero(1, 1);
  for (const auto& s : scalars) {
    if (s->rows() != 1 || s->cols() != 1) throw PreconditionError("sum expects scalars");
    out += s->value;
  }
  return make(std::move(out), scalars, [scalars](const Node& n) {
    for (const auto& s : scalars) s->accumulate(n.grad);
  });
}

}  // namespace multipa::ag
