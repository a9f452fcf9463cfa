#include "mmkd/nn/autograd.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace mmkd::nn {

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return from_node(std::move(node));
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return from_node(std::move(node));
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

void Var::zero_grad() { node_->grad.resize(0, 0); }

void Var::backward() const {
  if (node_->value.size() != 1) {
    throw std::invalid_argument("backward() needs a scalar output");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; graphs of deep transformer stacks overflow a
  // recursive walk.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

namespace {

Var make(Matrix value, std::vector<std::shared_ptr<Node>> parents,
         std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var::from_node(std::move(node));
}

void push(const std::shared_ptr<Node>& target, const Matrix& g) {
  if (target->requires_grad) target->accumulate(g);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims");
  auto an = a.node();
  auto bn = b.node();
  return make(a.value() * b.value(), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * self.grad);
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> a, const Var& b) {
  if (a->cols() != b.rows()) throw std::invalid_argument("spmm: inner dims");
  auto bn = b.node();
  Matrix out = (*a) * b.value();
  return make(std::move(out), {bn}, [a, bn](Node& self) {
    push(bn, a->transpose() * self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  auto an = a.node();
  auto bn = b.node();
  return make(a.value() + b.value(), {an, bn}, [an, bn](Node& self) {
    push(an, self.grad);
    push(bn, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node();
  auto bn = b.node();
  return make(a.value() - b.value(), {an, bn}, [an, bn](Node& self) {
    push(an, self.grad);
    push(bn, -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  return make(a.value().cwiseProduct(b.value()), {an, bn}, [an, bn](Node& self) {
    push(an, self.grad.cwiseProduct(bn->value));
    push(bn, self.grad.cwiseProduct(an->value));
  });
}

Var scale(const Var& a, double factor) {
  auto an = a.node();
  return make(a.value() * factor, {an},
              [an, factor](Node& self) { push(an, self.grad * factor); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: bias shape");
  }
  auto an = a.node();
  auto rn = row.node();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {an, rn}, [an, rn](Node& self) {
    push(an, self.grad);
    push(rn, self.grad.colwise().sum());
  });
}

Var transpose(const Var& a) {
  auto an = a.node();
  return make(a.value().transpose(), {an},
              [an](Node& self) { push(an, self.grad.transpose()); });
}

Var relu(const Var& a) {
  auto an = a.node();
  return make(a.value().cwiseMax(0.0), {an}, [an](Node& self) {
    push(an, (an->value.array() > 0.0).cast<double>().matrix().cwiseProduct(self.grad));
  });
}

Var clamp_min(const Var& a, double floor) {
  auto an = a.node();
  return make(a.value().cwiseMax(floor), {an}, [an, floor](Node& self) {
    push(an, (an->value.array() > floor).cast<double>().matrix().cwiseProduct(self.grad));
  });
}

Var gelu(const Var& a) {
  auto an = a.node();
  Matrix out = a.value().unaryExpr([](double x) { return x * normal_cdf(x); });
  return make(std::move(out), {an}, [an](Node& self) {
    Matrix d = an->value.unaryExpr(
        [](double x) { return normal_cdf(x) + x * normal_pdf(x); });
    push(an, d.cwiseProduct(self.grad));
  });
}

Var sigmoid(const Var& a) {
  auto an = a.node();
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  Matrix y = out;
  return make(std::move(out), {an}, [an, y](Node& self) {
    push(an, self.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var softmax_rows(const Var& a) {
  auto an = a.node();
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  Matrix y = out;
  return make(std::move(out), {an}, [an, y](Node& self) {
    Eigen::VectorXd dots = (self.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.cwiseProduct((self.grad.colwise() - dots));
    push(an, g);
  });
}

Var log_softmax_rows(const Var& a) {
  auto an = a.node();
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  Matrix probs = out.array().exp();
  return make(std::move(out), {an}, [an, probs](Node& self) {
    Eigen::VectorXd sums = self.grad.rowwise().sum();
    Matrix g = self.grad - probs.cwiseProduct(sums.replicate(1, probs.cols()));
    push(an, g);
  });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index n = a.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw std::invalid_argument("layer_norm_rows: gain/bias shape");
  }
  Matrix xhat(a.rows(), n);
  Eigen::VectorXd inv_std(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double mu = a.value().row(r).mean();
    const double var = (a.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (a.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  auto an = a.node();
  auto gn = gain.node();
  auto bn = bias.node();
  return make(std::move(out), {an, gn, bn},
              [an, gn, bn, xhat, inv_std, n](Node& self) {
                const Matrix& dy = self.grad;
                push(gn, dy.cwiseProduct(xhat).colwise().sum());
                push(bn, dy.colwise().sum());
                if (!an->requires_grad) return;
                Matrix dxhat = (dy.array().rowwise() * gn->value.row(0).array()).matrix();
                Matrix dx(dy.rows(), n);
                const double nn = static_cast<double>(n);
                for (Eigen::Index r = 0; r < dy.rows(); ++r) {
                  const double s1 = dxhat.row(r).sum();
                  const double s2 = dxhat.row(r).dot(xhat.row(r));
                  dx.row(r) = (inv_std(r) / nn) *
                              (nn * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2)
                                  .matrix();
                }
                an->accumulate(dx);
              });
}

Var dropout(const Var& a, double p, const ForwardMode& mode) {
  if (!mode.training || p <= 0.0 || mode.rng == nullptr) return a;
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  const double inv = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = keep(*mode.rng) ? inv : 0.0;
  }
  return mul(a, Var::constant(std::move(mask)));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: cols");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    offsets.push_back(at);
    parents.push_back(p.node());
    at += p.rows();
  }
  auto captured = parents;
  return make(std::move(out), std::move(parents), [captured, offsets](Node& self) {
    for (std::size_t i = 0; i < captured.size(); ++i) {
      push(captured[i], self.grad.middleRows(offsets[i], captured[i]->value.rows()));
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: rows");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    parents.push_back(p.node());
    at += p.cols();
  }
  auto captured = parents;
  return make(std::move(out), std::move(parents), [captured, offsets](Node& self) {
    for (std::size_t i = 0; i < captured.size(); ++i) {
      push(captured[i], self.grad.middleCols(offsets[i], captured[i]->value.cols()));
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::out_of_range("slice_rows");
  }
  auto an = a.node();
  return make(a.value().middleRows(start, count), {an}, [an, start](Node& self) {
    if (!an->requires_grad) return;
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    g.middleRows(start, self.grad.rows()) = self.grad;
    an->accumulate(g);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::out_of_range("slice_cols");
  }
  auto an = a.node();
  return make(a.value().middleCols(start, count), {an}, [an, start](Node& self) {
    if (!an->requires_grad) return;
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    g.middleCols(start, self.grad.cols()) = self.grad;
    an->accumulate(g);
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    if (r >= table.rows()) throw std::out_of_range("gather_rows");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(r);
  }
  auto tn = table.node();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make(std::move(out), {tn}, [tn, idx](Node& self) {
    if (!tn->requires_grad) return;
    Matrix g = Matrix::Zero(tn->value.rows(), tn->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(static_cast<Eigen::Index>(idx[i])) += self.grad.row(static_cast<Eigen::Index>(i));
    }
    tn->accumulate(g);
  });
}

Var mean_rows(const Var& a) {
  auto an = a.node();
  const double n = static_cast<double>(a.rows());
  return make(a.value().colwise().mean(), {an}, [an, n](Node& self) {
    push(an, self.grad.replicate(an->value.rows(), 1) / n);
  });
}

Var sum(const Var& a) {
  auto an = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {an}, [an](Node& self) {
    push(an, Matrix::Constant(an->value.rows(), an->value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var pick(const Var& a, Eigen::Index row, Eigen::Index col) {
  auto an = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value()(row, col);
  return make(std::move(out), {an}, [an, row, col](Node& self) {
    if (!an->requires_grad) return;
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    g(row, col) = self.grad(0, 0);
    an->accumulate(g);
  });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw std::invalid_argument("bce_with_logits: shape mismatch");
  }
  const Matrix& z = logits.value();
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double x = z.data()[i];
    const double y = targets.data()[i];
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  auto ln = logits.node();
  return make(std::move(out), {ln}, [ln, targets, n](Node& self) {
    Matrix g = ln->value.unaryExpr([](double x) {
      return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    g = (g - targets) * (self.grad(0, 0) / n);
    push(ln, g);
  });
}

Var activate(const Var& a, Activation act) {
  return act == Activation::kGelu ? gelu(a) : relu(a);
}

}  // namespace mmkd::nn
