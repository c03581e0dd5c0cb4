#include "minotaur/ad.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace minotaur::ad {

namespace {

Var make_node(Matrix val, std::vector<Var> inputs, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>(std::move(val));
  bool ng = false;
  for (const auto& in : inputs) ng = ng || in.needs_grad();
  if (ng) {
    n->needs_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node);
    n->backprop = std::move(bw);
  }
  return Var(n);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var constant(Matrix v) { return Var(std::make_shared<Node>(std::move(v))); }

Var leaf(Matrix v) {
  auto n = std::make_shared<Node>(std::move(v));
  n->needs_grad = true;
  return Var(n);
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw std::invalid_argument("backward: root must be scalar (1x1)");
  if (!root.needs_grad()) return;

  // Iterative post-order DFS; reversed it yields children before parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node.get(), 0);
  seen.insert(root.node.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->needs_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.size() != 0) n->backprop(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_node(a.value() + b.value(), {a, b}, [a, b](Node& n) {
    if (a.needs_grad()) { a.node->ensure_grad(); a.node->grad += n.grad; }
    if (b.needs_grad()) { b.node->ensure_grad(); b.node->grad += n.grad; }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_node(a.value() - b.value(), {a, b}, [a, b](Node& n) {
    if (a.needs_grad()) { a.node->ensure_grad(); a.node->grad += n.grad; }
    if (b.needs_grad()) { b.node->ensure_grad(); b.node->grad -= n.grad; }
  });
}

Var neg(const Var& a) {
  return make_node(-a.value(), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad -= n.grad;
  });
}

Var cmul(const Var& a, const Var& b) {
  check_same_shape(a, b, "cmul");
  return make_node(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Node& n) {
    if (a.needs_grad()) {
      a.node->ensure_grad();
      a.node->grad += n.grad.cwiseProduct(b.node->val);
    }
    if (b.needs_grad()) {
      b.node->ensure_grad();
      b.node->grad += n.grad.cwiseProduct(a.node->val);
    }
  });
}

Var cdiv(const Var& a, const Var& b) {
  check_same_shape(a, b, "cdiv");
  return make_node(a.value().cwiseQuotient(b.value()), {a, b}, [a, b](Node& n) {
    if (a.needs_grad()) {
      a.node->ensure_grad();
      a.node->grad += n.grad.cwiseQuotient(b.node->val);
    }
    if (b.needs_grad()) {
      b.node->ensure_grad();
      b.node->grad -= n.grad.cwiseProduct(n.val).cwiseQuotient(b.node->val);
    }
  });
}

Var scale(const Var& a, double s) {
  return make_node(s * a.value(), {a}, [a, s](Node& n) {
    a.node->ensure_grad();
    a.node->grad += s * n.grad;
  });
}

Var add_scalar(const Var& a, double s) {
  return make_node(Matrix((a.value().array() + s).matrix()), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad;
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
  return make_node(a.value() * b.value(), {a, b}, [a, b](Node& n) {
    if (a.needs_grad()) {
      a.node->ensure_grad();
      a.node->grad.noalias() += n.grad * b.node->val.transpose();
    }
    if (b.needs_grad()) {
      b.node->ensure_grad();
      b.node->grad.noalias() += a.node->val.transpose() * n.grad;
    }
  });
}

Var transpose(const Var& a) {
  return make_node(a.value().transpose(), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.transpose();
  });
}

Var sum_all(const Var& a) {
  Matrix s(1, 1);
  s(0, 0) = a.value().sum();
  return make_node(std::move(s), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad.array() += n.grad(0, 0);
  });
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(const Var& a) {
  return make_node(a.value().rowwise().sum(), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad.colwise() += n.grad.col(0);
  });
}

Var col_sum(const Var& a) {
  return make_node(a.value().colwise().sum(), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad.rowwise() += n.grad.row(0);
  });
}

Var broadcast_cols(const Var& v, int m) {
  if (v.cols() != 1) throw std::invalid_argument("broadcast_cols: expects n x 1");
  return make_node(v.value().replicate(1, m), {v}, [v](Node& n) {
    v.node->ensure_grad();
    v.node->grad.col(0) += n.grad.rowwise().sum();
  });
}

Var broadcast_rows(const Var& v, int n_rows) {
  if (v.rows() != 1) throw std::invalid_argument("broadcast_rows: expects 1 x m");
  return make_node(v.value().replicate(n_rows, 1), {v}, [v](Node& n) {
    v.node->ensure_grad();
    v.node->grad.row(0) += n.grad.colwise().sum();
  });
}

Var block(const Var& a, int r0, int c0, int nr, int nc) {
  return make_node(a.value().block(r0, c0, nr, nc), {a}, [a, r0, c0, nr, nc](Node& n) {
    a.node->ensure_grad();
    a.node->grad.block(r0, c0, nr, nc) += n.grad;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_node(std::move(out), parts, [parts](Node& n) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      if (p.needs_grad()) {
        p.node->ensure_grad();
        p.node->grad += n.grad.middleCols(c, p.cols());
      }
      c += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_node(std::move(out), parts, [parts](Node& n) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      if (p.needs_grad()) {
        p.node->ensure_grad();
        p.node->grad += n.grad.middleRows(r, p.rows());
      }
      r += p.rows();
    }
  });
}

Var log(const Var& a) {
  return make_node(Matrix(a.value().array().log().matrix()), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.cwiseQuotient(a.node->val);
  });
}

Var exp(const Var& a) {
  return make_node(Matrix(a.value().array().exp().matrix()), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.cwiseProduct(n.val);
  });
}

Var sqrt(const Var& a) {
  return make_node(Matrix(a.value().array().sqrt().matrix()), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.cwiseQuotient(2.0 * n.val);
  });
}

Var reciprocal(const Var& a) {
  return make_node(Matrix(a.value().array().inverse().matrix()), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad -= n.grad.cwiseProduct(n.val.cwiseProduct(n.val));
  });
}

Var softplus(const Var& a) {
  // log(1 + e^x), computed without overflow on either tail.
  Matrix out = a.value().unaryExpr([](double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return make_node(std::move(out), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.cwiseProduct(
        a.node->val.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }));
  });
}

Var relu(const Var& a) {
  return make_node(a.value().cwiseMax(0.0), {a}, [a](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.cwiseProduct(
        a.node->val.unaryExpr([](double x) { return x > 0 ? 1.0 : 0.0; }));
  });
}

Var clamp_min(const Var& a, double floor) {
  return make_node(a.value().cwiseMax(floor), {a}, [a, floor](Node& n) {
    a.node->ensure_grad();
    a.node->grad += n.grad.cwiseProduct(
        a.node->val.unaryExpr([floor](double x) { return x > floor ? 1.0 : 0.0; }));
  });
}

Var row_softmax(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Eigen::ArrayXd row = out.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    out.row(i) = (row / row.sum()).matrix();
  }
  return make_node(std::move(out), {a}, [a](Node& n) {
    a.node->ensure_grad();
    for (Eigen::Index i = 0; i < n.val.rows(); ++i) {
      const auto p = n.val.row(i).array();
      const auto g = n.grad.row(i).array();
      double dot = (g * p).sum();
      a.node->grad.row(i).array() += p * (g - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index rows = x.rows(), d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x d");
  Matrix xhat(rows, d);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = x.value().row(i).array();
    double mu = row.mean();
    double var = (row - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = ((row - mu) * is).matrix();
  }
  Matrix out = ((xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
                bias.value().row(0).array()).matrix();
  return make_node(std::move(out), {x, gain, bias},
                   [x, gain, bias, xhat, inv_std](Node& n) {
    const Eigen::Index rows = n.val.rows();
    if (gain.needs_grad()) {
      gain.node->ensure_grad();
      gain.node->grad.row(0) += (n.grad.array() * xhat.array()).colwise().sum().matrix();
    }
    if (bias.needs_grad()) {
      bias.node->ensure_grad();
      bias.node->grad.row(0) += n.grad.colwise().sum();
    }
    if (x.needs_grad()) {
      x.node->ensure_grad();
      using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
      for (Eigen::Index i = 0; i < rows; ++i) {
        RowArray dxhat = n.grad.row(i).array() * gain.node->val.row(0).array();
        RowArray xh = xhat.row(i).array();
        double m1 = dxhat.mean();
        double m2 = (dxhat * xh).mean();
        x.node->grad.row(i).array() += inv_std(i) * (dxhat - m1 - xh * m2);
      }
    }
  });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
  const Eigen::Index d = table.cols();
  Matrix out(static_cast<Eigen::Index>(ids.size()), d);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw std::out_of_range("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  return make_node(std::move(out), {table}, [table, ids](Node& n) {
    table.node->ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i)
      table.node->grad.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var cross_entropy_logits(const Var& logits, const std::vector<int>& targets,
                         int ignore_id) {
  const Eigen::Index rows = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != rows)
    throw std::invalid_argument("cross_entropy_logits: one target per row required");
  double total = 0.0;
  int counted = 0;
  Matrix probs(rows, logits.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::ArrayXd row = logits.value().row(i).array();
    double mx = row.maxCoeff();
    Eigen::ArrayXd ex = (row - mx).exp();
    double z = ex.sum();
    probs.row(i) = ex / z;
    int t = targets[static_cast<size_t>(i)];
    if (t == ignore_id) continue;
    if (t < 0 || t >= logits.cols())
      throw std::out_of_range("cross_entropy_logits: target id out of range");
    total += -(logits.value()(i, t) - mx - std::log(z));
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("cross_entropy_logits: all targets ignored");
  Matrix s(1, 1);
  s(0, 0) = total / counted;
  return make_node(std::move(s), {logits}, [logits, targets, ignore_id, probs, counted](Node& n) {
    logits.node->ensure_grad();
    double g = n.grad(0, 0) / counted;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      int t = targets[static_cast<size_t>(i)];
      if (t == ignore_id) continue;
      logits.node->grad.row(i) += g * probs.row(i);
      logits.node->grad(i, t) -= g;
    }
  });
}

Var multihead_attention_core(const Var& q, const Var& k, const Var& v, int heads,
                             const Matrix* bias) {
  const Eigen::Index tq = q.rows(), tk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || tk != v.rows())
    throw std::invalid_argument("attention: shape mismatch");
  if (heads <= 0 || d % heads != 0)
    throw std::invalid_argument("attention: head count must divide width");
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Matrix> attn(static_cast<size_t>(heads));
  Matrix out(tq, d);
  for (int h = 0; h < heads; ++h) {
    Matrix scores = q.value().middleCols(h * dh, dh) *
                    k.value().middleCols(h * dh, dh).transpose() * scale;
    if (bias) scores += *bias;
    for (Eigen::Index i = 0; i < tq; ++i) {
      Eigen::ArrayXd row = scores.row(i).transpose().array();
      row -= row.maxCoeff();
      row = row.exp();
      scores.row(i) = (row / row.sum()).transpose();
    }
    attn[static_cast<size_t>(h)] = scores;
    out.middleCols(h * dh, dh).noalias() =
        scores * v.value().middleCols(h * dh, dh);
  }
  return make_node(std::move(out), {q, k, v},
                   [q, k, v, heads, dh, scale, attn = std::move(attn)](Node& n) {
    for (int h = 0; h < heads; ++h) {
      const Matrix& a = attn[static_cast<size_t>(h)];
      auto dout = n.grad.middleCols(h * dh, dh);
      Matrix da = dout * v.node->val.middleCols(h * dh, dh).transpose();
      if (v.needs_grad()) {
        v.node->ensure_grad();
        v.node->grad.middleCols(h * dh, dh).noalias() += a.transpose() * dout;
      }
      // softmax backward per row
      Matrix ds(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double dot = a.row(i).dot(da.row(i));
        ds.row(i) = a.row(i).cwiseProduct(da.row(i).array().matrix() -
                                          Eigen::RowVectorXd::Constant(a.cols(), dot));
      }
      if (q.needs_grad()) {
        q.node->ensure_grad();
        q.node->grad.middleCols(h * dh, dh).noalias() +=
            scale * ds * k.node->val.middleCols(h * dh, dh);
      }
      if (k.needs_grad()) {
        k.node->ensure_grad();
        k.node->grad.middleCols(h * dh, dh).noalias() +=
            scale * ds.transpose() * q.node->val.middleCols(h * dh, dh);
      }
    }
  });
}

Var pairwise_sqdist(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("pairwise_sqdist: dim mismatch");
  const int m = static_cast<int>(b.rows());
  const int n = static_cast<int>(a.rows());
  Var a_sq = row_sum(cmul(a, a));                  // n x 1
  Var b_sq = row_sum(cmul(b, b));                  // m x 1
  Var cross = matmul(a, transpose(b));             // n x m
  return add(sub(broadcast_cols(a_sq, m), scale(cross, 2.0)),
             broadcast_rows(transpose(b_sq), n));
}

Var imq_from_sqdist(const Var& sqdist, const std::vector<double>& scales, double base) {
  if (scales.empty() || base <= 0)
    throw std::invalid_argument("imq_from_sqdist: invalid kernel config");
  Matrix out = Matrix::Zero(sqdist.rows(), sqdist.cols());
  for (double s : scales) {
    double sc = s * base;
    out += (sc / (sqdist.value().array() + sc)).matrix();
  }
  return make_node(std::move(out), {sqdist}, [sqdist, scales, base](Node& n) {
    sqdist.node->ensure_grad();
    Eigen::ArrayXXd deriv = Eigen::ArrayXXd::Zero(n.val.rows(), n.val.cols());
    for (double s : scales) {
      double sc = s * base;
      Eigen::ArrayXXd denom = sqdist.node->val.array() + sc;
      deriv -= sc / (denom * denom);
    }
    sqdist.node->grad.array() += n.grad.array() * deriv;
  });
}

}  // namespace minotaur::ad
