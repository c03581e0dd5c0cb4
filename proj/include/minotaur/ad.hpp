#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace minotaur::ad {

using Matrix = Eigen::MatrixXd;

/// One node of a dynamically built computation graph. Nodes hold the forward
/// value, the accumulated adjoint, and a closure that pushes the adjoint into
/// the parent nodes. Graphs are DAGs owned through shared_ptr from the roots.
struct Node {
  Matrix val;
  Matrix grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  bool needs_grad = false;

  explicit Node(Matrix v) : val(std::move(v)) {}

  void ensure_grad() {
    if (grad.size() == 0) grad = Matrix::Zero(val.rows(), val.cols());
  }
};

/// Cheap handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node(std::move(n)) {}

  const Matrix& value() const { return node->val; }
  const Matrix& grad() const { return node->grad; }
  bool needs_grad() const { return node && node->needs_grad; }
  Eigen::Index rows() const { return node->val.rows(); }
  Eigen::Index cols() const { return node->val.cols(); }

  /// Value of a 1x1 node.
  double scalar() const { return node->val(0, 0); }

  bool defined() const { return static_cast<bool>(node); }

  std::shared_ptr<Node> node;
};

/// Non-differentiable input.
Var constant(Matrix v);
/// Differentiable input; gradient accumulates in .grad() during backward().
Var leaf(Matrix v);

/// Reverse pass from a scalar (1x1) root. Gradients of all reachable leaves
/// are accumulated; call once per graph.
void backward(const Var& root);

// ---- arithmetic -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var cmul(const Var& a, const Var& b);  // elementwise
Var cdiv(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// ---- shape / reduction ----------------------------------------------------
Var sum_all(const Var& a);                  // -> 1x1
Var mean_all(const Var& a);                 // -> 1x1
Var row_sum(const Var& a);                  // n x m -> n x 1
Var col_sum(const Var& a);                  // n x m -> 1 x m
Var broadcast_cols(const Var& v, int m);    // n x 1 -> n x m
Var broadcast_rows(const Var& v, int n);    // 1 x m -> n x m
Var block(const Var& a, int r0, int c0, int nr, int nc);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

// ---- elementwise maps -----------------------------------------------------
Var log(const Var& a);
Var exp(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);
Var clamp_min(const Var& a, double floor);  // zero gradient below the floor

// ---- neural-net pieces ----------------------------------------------------
Var row_softmax(const Var& a);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var gather_rows(const Var& table, const std::vector<int>& ids);
/// Mean token-level cross-entropy of row-wise logits against integer targets.
/// Rows whose target equals ignore_id are excluded from the mean.
Var cross_entropy_logits(const Var& logits, const std::vector<int>& targets,
                         int ignore_id = -1);

/// Scaled dot-product attention over all heads at once: q, k, v are full
/// d-wide projections (rows time, d = heads * head_dim); bias, when present,
/// is added to every head's scores. Returns the concatenated head outputs.
Var multihead_attention_core(const Var& q, const Var& k, const Var& v, int heads,
                             const Matrix* bias = nullptr);

// ---- kernel helpers -------------------------------------------------------
/// Squared euclidean distances between row vectors: (n x d, m x d) -> n x m.
Var pairwise_sqdist(const Var& a, const Var& b);
/// Applies sum_s s*C / (s*C + D) elementwise to a squared-distance matrix.
Var imq_from_sqdist(const Var& sqdist, const std::vector<double>& scales, double base);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace minotaur::ad
