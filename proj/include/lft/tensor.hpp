#pragma once

// Dense float64 tensors with a record-by-run reverse-mode tape.
//
// A Tensor is a cheap handle onto a shared node. Operations on tensors that
// require gradients record a backward closure on the result node; calling
// backward() on a scalar walks the recorded graph in reverse topological
// order. Leaves accumulate gradients across calls until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lft {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  /// Size of the trailing axis.
  std::size_t cols() const;
  /// Product of all leading axes.
  std::size_t rows() const;

  std::span<const double> data() const;
  /// In-place access for optimizers and finite-difference probes. Never use
  /// on a tensor whose value was captured by a recorded op you still need.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Fresh leaf holding a copy of the value, detached from any graph.
  Tensor detach() const;
  /// Same storage order, new shape. Records a pass-through gradient.
  Tensor reshape(Shape shape) const;

  /// Reverse-mode sweep from this scalar. Leaves accumulate into grad.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

/// Builds an op result; the closure is only kept when a parent needs grad and
/// recording is enabled.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn);

/// Disables tape recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// --- elementwise (identical shapes only) ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor silu(const Tensor& a);

// --- trailing-axis affine ---
/// a[..., D] + b[D]
Tensor add_row(const Tensor& a, const Tensor& b);
/// a[..., D] * g[D]
Tensor mul_row(const Tensor& a, const Tensor& g);

// --- reductions ---
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_squares(const Tensor& a);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[N, in] * w[in, out] + b[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// --- normalization / probabilities ---
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor softmax_last(const Tensor& x);
Tensor log_softmax_last(const Tensor& x);
/// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

// --- indexing ---
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Rows of table[V, D] selected by ids; result [ids.size(), D].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

/// Multi-head causal attention over rows grouped into sequences of seq_len.
/// q, k, v are [N, D] with N a multiple of seq_len; query row i of a sequence
/// attends to key rows j <= i of the same sequence.
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_heads,
                        std::size_t seq_len);

/// True if every value is finite.
bool all_finite(std::span<const double> values);

}  // namespace lft
