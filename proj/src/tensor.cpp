#include "lft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "lft/error.hpp"

#ifdef LFT_HAVE_OPENBLAS
#include <cblas.h>
#endif

namespace lft {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_defined(const Tensor& a, const char* op) {
  if (!a.defined()) {
    throw ContractError(std::string(op) + ": undefined tensor");
  }
}

#ifdef LFT_HAVE_OPENBLAS

// Pinned to one thread so every reduction order is fixed.
const bool kBlasSingleThread = [] {
  openblas_set_num_threads(1);
  return true;
}();

// C[M,N] += A[M,K] * B[K,N]
void gemm_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), 1.0, a, static_cast<int>(k), b, static_cast<int>(n), 1.0, c,
              static_cast<int>(n));
}

// dA[M,K] += dC[M,N] * B[K,N]^T
void grad_lhs(double* da, const double* dc, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(m), static_cast<int>(k),
              static_cast<int>(n), 1.0, dc, static_cast<int>(n), b, static_cast<int>(n), 1.0, da,
              static_cast<int>(k));
}

// dB[K,N] += A[M,K]^T * dC[M,N]
void grad_rhs(double* db, const double* a, const double* dc, std::size_t m, std::size_t k,
              std::size_t n) {
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(k), static_cast<int>(n),
              static_cast<int>(m), 1.0, a, static_cast<int>(k), dc, static_cast<int>(n), 1.0, db,
              static_cast<int>(n));
}

#else

// C[M,N] += A[M,K] * B[K,N]; inner loop runs over contiguous rows of B and C.
void gemm_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

std::vector<double> transpose(const double* a, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[c * rows + r] = a[r * cols + c];
    }
  }
  return out;
}

// dA[M,K] += dC[M,N] * B[K,N]^T
void grad_lhs(double* da, const double* dc, const double* b, std::size_t m, std::size_t k,
              std::size_t n) {
  const std::vector<double> bt = transpose(b, k, n);
  gemm_acc(da, dc, bt.data(), m, n, k);
}

// dB[K,N] += A[M,K]^T * dC[M,N]
void grad_rhs(double* db, const double* a, const double* dc, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* dcrow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* dbrow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        dbrow[j] += av * dcrow[j];
      }
    }
  }
}

#endif

Tensor unary(const Tensor& a, const std::function<double(double)>& f,
             const std::function<double(double, double)>& df_from_x_y) {
  require_defined(a, "unary");
  const auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = f(in[i]);
  }
  return make_result(a.shape(), std::move(out), {a}, [df_from_x_y](detail::Node& self) {
    auto& pa = *self.parents[0];
    if (!pa.requires_grad) {
      return;
    }
    auto& ga = pa.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += self.grad[i] * df_from_x_y(pa.value[i], self.value[i]);
    }
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) {
    grad.assign(value.size(), 0.0);
  }
  return grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool record = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) {
      if (p.defined() && p.node()->requires_grad) {
        record = true;
        break;
      }
    }
  }
  if (record) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) {
      node->parents.push_back(p.node());
    }
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive: " + shape_str(shape));
    }
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }
std::size_t Tensor::cols() const { return shape().back(); }
std::size_t Tensor::rows() const { return numel() / cols(); }

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  require_defined(*this, "set_requires_grad");
  if (!node_->is_leaf()) {
    throw ContractError("set_requires_grad on a non-leaf tensor");
  }
  node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return node_ && node_->is_leaf(); }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("tensor has no gradient buffer");
  }
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "mutable_grad");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw DimensionError("reshape " + shape_str(shape()) + " -> " + shape_str(new_shape));
  }
  return make_result(std::move(new_shape), node_->value, {*this}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& ga = pa.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += self.grad[i];
    }
  });
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw ContractError("backward() on a tensor that was not recorded");
  }
  // Reverse post-order DFS. Parents are pushed last-to-first so the subgraph of
  // parents[0] is processed first in the sweep.
  std::vector<detail::Node*> post;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[n->parents.size() - 1 - next].get();
      ++next;
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      post.push_back(n);
      stack.pop_back();
    }
  }
  for (detail::Node* n : post) {
    if (!n->is_leaf()) {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = post.rbegin(); it != post.rend(); ++it) {
    if (!(*it)->is_leaf()) {
      (*it)->backward_fn(**it);
    }
  }
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] + y[i];
  }
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) {
        continue;
      }
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] - y[i];
  }
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i];
      }
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] -= self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] * y[i];
  }
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * pb.value[i];
      }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * pa.value[i];
      }
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  require_defined(a, "scale");
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] * s;
  }
  return make_result(a.shape(), std::move(out), {a}, [s](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * s;
    }
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  require_defined(a, "add_scalar");
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] + s;
  }
  return make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i];
    }
  });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x))); },
      [](double x, double) {
        const double th = std::tanh(kC * (x + kA * x * x * x));
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kC * (1.0 + 3.0 * kA * x * x);
      });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

// ---------------------------------------------------------------------------
// trailing-axis affine

Tensor add_row(const Tensor& a, const Tensor& b) {
  require_defined(a, "add_row");
  if (b.rank() != 1 || b.numel() != a.cols()) {
    throw DimensionError("add_row: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  }
  const std::size_t d = a.cols();
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] + y[i % d];
  }
  return make_result(a.shape(), std::move(out), {a, b}, [d](detail::Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i];
      }
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[i % d] += self.grad[i];
      }
    }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& gmul) {
  require_defined(a, "mul_row");
  if (gmul.rank() != 1 || gmul.numel() != a.cols()) {
    throw DimensionError("mul_row: " + shape_str(a.shape()) + " * " + shape_str(gmul.shape()));
  }
  const std::size_t d = a.cols();
  const auto x = a.data();
  const auto y = gmul.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[i] * y[i % d];
  }
  return make_result(a.shape(), std::move(out), {a, gmul}, [d](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pg = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * pg.value[i % d];
      }
    }
    if (pg.requires_grad) {
      auto& g = pg.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[i % d] += self.grad[i] * pa.value[i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double s = 0.0;
  for (double v : a.data()) {
    s += v;
  }
  return make_result({1}, {s}, {a}, [](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const double up = self.grad[0];
    for (double& v : g) {
      v += up;
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_squares(const Tensor& a) {
  require_defined(a, "sum_squares");
  double s = 0.0;
  for (double v : a.data()) {
    s += v * v;
  }
  return make_result({1}, {s}, {a}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& g = pa.ensure_grad();
    const double up = 2.0 * self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += up * pa.value[i];
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_acc(out.data(), a.data().data(), b.data().data(), m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      grad_lhs(pa.ensure_grad().data(), self.grad.data(), pb.value.data(), m, k, n);
    }
    if (pb.requires_grad) {
      grad_rhs(pb.ensure_grad().data(), pa.value.data(), self.grad.data(), m, k, n);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_defined(x, "linear");
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.rank() != 1 || b.numel() != w.dim(1)) {
    throw DimensionError("linear: " + shape_str(x.shape()) + " x " + shape_str(w.shape()) + " + " +
                         shape_str(b.shape()));
  }
  const std::size_t m = x.dim(0);
  const std::size_t k = x.dim(1);
  const std::size_t n = w.dim(1);
  std::vector<double> out(m * n);
  const auto bias = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(bias.begin(), bias.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  gemm_acc(out.data(), x.data().data(), w.data().data(), m, k, n);
  return make_result({m, n}, std::move(out), {x, w, b}, [m, k, n](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (px.requires_grad) {
      grad_lhs(px.ensure_grad().data(), self.grad.data(), pw.value.data(), m, k, n);
    }
    if (pw.requires_grad) {
      grad_rhs(pw.ensure_grad().data(), px.value.data(), self.grad.data(), m, k, n);
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          gb[j] += self.grad[i * n + j];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// normalization / probabilities

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  if (eps < 0.0) {
    throw ContractError("layer_norm: eps must be non-negative");
  }
  const std::size_t d = x.cols();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " with gamma " +
                         shape_str(gamma.shape()) + " beta " + shape_str(beta.shape()));
  }
  const std::size_t rows = x.rows();
  const auto in = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<double> out(in.size());
  std::vector<double> xhat(in.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      mu += row[j];
    }
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](detail::Node& self) {
                       auto& px = *self.parents[0];
                       auto& pg = *self.parents[1];
                       auto& pb = *self.parents[2];
                       const double inv_d = 1.0 / static_cast<double>(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gy = self.grad.data() + r * d;
                         const double* h = xhat.data() + r * d;
                         if (pg.requires_grad) {
                           auto& gg = pg.ensure_grad();
                           for (std::size_t j = 0; j < d; ++j) {
                             gg[j] += gy[j] * h[j];
                           }
                         }
                         if (pb.requires_grad) {
                           auto& gb = pb.ensure_grad();
                           for (std::size_t j = 0; j < d; ++j) {
                             gb[j] += gy[j];
                           }
                         }
                         if (px.requires_grad) {
                           double mean_dh = 0.0;
                           double mean_dh_h = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double dh = gy[j] * pg.value[j];
                             mean_dh += dh;
                             mean_dh_h += dh * h[j];
                           }
                           mean_dh *= inv_d;
                           mean_dh_h *= inv_d;
                           double* gx = px.ensure_grad().data() + r * d;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double dh = gy[j] * pg.value[j];
                             gx[j] += rstd[r] * (dh - mean_dh - h[j] * mean_dh_h);
                           }
                         }
                       }
                     });
}

namespace {

void softmax_row(const double* in, double* out, std::size_t d) {
  double mx = in[0];
  for (std::size_t j = 1; j < d; ++j) {
    mx = std::max(mx, in[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = std::exp(in[j] - mx);
    z += out[j];
  }
  for (std::size_t j = 0; j < d; ++j) {
    out[j] /= z;
  }
}

double log_sum_exp_row(const double* in, std::size_t d) {
  double mx = in[0];
  for (std::size_t j = 1; j < d; ++j) {
    mx = std::max(mx, in[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    z += std::exp(in[j] - mx);
  }
  return mx + std::log(z);
}

}  // namespace

Tensor softmax_last(const Tensor& x) {
  require_defined(x, "softmax_last");
  const std::size_t d = x.cols();
  const std::size_t rows = x.rows();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    softmax_row(x.data().data() + r * d, out.data() + r * d, d);
  }
  return make_result(x.shape(), std::move(out), {x}, [d, rows](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * d;
      const double* gy = self.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        dot += gy[j] * y[j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        g[r * d + j] += y[j] * (gy[j] - dot);
      }
    }
  });
}

Tensor log_softmax_last(const Tensor& x) {
  require_defined(x, "log_softmax_last");
  const std::size_t d = x.cols();
  const std::size_t rows = x.rows();
  const auto in = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double lse = log_sum_exp_row(in.data() + r * d, d);
    for (std::size_t j = 0; j < d; ++j) {
      out[r * d + j] = in[r * d + j] - lse;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [d, rows](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* ly = self.value.data() + r * d;
      const double* gy = self.grad.data() + r * d;
      double total = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        total += gy[j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        g[r * d + j] += gy[j] - std::exp(ly[j]) * total;
      }
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets) {
  require_defined(logits, "cross_entropy");
  const std::size_t v = logits.cols();
  const std::size_t rows = logits.rows();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(rows) + " rows vs " +
                         std::to_string(targets.size()) + " targets");
  }
  std::vector<double> probs(logits.numel());
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= v) {
      throw InputError("cross_entropy: target id out of range");
    }
    const double* row = logits.data().data() + r * v;
    total += log_sum_exp_row(row, v) - row[tgt[r]];
    softmax_row(row, probs.data() + r * v, v);
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  return make_result({1}, {total * inv_rows}, {logits},
                     [v, rows, inv_rows, probs = std::move(probs), tgt = std::move(tgt)](detail::Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       const double up = self.grad[0] * inv_rows;
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < v; ++j) {
                           g[r * v + j] += up * probs[r * v + j];
                         }
                         g[r * v + static_cast<std::size_t>(tgt[r])] -= up;
                       }
                     });
}

// ---------------------------------------------------------------------------
// indexing

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_defined(a, "slice_cols");
  const std::size_t d = a.cols();
  if (count == 0 || start + count > d) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of " + std::to_string(d));
  }
  const std::size_t rows = a.rows();
  std::vector<double> out(rows * count);
  const auto in = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(r * d + start), count,
                out.begin() + static_cast<std::ptrdiff_t>(r * count));
  }
  Shape shape = a.shape();
  shape.back() = count;
  return make_result(std::move(shape), std::move(out), {a}, [d, rows, start, count](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < count; ++j) {
        g[r * d + start + j] += self.grad[r * count + j];
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw DimensionError("concat_cols: no inputs");
  }
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows || p.rank() != parts[0].rank()) {
      throw DimensionError("concat_cols: row mismatch");
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto in = parts[i].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(r * widths[i]), widths[i],
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + off));
    }
    off += widths[i];
  }
  Shape shape = parts[0].shape();
  shape.back() = total;
  return make_result(std::move(shape), std::move(out), parts, [rows, total, widths](detail::Node& self) {
    std::size_t o = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      auto& p = *self.parents[i];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < widths[i]; ++j) {
            g[r * widths[i] + j] += self.grad[r * total + o + j];
          }
        }
      }
      o += widths[i];
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  require_defined(table, "embedding");
  if (table.rank() != 2) {
    throw DimensionError("embedding: table must be 2-D, got " + shape_str(table.shape()));
  }
  if (ids.empty()) {
    throw DimensionError("embedding: no ids");
  }
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  const auto tv = table.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= vocab) {
      throw InputError("embedding: id " + std::to_string(idx[r]) + " outside table of " +
                       std::to_string(vocab));
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idx[r]) * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const std::size_t n = idx.size();
  return make_result({n, d}, std::move(out), {table}, [d, idx = std::move(idx)](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      double* dst = g.data() + static_cast<std::size_t>(idx[r]) * d;
      const double* src = self.grad.data() + r * d;
      for (std::size_t j = 0; j < d; ++j) {
        dst[j] += src[j];
      }
    }
  });
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_heads,
                        std::size_t seq_len) {
  require_same_shape(q, k, "causal_attention");
  require_same_shape(q, v, "causal_attention");
  if (q.rank() != 2) {
    throw DimensionError("causal_attention: expected [N, D], got " + shape_str(q.shape()));
  }
  const std::size_t n = q.dim(0);
  const std::size_t d = q.dim(1);
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("causal_attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
  }
  if (seq_len == 0 || n % seq_len != 0) {
    throw DimensionError("causal_attention: " + std::to_string(n) + " rows not a multiple of seq_len " +
                         std::to_string(seq_len));
  }
  const std::size_t n_seq = n / seq_len;
  const std::size_t dh = d / n_heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double* qv = q.data().data();
  const double* kv = k.data().data();
  const double* vv = v.data().data();

  // probs[(s * H + h) * S * S + i * S + j], zero above the diagonal
  std::vector<double> probs(n_seq * n_heads * seq_len * seq_len, 0.0);
  std::vector<double> out(n * d, 0.0);
  std::vector<double> scores(seq_len);
  for (std::size_t s = 0; s < n_seq; ++s) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      double* pblock = probs.data() + (s * n_heads + h) * seq_len * seq_len;
      for (std::size_t i = 0; i < seq_len; ++i) {
        const double* qi = qv + (s * seq_len + i) * d + h * dh;
        for (std::size_t j = 0; j <= i; ++j) {
          const double* kj = kv + (s * seq_len + j) * d + h * dh;
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            dot += qi[c] * kj[c];
          }
          scores[j] = dot * inv_scale;
        }
        softmax_row(scores.data(), pblock + i * seq_len, i + 1);
        double* oi = out.data() + (s * seq_len + i) * d + h * dh;
        for (std::size_t j = 0; j <= i; ++j) {
          const double p = pblock[i * seq_len + j];
          const double* vj = vv + (s * seq_len + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) {
            oi[c] += p * vj[c];
          }
        }
      }
    }
  }
  return make_result(
      {n, d}, std::move(out), {q, k, v},
      [n_seq, n_heads, seq_len, d, dh, inv_scale, probs = std::move(probs)](detail::Node& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        double* gq = pq.requires_grad ? pq.ensure_grad().data() : nullptr;
        double* gk = pk.requires_grad ? pk.ensure_grad().data() : nullptr;
        double* gv = pv.requires_grad ? pv.ensure_grad().data() : nullptr;
        std::vector<double> dp(seq_len);
        for (std::size_t s = 0; s < n_seq; ++s) {
          for (std::size_t h = 0; h < n_heads; ++h) {
            const double* pblock = probs.data() + (s * n_heads + h) * seq_len * seq_len;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const std::size_t row_i = (s * seq_len + i) * d + h * dh;
              const double* go = self.grad.data() + row_i;
              double weighted = 0.0;
              for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t row_j = (s * seq_len + j) * d + h * dh;
                const double p = pblock[i * seq_len + j];
                double dot = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                  dot += go[c] * pv.value[row_j + c];
                }
                dp[j] = dot;
                weighted += p * dot;
                if (gv) {
                  for (std::size_t c = 0; c < dh; ++c) {
                    gv[row_j + c] += p * go[c];
                  }
                }
              }
              for (std::size_t j = 0; j <= i; ++j) {
                const std::size_t row_j = (s * seq_len + j) * d + h * dh;
                const double ds = pblock[i * seq_len + j] * (dp[j] - weighted) * inv_scale;
                if (gq) {
                  for (std::size_t c = 0; c < dh; ++c) {
                    gq[row_i + c] += ds * pk.value[row_j + c];
                  }
                }
                if (gk) {
                  for (std::size_t c = 0; c < dh; ++c) {
                    gk[row_j + c] += ds * pq.value[row_i + c];
                  }
                }
              }
            }
          }
        }
      });
}

}  // namespace lft
