#include "lft/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "lft/error.hpp"
#include "lft/nets.hpp"

namespace lft {

double nmse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("nmse: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  const auto p = pred.data();
  const auto t = target.data();
  double err = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    err += d * d;
    norm += t[i] * t[i];
  }
  if (norm == 0.0) {
    throw InputError("nmse: target has zero norm");
  }
  return err / norm;
}

double kl_categorical(const Tensor& p_logits, const Tensor& q_logits) {
  if (p_logits.shape() != q_logits.shape()) {
    throw DimensionError("kl_categorical: " + shape_str(p_logits.shape()) + " vs " +
                         shape_str(q_logits.shape()));
  }
  NoGradGuard no_grad;
  const Tensor lp = log_softmax_last(p_logits);
  const Tensor lq = log_softmax_last(q_logits);
  const std::size_t rows = p_logits.rows();
  const std::size_t v = p_logits.cols();
  const auto a = lp.data();
  const auto b = lq.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double kl = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      const std::size_t i = r * v + j;
      kl += std::exp(a[i]) * (a[i] - b[i]);
    }
    total += std::max(kl, 0.0);
  }
  return total / static_cast<double>(rows);
}

double latent_kl(const Tensor& x1, const Tensor& x1_hat, const MicroTransformer& teacher) {
  if (x1.shape() != x1_hat.shape()) {
    throw InputError("latent_kl: " + shape_str(x1.shape()) + " vs " + shape_str(x1_hat.shape()));
  }
  if (x1.cols() != teacher.config().d_model) {
    throw InputError("latent_kl: latent width " + std::to_string(x1.cols()) + " differs from teacher d_model " +
                     std::to_string(teacher.config().d_model));
  }
  NoGradGuard no_grad;
  return kl_categorical(teacher.head(x1), teacher.head(x1_hat));
}

double perplexity(const Tensor& logits, std::span<const std::int32_t> next_tokens) {
  NoGradGuard no_grad;
  return std::exp(cross_entropy(logits, next_tokens).item());
}

void write_eval_header(std::ostream& os) { os << "method,m,n,k,nmse,kl_latent,kl_lm,ppl,n_tokens\n"; }

void write_eval_row(std::ostream& os, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.10g,%.10g,%.10g,%.10g,%zu\n", r.method.c_str(), r.m, r.n, r.k,
                r.nmse, r.kl_latent, r.kl_lm, r.ppl, r.n_tokens);
  os << buf;
}

}  // namespace lft
