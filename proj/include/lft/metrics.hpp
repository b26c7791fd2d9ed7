#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "lft/tensor.hpp"

namespace lft {

class MicroTransformer;

/// sum ||pred - target||^2 / sum ||target||^2. Throws InputError for an all-zero target.
double nmse(const Tensor& pred, const Tensor& target);

/// Mean over rows of KL(softmax(p) || softmax(q)) in nats.
double kl_categorical(const Tensor& p_logits, const Tensor& q_logits);

/// Logit-lens KL: both latents go through the teacher's final LN and
/// unembedding, then KL(x1 || x1_hat).
double latent_kl(const Tensor& x1, const Tensor& x1_hat, const MicroTransformer& teacher);

/// exp(mean next-token negative log-likelihood).
double perplexity(const Tensor& logits, std::span<const std::int32_t> next_tokens);

struct EvalReport {
  std::string method;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double nmse = 0.0;
  double kl_latent = 0.0;
  double kl_lm = 0.0;
  double ppl = 1.0;
  std::size_t n_tokens = 0;
};

/// `method,m,n,k,nmse,kl_latent,kl_lm,ppl,n_tokens`
void write_eval_header(std::ostream& os);
void write_eval_row(std::ostream& os, const EvalReport& r);

}  // namespace lft
