#pragma once

// Synthetic token stream for the micro-teacher: an order-2 Markov chain whose
// next-symbol logits factor as A[a][c] + B[b][c] for context (a, b).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lft {

struct CorpusConfig {
  std::size_t vocab_size = 64;
  std::size_t n_tokens = 200000;
  /// The transition table always comes from this seed, independent of the run seed.
  std::uint64_t table_seed = 0;
  double logit_scale = 2.5;
  double heldout_fraction = 0.1;

  void validate() const;
};

class MarkovSource {
 public:
  MarkovSource(std::size_t vocab_size, std::uint64_t table_seed, double logit_scale);

  /// P(c | a, b), where b is the most recent symbol.
  std::vector<double> next_distribution(std::int32_t a, std::int32_t b) const;
  /// Entropy in nats of next_distribution(a, b).
  double conditional_entropy(std::int32_t a, std::int32_t b) const;
  std::vector<std::int32_t> sample(std::size_t n_tokens, std::uint64_t seed) const;

  std::size_t vocab_size() const { return vocab_; }

 private:
  std::size_t vocab_;
  std::vector<double> a_;  // [V, V]
  std::vector<double> b_;  // [V, V]
};

struct Corpus {
  std::vector<std::int32_t> tokens;
  std::size_t train_end = 0;  // tokens[train_end:] is held out
  std::size_t vocab_size = 0;
  /// Mean conditional entropy (nats) of the source along the held-out split;
  /// exp of this is the best perplexity any model can reach there.
  double heldout_entropy = 0.0;

  std::span<const std::int32_t> train() const { return {tokens.data(), train_end}; }
  std::span<const std::int32_t> heldout() const {
    return {tokens.data() + train_end, tokens.size() - train_end};
  }
};

Corpus make_corpus(const CorpusConfig& config, std::uint64_t seed);

/// Consecutive non-overlapping windows of `seq_len` tokens from `tokens`
/// (inputs) with their next tokens (targets), at most `max_windows` of them.
struct Windows {
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> targets;
  std::size_t count = 0;
};
Windows contiguous_windows(std::span<const std::int32_t> tokens, std::size_t seq_len, std::size_t max_windows);

}  // namespace lft
