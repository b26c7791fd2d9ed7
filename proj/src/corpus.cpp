#include "lft/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lft/error.hpp"
#include "lft/rng.hpp"

namespace lft {

void CorpusConfig::validate() const {
  if (vocab_size < 2) {
    throw ContractError("corpus: vocab_size must be >= 2");
  }
  if (n_tokens < 100) {
    throw ContractError("corpus: n_tokens must be >= 100");
  }
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw ContractError("corpus: heldout_fraction must lie in (0, 1)");
  }
  if (!(logit_scale >= 0.0)) {
    throw ContractError("corpus: logit_scale must be >= 0");
  }
}

MarkovSource::MarkovSource(std::size_t vocab_size, std::uint64_t table_seed, double logit_scale)
    : vocab_(vocab_size), a_(vocab_size * vocab_size), b_(vocab_size * vocab_size) {
  Rng rng = named_stream(table_seed, "corpus.table");
  for (double& w : a_) {
    w = logit_scale * normal01(rng);
  }
  for (double& w : b_) {
    w = logit_scale * normal01(rng);
  }
}

std::vector<double> MarkovSource::next_distribution(std::int32_t a, std::int32_t b) const {
  const std::size_t v = vocab_;
  std::vector<double> p(v);
  double top = -INFINITY;
  for (std::size_t c = 0; c < v; ++c) {
    p[c] = a_[static_cast<std::size_t>(a) * v + c] + b_[static_cast<std::size_t>(b) * v + c];
    top = std::max(top, p[c]);
  }
  double z = 0.0;
  for (double& x : p) {
    x = std::exp(x - top);
    z += x;
  }
  for (double& x : p) {
    x /= z;
  }
  return p;
}

double MarkovSource::conditional_entropy(std::int32_t a, std::int32_t b) const {
  double h = 0.0;
  for (double p : next_distribution(a, b)) {
    if (p > 0.0) {
      h -= p * std::log(p);
    }
  }
  return h;
}

std::vector<std::int32_t> MarkovSource::sample(std::size_t n_tokens, std::uint64_t seed) const {
  Rng rng = named_stream(seed, "corpus.sample");
  std::vector<std::int32_t> out;
  out.reserve(n_tokens);
  const auto v = static_cast<std::int32_t>(vocab_);
  std::uniform_int_distribution<std::int32_t> first(0, v - 1);
  out.push_back(first(rng));
  if (n_tokens > 1) {
    out.push_back(first(rng));
  }
  while (out.size() < n_tokens) {
    const std::vector<double> p = next_distribution(out[out.size() - 2], out.back());
    const double u = uniform01(rng);
    double acc = 0.0;
    std::int32_t c = v - 1;
    for (std::int32_t i = 0; i < v; ++i) {
      acc += p[static_cast<std::size_t>(i)];
      if (u < acc) {
        c = i;
        break;
      }
    }
    out.push_back(c);
  }
  return out;
}

Corpus make_corpus(const CorpusConfig& config, std::uint64_t seed) {
  config.validate();
  const MarkovSource source(config.vocab_size, config.table_seed, config.logit_scale);
  Corpus c;
  c.vocab_size = config.vocab_size;
  c.tokens = source.sample(config.n_tokens, seed);
  const auto held = static_cast<std::size_t>(std::ceil(config.heldout_fraction * static_cast<double>(config.n_tokens)));
  c.train_end = config.n_tokens - held;
  double h = 0.0;
  std::size_t count = 0;
  for (std::size_t i = std::max<std::size_t>(c.train_end, 2); i < c.tokens.size(); ++i) {
    h += source.conditional_entropy(c.tokens[i - 2], c.tokens[i - 1]);
    ++count;
  }
  c.heldout_entropy = count ? h / static_cast<double>(count) : 0.0;
  return c;
}

Windows contiguous_windows(std::span<const std::int32_t> tokens, std::size_t seq_len, std::size_t max_windows) {
  if (seq_len == 0) {
    throw ContractError("contiguous_windows: seq_len must be positive");
  }
  Windows w;
  if (tokens.size() < seq_len + 1) {
    throw InputError("contiguous_windows: need at least " + std::to_string(seq_len + 1) + " tokens, have " +
                     std::to_string(tokens.size()));
  }
  w.count = std::min(max_windows, (tokens.size() - 1) / seq_len);
  w.inputs.reserve(w.count * seq_len);
  w.targets.reserve(w.count * seq_len);
  for (std::size_t i = 0; i < w.count; ++i) {
    const std::size_t s = i * seq_len;
    w.inputs.insert(w.inputs.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s),
                    tokens.begin() + static_cast<std::ptrdiff_t>(s + seq_len));
    w.targets.insert(w.targets.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s + 1),
                     tokens.begin() + static_cast<std::ptrdiff_t>(s + seq_len + 1));
  }
  return w;
}

}  // namespace lft
