#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "lft/tensor.hpp"

namespace lft {

using Rng = std::mt19937_64;

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_str(std::string_view s);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent generator for a named consumer of the global seed. Adding a
/// new purpose never shifts the draws of existing ones.
Rng named_stream(std::uint64_t seed, std::string_view purpose);

double uniform01(Rng& rng);
double normal01(Rng& rng);

/// Tensor with i.i.d. N(0, stddev^2) entries.
Tensor randn(Rng& rng, Shape shape, double stddev = 1.0, bool requires_grad = false);
/// Tensor with i.i.d. Uniform[lo, hi) entries.
Tensor rand_uniform(Rng& rng, Shape shape, double lo = 0.0, double hi = 1.0, bool requires_grad = false);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace lft
