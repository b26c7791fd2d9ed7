#include "lft/rng.hpp"

#include <numeric>

namespace lft {

std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng named_stream(std::uint64_t seed, std::string_view purpose) {
  return Rng(mix64(seed ^ mix64(hash_str(purpose))));
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double normal01(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

Tensor randn(Rng& rng, Shape shape, double stddev, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    x = dist(rng);
  }
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

Tensor rand_uniform(Rng& rng, Shape shape, double lo, double hi, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    x = dist(rng);
  }
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

std::vector<std::size_t> permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(p[i - 1], p[pick(rng)]);
  }
  return p;
}

}  // namespace lft
