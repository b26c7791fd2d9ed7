#pragma once

// Exact optimal-transport assignment between equally sized point sets and the
// recoupling ratio: the fraction of an original pairing that the optimal
// matching disagrees with.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "lft/io.hpp"
#include "lft/tensor.hpp"

namespace lft {

enum class CostMetric { SquaredEuclidean, Euclidean };

std::string to_string(CostMetric metric);
CostMetric parse_cost_metric(const std::string& s);

struct CostMatrix {
  std::size_t n = 0;
  std::vector<double> entries;  // row-major [n, n]
  CostMetric metric = CostMetric::SquaredEuclidean;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
};

/// C[i][j] = metric(src[i], dst[j]).
CostMatrix cost_matrix(const Tensor& src, const Tensor& dst, CostMetric metric = CostMetric::SquaredEuclidean);

struct AssignmentPlan {
  std::vector<std::size_t> perm;  // perm[i] = target matched to source i
  double total_cost = 0.0;        // sum_i C[i][perm[i]] in index order
};

/// Minimum-cost perfect matching (Hungarian, O(N^3)). Among optimal matchings
/// the one with the most fixed points is preferred; remaining ties resolve to
/// the lowest source then lowest target index.
AssignmentPlan ot_assign(const CostMatrix& cost);

struct RecouplingReport {
  double ratio = 0.0;
  std::size_t batch_size = 0;
  std::size_t n_batches = 0;
  std::vector<double> fixed_fractions;  // Tr(M) / O_M per batch
};

/// R = 1 - mean over batches of (fixed points of the optimal matching) / O_M.
RecouplingReport recoupling_ratio(const std::vector<std::pair<Tensor, Tensor>>& batches,
                                  CostMetric metric = CostMetric::SquaredEuclidean);

struct RecouplingEntry {
  std::size_t m = 0;
  std::size_t n = 0;
  double ratio = 0.0;
  std::size_t o_m = 0;
  std::size_t n_batches = 0;
};

/// R for every latent pair m < n of the dump, from `n_batches` disjoint token
/// batches of size `o_m` sampled with seed ^ hash(m, n).
std::vector<RecouplingEntry> recoupling_matrix(const LatentDump& dump, std::size_t o_m = 256,
                                               std::size_t n_batches = 8,
                                               CostMetric metric = CostMetric::SquaredEuclidean,
                                               std::uint64_t seed = 0);

/// R for one latent pair; m == n yields 0.
RecouplingEntry recoupling_pair(const LatentDump& dump, std::size_t m, std::size_t n, std::size_t o_m,
                                std::size_t n_batches, CostMetric metric, std::uint64_t seed);

/// `m,n,ratio,o_m,n_batches`
void write_recoupling_csv(std::ostream& os, const std::vector<RecouplingEntry>& entries);

}  // namespace lft
