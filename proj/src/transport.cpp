#include "lft/transport.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "lft/error.hpp"
#include "lft/rng.hpp"

namespace lft {

namespace {

// Transport cost ordered lexicographically by (primary, moved): among
// equal-cost matchings fewer non-fixed points win.
struct LexCost {
  double primary;
  long moved;

  LexCost operator+(const LexCost& o) const { return {primary + o.primary, moved + o.moved}; }
  LexCost operator-(const LexCost& o) const { return {primary - o.primary, moved - o.moved}; }
  LexCost& operator+=(const LexCost& o) {
    primary += o.primary;
    moved += o.moved;
    return *this;
  }
  LexCost& operator-=(const LexCost& o) {
    primary -= o.primary;
    moved -= o.moved;
    return *this;
  }
  bool operator<(const LexCost& o) const {
    return primary < o.primary || (primary == o.primary && moved < o.moved);
  }
};

double path_cost(const CostMatrix& c, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    total += c(i, perm[i]);
  }
  return total;
}

}  // namespace

std::string to_string(CostMetric metric) {
  return metric == CostMetric::Euclidean ? "euclidean" : "squared_euclidean";
}

CostMetric parse_cost_metric(const std::string& s) {
  if (s == "euclidean") {
    return CostMetric::Euclidean;
  }
  if (s == "squared_euclidean" || s == "sqeuclidean") {
    return CostMetric::SquaredEuclidean;
  }
  throw InputError("unknown cost metric '" + s + "' (expected squared_euclidean|euclidean)");
}

CostMatrix cost_matrix(const Tensor& src, const Tensor& dst, CostMetric metric) {
  if (src.rank() != 2 || src.shape() != dst.shape()) {
    throw DimensionError("cost_matrix: " + shape_str(src.shape()) + " vs " + shape_str(dst.shape()));
  }
  const std::size_t n = src.dim(0);
  const std::size_t d = src.dim(1);
  const auto a = src.data();
  const auto b = dst.data();
  CostMatrix c;
  c.n = n;
  c.metric = metric;
  c.entries.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[i * d + k] - b[j * d + k];
        s += diff * diff;
      }
      c.entries[i * n + j] = metric == CostMetric::Euclidean ? std::sqrt(s) : s;
    }
  }
  return c;
}

AssignmentPlan ot_assign(const CostMatrix& cost) {
  const std::size_t n = cost.n;
  if (n == 0 || cost.entries.size() != n * n) {
    throw InputError("ot_assign: cost matrix must be non-empty and square");
  }
  for (double v : cost.entries) {
    if (!std::isfinite(v)) {
      throw InputError("ot_assign: non-finite cost entry");
    }
  }
  // Shortest augmenting path with potentials; rows and columns are 1-based,
  // index 0 is the virtual start column.
  const LexCost inf{std::numeric_limits<double>::infinity(), 0};
  std::vector<LexCost> u(n + 1, {0.0, 0}), v(n + 1, {0.0, 0});
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<LexCost> minv(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      LexCost delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) {
          continue;
        }
        const LexCost entry{cost(i0 - 1, j - 1), i0 == j ? 0L : 1L};
        const LexCost cur = entry - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  AssignmentPlan plan;
  plan.perm.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    plan.perm[match[j] - 1] = j - 1;
  }
  plan.total_cost = path_cost(cost, plan.perm);

  // Rounding in the potentials can hide an exact tie with the identity.
  std::vector<std::size_t> identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    identity[i] = i;
  }
  const double identity_cost = path_cost(cost, identity);
  if (identity_cost <= plan.total_cost) {
    plan.perm = std::move(identity);
    plan.total_cost = identity_cost;
  }
  return plan;
}

RecouplingReport recoupling_ratio(const std::vector<std::pair<Tensor, Tensor>>& batches, CostMetric metric) {
  if (batches.empty()) {
    throw InputError("recoupling_ratio: no batches");
  }
  RecouplingReport report;
  report.n_batches = batches.size();
  report.batch_size = batches.front().first.rows();
  double mean_fixed = 0.0;
  for (const auto& [src, dst] : batches) {
    if (src.shape() != dst.shape() || src.rank() != 2) {
      throw DimensionError("recoupling_ratio: batch sides differ: " + shape_str(src.shape()) + " vs " +
                           shape_str(dst.shape()));
    }
    const AssignmentPlan plan = ot_assign(cost_matrix(src, dst, metric));
    std::size_t fixed = 0;
    for (std::size_t i = 0; i < plan.perm.size(); ++i) {
      fixed += plan.perm[i] == i ? 1 : 0;
    }
    const double frac = static_cast<double>(fixed) / static_cast<double>(plan.perm.size());
    report.fixed_fractions.push_back(frac);
    mean_fixed += frac;
  }
  mean_fixed /= static_cast<double>(batches.size());
  report.ratio = 1.0 - mean_fixed;
  return report;
}

RecouplingEntry recoupling_pair(const LatentDump& dump, std::size_t m, std::size_t n, std::size_t o_m,
                                std::size_t n_batches, CostMetric metric, std::uint64_t seed) {
  if (o_m == 0 || o_m > dump.n_tokens) {
    throw InputError("recoupling: O_M = " + std::to_string(o_m) + " exceeds the " +
                     std::to_string(dump.n_tokens) + " available tokens");
  }
  if (m >= dump.n_layers || n >= dump.n_layers) {
    throw InputError("recoupling: layer index out of range");
  }
  if (n_batches == 0) {
    throw InputError("recoupling: need at least one batch");
  }
  const std::size_t usable = std::min(n_batches, dump.n_tokens / o_m);
  RecouplingEntry entry{m, n, 0.0, o_m, usable};
  if (m == n) {
    return entry;
  }
  Rng rng(mix64(seed ^ mix64((static_cast<std::uint64_t>(m) << 32) | static_cast<std::uint64_t>(n))));
  const std::vector<std::size_t> order = permutation(rng, dump.n_tokens);
  std::vector<std::pair<Tensor, Tensor>> batches;
  for (std::size_t b = 0; b < usable; ++b) {
    const std::span<const std::size_t> ids(order.data() + b * o_m, o_m);
    batches.emplace_back(dump.gather(m, ids), dump.gather(n, ids));
  }
  entry.ratio = recoupling_ratio(batches, metric).ratio;
  return entry;
}

std::vector<RecouplingEntry> recoupling_matrix(const LatentDump& dump, std::size_t o_m, std::size_t n_batches,
                                               CostMetric metric, std::uint64_t seed) {
  if (o_m == 0 || o_m > dump.n_tokens) {
    throw InputError("recoupling: O_M = " + std::to_string(o_m) + " exceeds the " +
                     std::to_string(dump.n_tokens) + " available tokens");
  }
  std::vector<RecouplingEntry> out;
  for (std::size_t m = 0; m < dump.n_layers; ++m) {
    for (std::size_t n = m + 1; n < dump.n_layers; ++n) {
      out.push_back(recoupling_pair(dump, m, n, o_m, n_batches, metric, seed));
    }
  }
  return out;
}

void write_recoupling_csv(std::ostream& os, const std::vector<RecouplingEntry>& entries) {
  os << "m,n,ratio,o_m,n_batches\n";
  char buf[128];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.10g,%zu,%zu\n", e.m, e.n, e.ratio, e.o_m, e.n_batches);
    os << buf;
  }
}

}  // namespace lft
