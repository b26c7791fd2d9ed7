#include "lft/toy2d.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <limits>
#include <numeric>
#include <ostream>

#include "lft/error.hpp"
#include "lft/metrics.hpp"

namespace lft {

std::string to_string(ToyKind kind) {
  switch (kind) {
    case ToyKind::CrossingX:
      return "crossing_x";
    case ToyKind::ParallelLines:
      return "parallel_lines";
    case ToyKind::SwappedClusters:
      return "swapped_clusters";
  }
  return "?";
}

ToyKind parse_toy_kind(const std::string& s) {
  if (s == "crossing_x") {
    return ToyKind::CrossingX;
  }
  if (s == "parallel_lines") {
    return ToyKind::ParallelLines;
  }
  if (s == "swapped_clusters") {
    return ToyKind::SwappedClusters;
  }
  throw InputError("unknown toy dataset '" + s + "' (expected crossing_x|parallel_lines|swapped_clusters)");
}

ToyDataset gen_pairs(ToyKind kind, std::size_t n_pairs, double noise_sigma, std::uint64_t seed) {
  if (n_pairs < 2) {
    throw ContractError("gen_pairs: need at least two pairs");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ContractError("gen_pairs: noise_sigma must be non-negative");
  }
  Rng rng = named_stream(seed, "toy2d." + to_string(kind));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> a(n_pairs * 2);
  std::vector<double> b(n_pairs * 2);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    double sx = 0.0, sy = 0.0, tx = 1.0, ty = 0.0;
    switch (kind) {
      case ToyKind::CrossingX:
        sy = i % 2 == 0 ? 0.0 : 1.0;
        ty = 1.0 - sy;
        break;
      case ToyKind::ParallelLines:
        sy = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_pairs);
        ty = sy;
        break;
      case ToyKind::SwappedClusters:
        sy = i % 2 == 0 ? 1.0 : -1.0;
        ty = -sy;
        break;
    }
    const double ex = noise_sigma > 0.0 ? noise_sigma * noise(rng) : 0.0;
    const double ey = noise_sigma > 0.0 ? noise_sigma * noise(rng) : 0.0;
    a[2 * i] = sx + ex;
    a[2 * i + 1] = sy + ey;
    b[2 * i] = tx + ex;
    b[2 * i + 1] = ty + ey;
  }
  ToyDataset d;
  d.kind = kind;
  d.n_pairs = n_pairs;
  d.noise_sigma = noise_sigma;
  d.seed = seed;
  d.x0 = Tensor::from({n_pairs, 2}, std::move(a));
  d.x1 = Tensor::from({n_pairs, 2}, std::move(b));
  return d;
}

ToyPairSource::ToyPairSource(const ToyDataset& data) : data_(&data), order_(data.n_pairs) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();
}

PairBatch ToyPairSource::next(Rng& rng, std::size_t batch_size) {
  const std::size_t n = data_->n_pairs;
  if (batch_size >= n) {
    return validation();
  }
  std::vector<double> a(batch_size * 2);
  std::vector<double> b(batch_size * 2);
  std::vector<std::size_t> picked(batch_size);
  for (std::size_t r = 0; r < batch_size; ++r) {
    if (cursor_ == n) {
      order_ = permutation(rng, n);
      cursor_ = 0;
    }
    const std::size_t i = order_[cursor_++];
    picked[r] = i;
    for (std::size_t j = 0; j < 2; ++j) {
      a[2 * r + j] = data_->x0.at(i, j);
      b[2 * r + j] = data_->x1.at(i, j);
    }
  }
  return {Tensor::from({batch_size, 2}, std::move(a)), Tensor::from({batch_size, 2}, std::move(b)), {},
          std::move(picked)};
}

PairBatch ToyPairSource::validation() const {
  std::vector<std::size_t> all(data_->n_pairs);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {data_->x0, data_->x1, {}, std::move(all)};
}

std::vector<Trajectory> to_trajectories(const std::vector<Tensor>& states) {
  if (states.empty()) {
    return {};
  }
  const std::size_t n = states.front().rows();
  std::vector<Trajectory> out(n);
  for (const auto& s : states) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i].push_back({s.at(i, 0), s.at(i, 1)});
    }
  }
  return out;
}

double straightness(const std::vector<Trajectory>& trajectories) {
  double total = 0.0;
  std::size_t counted = 0;
  std::size_t skipped = 0;
  for (const auto& path : trajectories) {
    if (path.size() < 2) {
      throw ContractError("straightness: each trajectory needs at least two points");
    }
    double length = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
      length += std::hypot(path[i][0] - path[i - 1][0], path[i][1] - path[i - 1][1]);
    }
    const double chord = std::hypot(path.back()[0] - path.front()[0], path.back()[1] - path.front()[1]);
    if (chord == 0.0) {
      ++skipped;
      continue;
    }
    // Rounding can push a straight path marginally below its chord.
    total += std::max(0.0, length / chord - 1.0);
    ++counted;
  }
  if (skipped > 0) {
    std::cerr << "warning: straightness skipped " << skipped << " trajectories with zero chord\n";
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

double pair_preservation(const Tensor& pred, const Tensor& targets) {
  if (pred.shape() != targets.shape() || pred.rank() != 2) {
    throw DimensionError("pair_preservation: " + shape_str(pred.shape()) + " vs " + shape_str(targets.shape()));
  }
  const std::size_t n = pred.rows();
  const std::size_t d = pred.cols();
  const auto p = pred.data();
  const auto t = targets.data();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = p[i * d + c] - t[j * d + c];
        s += diff * diff;
      }
      if (s < best_d) {
        best_d = s;
        best = j;
      }
    }
    kept += best == i ? 1 : 0;
  }
  return static_cast<double>(kept) / static_cast<double>(n);
}

TrajectoryDiag diagnose(const VelocityEstimator& est, const ToyDataset& data, std::size_t k_infer, StepRule rule,
                        std::vector<Tensor>* states) {
  NoGradGuard no_grad;
  std::vector<Tensor> walk = lft_trajectory(est, data.x0, k_infer, rule);
  TrajectoryDiag d;
  d.k_infer = k_infer;
  d.endpoint_nmse = nmse(walk.back(), data.x1);
  d.pair_preservation = pair_preservation(walk.back(), data.x1);
  d.straightness = straightness(to_trajectories(walk));
  if (states) {
    *states = std::move(walk);
  }
  return d;
}

ToyRunConfig default_toy_config(FlowMethod method, std::size_t k_train) {
  ToyRunConfig c;
  c.flow.method = method;
  c.flow.k_train = k_train;
  c.flow.alpha = 0.001;
  c.flow.step_rule = StepRule::Midpoint;
  c.flow.steps = 20000;
  c.flow.batch_size = 128;
  c.flow.optim.lr = 3e-3;
  c.flow.lr_final_fraction = 0.01;
  c.flow.log_every = 100;
  return c;
}

ToyRun run_toy(const ToyRunConfig& config, const ToyDataset& data) {
  config.flow.validate();
  ToyRun run;
  Rng init = named_stream(config.flow.seed, "toy2d.init");
  VelocityMlpConfig mlp = config.mlp;
  mlp.dim = 2;
  run.model = std::make_unique<VelocityMlp>(mlp, init);
  ToyPairSource source(data);
  run.log = train(*run.model, source, config.flow);
  for (std::size_t k : config.k_infer) {
    std::vector<Tensor> states;
    run.diags.push_back(diagnose(*run.model, data, k, config.flow.step_rule, &states));
    run.states.push_back(std::move(states));
  }
  return run;
}

void write_trajectory_csv(std::ostream& os, const std::vector<Tensor>& states) {
  os << "pair_id,step,t,x,y\n";
  if (states.empty()) {
    return;
  }
  const std::size_t k = states.size() - 1;
  const std::size_t n = states.front().rows();
  char buf[128];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s <= k; ++s) {
      const double t = k == 0 ? 0.0 : static_cast<double>(s) / static_cast<double>(k);
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.6g,%.10g,%.10g\n", i, s, t, states[s].at(i, 0), states[s].at(i, 1));
      os << buf;
    }
  }
}

void write_diag_header(std::ostream& os) {
  os << "method,k_train,k_infer,endpoint_nmse,pair_preservation,straightness\n";
}

void write_diag_row(std::ostream& os, const std::string& method, std::size_t k_train, const TrajectoryDiag& d) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.10g,%.10g,%.10g\n", method.c_str(), k_train, d.k_infer,
                d.endpoint_nmse, d.pair_preservation, d.straightness);
  os << buf;
}

}  // namespace lft
