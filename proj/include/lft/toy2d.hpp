#pragma once

// Paired 2-D point sets whose straight interpolants do (or do not) cross,
// plus training/inference runs and trajectory diagnostics on them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "lft/flow.hpp"
#include "lft/nets.hpp"

namespace lft {

enum class ToyKind { CrossingX, ParallelLines, SwappedClusters };

std::string to_string(ToyKind kind);
ToyKind parse_toy_kind(const std::string& s);

struct ToyDataset {
  ToyKind kind = ToyKind::SwappedClusters;
  std::size_t n_pairs = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  Tensor x0;  // [n_pairs, 2]
  Tensor x1;  // [n_pairs, 2]
};

/// CrossingX alternates (0,0)->(1,1) and (0,1)->(1,0). ParallelLines maps
/// (0,y)->(1,y). SwappedClusters sends (0,+1) to (1,-1) and (0,-1) to (1,+1).
/// Each pair is displaced rigidly by one N(0, sigma^2 I) offset.
ToyDataset gen_pairs(ToyKind kind, std::size_t n_pairs, double noise_sigma, std::uint64_t seed);

/// Serves shuffled minibatches of a toy dataset; validation is the full set.
class ToyPairSource : public PairSource {
 public:
  explicit ToyPairSource(const ToyDataset& data);
  PairBatch next(Rng& rng, std::size_t batch_size) override;
  PairBatch validation() const override;

 private:
  const ToyDataset* data_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

using Trajectory = std::vector<std::array<double, 2>>;

/// Per-pair point sequences from the k + 1 states of a walk.
std::vector<Trajectory> to_trajectories(const std::vector<Tensor>& states);

/// Mean over trajectories of path length / chord length - 1. Trajectories
/// with a zero chord are skipped (with a warning on stderr).
double straightness(const std::vector<Trajectory>& trajectories);

/// Fraction of rows of `pred` whose nearest row of `targets` is the same row.
double pair_preservation(const Tensor& pred, const Tensor& targets);

struct TrajectoryDiag {
  std::size_t k_infer = 0;
  double endpoint_nmse = 0.0;
  double pair_preservation = 0.0;
  double straightness = 0.0;
};

TrajectoryDiag diagnose(const VelocityEstimator& est, const ToyDataset& data, std::size_t k_infer, StepRule rule,
                        std::vector<Tensor>* states = nullptr);

struct ToyRunConfig {
  FlowConfig flow;
  VelocityMlpConfig mlp;
  std::vector<std::size_t> k_infer{1, 3, 8};
};

/// Toy defaults: 20000 AdamW steps, batch 128, lr 3e-3 with cosine decay to
/// 3e-5, midpoint steps, per-row walk times, alpha 0.001.
ToyRunConfig default_toy_config(FlowMethod method, std::size_t k_train = 3);

struct ToyRun {
  std::unique_ptr<VelocityMlp> model;
  TrainLog log;
  std::vector<TrajectoryDiag> diags;            // one per k_infer
  std::vector<std::vector<Tensor>> states;      // walk states per k_infer
};

/// Trains a VelocityMlp on the dataset and diagnoses inferred trajectories.
ToyRun run_toy(const ToyRunConfig& config, const ToyDataset& data);

/// `pair_id,step,t,x,y`
void write_trajectory_csv(std::ostream& os, const std::vector<Tensor>& states);
/// `method,k_train,k_infer,endpoint_nmse,pair_preservation,straightness`
void write_diag_header(std::ostream& os);
void write_diag_row(std::ostream& os, const std::string& method, std::size_t k_train, const TrajectoryDiag& d);

}  // namespace lft
