#pragma once

// Flow-matching and Flow Walking objectives, step rules, the training loop,
// and fixed-grid inference (plus its unrolled static form).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lft/estimator.hpp"
#include "lft/optim.hpp"
#include "lft/rng.hpp"
#include "lft/tensor.hpp"

namespace lft {

enum class StepRule { Euler, Midpoint };
enum class FlowMethod { SFM, FW, Hybrid };
/// Whether Flow Walking draws one set of interior times per batch or per row.
enum class WalkTimes { PerBatch, PerRow };

std::string to_string(StepRule rule);
std::string to_string(FlowMethod method);
StepRule parse_step_rule(const std::string& s);
FlowMethod parse_flow_method(const std::string& s);
std::string to_string(WalkTimes w);
WalkTimes parse_walk_times(const std::string& s);

/// Row i of x0 is paired with row i of x1.
struct PairBatch {
  Tensor x0;
  Tensor x1;
  FlowContext ctx;
  std::vector<std::size_t> positions;
};

struct FlowConfig {
  FlowMethod method = FlowMethod::FW;
  std::size_t k_train = 3;
  double alpha = 0.001;
  StepRule step_rule = StepRule::Midpoint;
  WalkTimes walk_times = WalkTimes::PerRow;
  std::size_t steps = 1000;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  AdamWHyper optim;
  /// Cosine decay of the learning rate down to lr * lr_final_fraction.
  double lr_final_fraction = 1.0;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  std::size_t log_every = 10;
  /// Inference step count used for the logged validation NMSE.
  std::size_t eval_k = 3;

  void validate() const;
};

struct Interpolant {
  Tensor x_t;
  Tensor v_t;
};

/// x_t = (1 - t) x0 + t x1 and v_t = x1 - x0, with per-row t.
Interpolant interpolate_linear(const Tensor& x0, const Tensor& x1, const Tensor& t);

/// [rows] tensor filled with `t`.
Tensor constant_times(std::size_t rows, double t);

/// Mean over rows of ||u(x_t, t) - v_t||^2 with per-row times `t`.
Tensor fm_loss(const VelocityEstimator& est, const PairBatch& batch, const Tensor& t);

Tensor euler_step(const VelocityEstimator& est, const Tensor& x, double t, double t_next,
                  const FlowContext& ctx = {});
Tensor midpoint_step(const VelocityEstimator& est, const Tensor& x, double t, double t_next,
                     const FlowContext& ctx = {});
Tensor flow_step(const VelocityEstimator& est, const Tensor& x, double t, double t_next, StepRule rule,
                 const FlowContext& ctx = {});

/// Chains steps 0 -> times[0] -> ... -> times.back() -> 1 and returns the mean
/// over rows of ||x_hat_1 - x1||^2. `interior` must be sorted within [0, 1].
Tensor fw_loss(const VelocityEstimator& est, const PairBatch& batch, const std::vector<double>& interior,
               StepRule rule);
/// Per-row walk: row r steps 0 -> interior(r, 0) -> ... -> 1. `interior` is
/// [rows, k - 1] with each row sorted within [0, 1].
Tensor fw_loss_rows(const VelocityEstimator& est, const PairBatch& batch, const Tensor& interior, StepRule rule);
/// One step per row from t[r] to t_next[r].
Tensor flow_step_rows(const VelocityEstimator& est, const Tensor& x, const Tensor& t, const Tensor& t_next,
                      StepRule rule, const FlowContext& ctx = {});
/// Three-step form with interior times t1 <= t2.
Tensor fw_loss(const VelocityEstimator& est, const PairBatch& batch, double t1, double t2, StepRule rule);

/// fw_loss(interior) + alpha * fm_loss(fm_t).
Tensor hybrid_loss(const VelocityEstimator& est, const PairBatch& batch, double alpha,
                   const std::vector<double>& interior, const Tensor& fm_t, StepRule rule);
/// fw_loss_rows(interior) + alpha * fm_loss(fm_t).
Tensor hybrid_loss_rows(const VelocityEstimator& est, const PairBatch& batch, double alpha, const Tensor& interior,
                        const Tensor& fm_t, StepRule rule);

/// k - 1 sorted Uniform[0, 1] interior times for a k-step walk.
std::vector<double> sample_walk_times(Rng& rng, std::size_t k);
/// [rows, k - 1]; each row holds k - 1 sorted Uniform[0, 1] times.
Tensor sample_walk_times_rows(Rng& rng, std::size_t rows, std::size_t k);
/// Per-row Uniform[0, 1] times.
Tensor sample_row_times(Rng& rng, std::size_t rows);

/// Supplies training batches and a fixed validation batch.
class PairSource {
 public:
  virtual ~PairSource() = default;
  virtual PairBatch next(Rng& rng, std::size_t batch_size) = 0;
  virtual PairBatch validation() const = 0;
};

struct TrainRecord {
  std::size_t step;
  double loss;      // mean loss over the logging window
  double val_nmse;  // endpoint NMSE on the validation batch
};

struct TrainLog {
  std::vector<double> step_losses;
  std::vector<TrainRecord> records;

  /// `step,loss,val_nmse`
  void write_csv(std::ostream& os) const;
};

/// Optimizes the estimator's parameters with AdamW on the configured loss.
/// Throws DivergenceError on a non-finite loss.
TrainLog train(VelocityEstimator& est, PairSource& source, const FlowConfig& config);

/// k equal steps from t = 0 to t = 1.
Tensor lft_infer(const VelocityEstimator& est, const Tensor& x0, std::size_t k, StepRule rule,
                 const FlowContext& ctx = {});
/// All k + 1 states of the k-step walk, starting with x0.
std::vector<Tensor> lft_trajectory(const VelocityEstimator& est, const Tensor& x0, std::size_t k, StepRule rule,
                                   const FlowContext& ctx = {});

/// Fixed time grid hardened into a static stack of residual blocks. Each block
/// is x + d * u(...) for one grid interval.
class UnrolledFlow {
 public:
  struct Block {
    double t_from;
    double t_to;
    StepRule rule;
  };

  UnrolledFlow(const VelocityEstimator& est, std::vector<Block> blocks);

  Tensor operator()(const Tensor& x0, const FlowContext& ctx = {}) const;

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t block_count() const { return blocks_.size(); }
  /// Velocity evaluations per forward pass: one per Euler block, two per midpoint block.
  std::size_t estimator_calls() const;

 private:
  const VelocityEstimator* est_;
  std::vector<Block> blocks_;
};

UnrolledFlow unroll_graph(const VelocityEstimator& est, std::size_t k, StepRule rule);

}  // namespace lft
