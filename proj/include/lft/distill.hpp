#pragma once

// Replacing a block of teacher layers m..n with one learned operator: latent
// pair extraction, the skip / regression / latent-flow students, and their
// evaluation inside the frozen teacher.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lft/flow.hpp"
#include "lft/metrics.hpp"
#include "lft/nets.hpp"

namespace lft {

/// Layers m..n (inclusive) are replaced.
struct ReplacementSpec {
  std::size_t m = 2;
  std::size_t n = 5;

  void validate(std::size_t n_layers) const;
  std::size_t replaced() const { return n - m + 1; }
};

/// Teacher latents for whole windows: x0 = input of layer m (also the
/// attention context), x1 = output of layer n. Rows are tokens.
struct LatentPairs {
  ReplacementSpec spec;
  Tensor x0;
  Tensor x1;
  Tensor teacher_logits;  // full-teacher next-token logits
  std::size_t seq_len = 0;
  std::size_t n_windows = 0;
  std::vector<std::int32_t> inputs;   // window tokens
  std::vector<std::int32_t> targets;  // next tokens

  std::size_t n_tokens() const { return n_windows * seq_len; }
  /// Rows of the listed windows as a batch with the x0 stream as context.
  PairBatch windows(std::span<const std::size_t> ids) const;
  PairBatch all() const;
};

/// Runs the frozen teacher over up to `max_windows` consecutive windows.
LatentPairs extract_pairs(const MicroTransformer& teacher, std::span<const std::int32_t> tokens,
                          const ReplacementSpec& spec, std::size_t seq_len, std::size_t max_windows);

/// Batches are groups of whole windows; `batch_size` counts tokens and is
/// rounded down to whole windows (at least one).
class LatentPairSource : public PairSource {
 public:
  LatentPairSource(const LatentPairs& train, const LatentPairs& validation);
  PairBatch next(Rng& rng, std::size_t batch_size) override;
  PairBatch validation() const override;

 private:
  const LatentPairs* train_;
  const LatentPairs* val_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Time-independent single layer used by the regression baseline. Its
/// velocity is the layer's residual branch, so one Euler step from t = 0 to
/// 1 is exactly layer(x0) and Flow Walking with k = 1 is plain MSE regression.
class RegressionLayer : public VelocityEstimator {
 public:
  explicit RegressionLayer(const TransformerLayer& init);
  Tensor velocity(const Tensor& x, const Tensor& t, const FlowContext& ctx) const override;
  ParamList named_parameters() const override;
  const TransformerLayer& layer() const { return layer_; }

 private:
  TransformerLayer layer_;
};

enum class StudentKind { Teacher, Skip, Regression, Flow };

std::string to_string(StudentKind kind);

/// The teacher with layers m..n swapped for a replacement operator.
class StudentModel {
 public:
  /// Keeps the true teacher layers m..n: reproduces the teacher exactly.
  static StudentModel teacher(const MicroTransformer& t, const ReplacementSpec& spec);
  static StudentModel skip(const MicroTransformer& t, const ReplacementSpec& spec);
  static StudentModel regression(const MicroTransformer& t, const ReplacementSpec& spec,
                                 std::unique_ptr<RegressionLayer> layer);
  static StudentModel flow(const MicroTransformer& t, const ReplacementSpec& spec,
                           std::unique_ptr<DitVelocityLayer> layer, StepRule rule);

  /// x1_hat for the block; `k` is only used by flow students.
  Tensor replace(const Tensor& x0, std::size_t seq_len, std::size_t k) const;
  /// Next-token logits with the block replaced; optionally returns x1_hat.
  Tensor logits(std::span<const std::int32_t> tokens, std::size_t seq_len, std::size_t k,
                Tensor* x1_hat = nullptr) const;

  /// teacher - (replaced - 1) * per_layer + conditioning for flow students;
  /// skip removes all replaced layers, regression keeps one plain layer.
  std::size_t parameter_count() const;

  StudentKind kind() const { return kind_; }
  const ReplacementSpec& spec() const { return spec_; }
  const MicroTransformer& base() const { return *teacher_; }
  const DitVelocityLayer* flow_layer() const { return flow_.get(); }
  const RegressionLayer* regression_layer() const { return regression_.get(); }
  StepRule step_rule() const { return rule_; }

 private:
  StudentModel(const MicroTransformer& t, const ReplacementSpec& spec, StudentKind kind)
      : teacher_(&t), spec_(spec), kind_(kind) {}

  const MicroTransformer* teacher_;
  ReplacementSpec spec_;
  StudentKind kind_;
  std::shared_ptr<RegressionLayer> regression_;
  std::shared_ptr<DitVelocityLayer> flow_;
  StepRule rule_ = StepRule::Midpoint;
};

struct DistillConfig {
  ReplacementSpec spec;
  std::size_t seq_len = 64;
  /// Training pairs, i.e. teacher tokens (rounded down to whole windows).
  std::size_t budget_tokens = 51200;
  /// Held-out windows for validation logging and evaluation.
  std::size_t eval_windows = 32;
  std::size_t val_windows = 8;
  FlowConfig flow;
  std::size_t cond_hidden = 64;
  std::vector<std::size_t> k_infer{1, 2, 3, 4, 8};

  void validate(std::size_t n_layers) const;
};

/// Distillation defaults: FW k = 3, 1500 AdamW steps of 512 tokens,
/// lr 1e-3 decayed to 10%.
DistillConfig default_distill_config();

/// Trains a DiT velocity layer (initialized from teacher layer m) with the
/// configured flow method.
StudentModel train_lft(const MicroTransformer& teacher, const LatentPairs& train, const LatentPairs& val,
                       const DistillConfig& config, TrainLog* log = nullptr);

/// Trains one unmodulated layer (initialized from teacher layer m) on
/// ||layer(x0) - x1||^2 with the same optimizer budget as train_lft.
StudentModel baseline_regression(const MicroTransformer& teacher, const LatentPairs& train, const LatentPairs& val,
                                 const DistillConfig& config, TrainLog* log = nullptr);

StudentModel baseline_skip(const MicroTransformer& teacher, const ReplacementSpec& spec);

/// Metrics of the student against the teacher on held-out windows.
EvalReport evaluate_at(const StudentModel& student, const LatentPairs& heldout, std::size_t k,
                       const std::string& method);
/// One report per k; students without a flow layer get a single report with k = 0.
std::vector<EvalReport> evaluate(const StudentModel& student, const LatentPairs& heldout,
                                 std::span<const std::size_t> k_list, const std::string& method);

}  // namespace lft
