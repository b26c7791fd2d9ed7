#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lft/tensor.hpp"

namespace lft {

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment buffers for one parameter tensor.
struct AdamWMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamWState {
  std::uint64_t step_count = 0;
  std::vector<AdamWMoments> moments;  // one per tracked parameter
  AdamWHyper hyper;
};

/// One decoupled-weight-decay update of a single parameter buffer.
/// `step` is the 1-based update index used for bias correction.
void adamw_update(std::span<double> param, std::span<const double> grad, AdamWMoments& moments,
                  const AdamWHyper& hyper, std::uint64_t step, double lr);

/// Advances state.step_count by one and updates every parameter from its
/// matching gradient. `lr_override` < 0 means use state.hyper.lr.
void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamWState& state,
                double lr_override = -1.0);

/// Owns the parameter list and moment buffers for a training loop.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWHyper hyper = {});

  /// Applies one update from the parameters' current grad buffers.
  void step(double lr_override = -1.0);
  void zero_grad();

  /// Global L2 norm of all gradients; rescales them in place when above max_norm.
  double clip_grad_norm(double max_norm);

  const std::vector<Tensor>& params() const { return params_; }
  AdamWState& state() { return state_; }
  const AdamWState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamWState state_;
};

}  // namespace lft
