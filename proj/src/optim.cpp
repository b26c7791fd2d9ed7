#include "lft/optim.hpp"

#include <cmath>

#include "lft/error.hpp"

namespace lft {

void adamw_update(std::span<double> param, std::span<const double> grad, AdamWMoments& moments,
                  const AdamWHyper& hyper, std::uint64_t step, double lr) {
  if (grad.size() != param.size()) {
    throw DimensionError("adamw: gradient size " + std::to_string(grad.size()) + " vs parameter size " +
                         std::to_string(param.size()));
  }
  if (moments.m.empty() && moments.v.empty()) {
    moments.m.assign(param.size(), 0.0);
    moments.v.assign(param.size(), 0.0);
  }
  if (moments.m.size() != param.size() || moments.v.size() != param.size()) {
    throw DimensionError("adamw: moment buffers do not match parameter size");
  }
  if (step == 0) {
    throw ContractError("adamw: step index is 1-based");
  }
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  const double decay = 1.0 - lr * hyper.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = hyper.beta1 * moments.m[i] + (1.0 - hyper.beta1) * g;
    moments.v[i] = hyper.beta2 * moments.v[i] + (1.0 - hyper.beta2) * g * g;
    const double mhat = moments.m[i] / bc1;
    const double vhat = moments.v[i] / bc2;
    param[i] = param[i] * decay - lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

void adamw_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamWState& state,
                double lr_override) {
  if (params.size() != grads.size()) {
    throw DimensionError("adamw_step: parameter/gradient count mismatch");
  }
  if (state.moments.empty()) {
    state.moments.resize(params.size());
  }
  if (state.moments.size() != params.size()) {
    throw DimensionError("adamw_step: state tracks a different parameter count");
  }
  const double lr = lr_override >= 0.0 ? lr_override : state.hyper.lr;
  ++state.step_count;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adamw_update(params[i].mutable_data(), grads[i], state.moments[i], state.hyper, state.step_count, lr);
  }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWHyper hyper) : params_(std::move(params)) {
  state_.hyper = hyper;
  state_.moments.resize(params_.size());
}

void AdamW::step(double lr_override) {
  const double lr = lr_override >= 0.0 ? lr_override : state_.hyper.lr;
  ++state_.step_count;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    std::span<const double> g = p.mutable_grad();
    adamw_update(p.mutable_data(), g, state_.moments[i], state_.hyper, state_.step_count, lr);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) {
    p.zero_grad();
  }
}

double AdamW::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (auto& p : params_) {
    for (double g : p.mutable_grad()) {
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& p : params_) {
      for (double& g : p.mutable_grad()) {
        g *= s;
      }
    }
  }
  return norm;
}

}  // namespace lft
