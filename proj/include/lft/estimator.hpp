#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lft/tensor.hpp"

namespace lft {

using ParamList = std::vector<std::pair<std::string, Tensor>>;

/// Side information an estimator may attend to. Empty for point clouds; for
/// sequence estimators `context` holds one row per token, grouped into
/// sequences of `seq_len`.
struct FlowContext {
  Tensor context;
  std::size_t seq_len = 0;
};

/// A learned velocity field u(x, t). `t` is a [rows] tensor of per-row times.
class VelocityEstimator {
 public:
  virtual ~VelocityEstimator() = default;
  virtual Tensor velocity(const Tensor& x, const Tensor& t, const FlowContext& ctx) const = 0;
  virtual ParamList named_parameters() const { return {}; }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, p] : named_parameters()) {
      out.push_back(p);
    }
    return out;
  }
};

}  // namespace lft
