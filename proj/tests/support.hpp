#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include "lft/estimator.hpp"
#include "lft/gradcheck.hpp"
#include "lft/rng.hpp"
#include "lft/tensor.hpp"

namespace lft::test {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) { return max_abs_diff(a.data(), b.data()); }

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

/// Adds N(0, stddev^2) noise to every parameter in place (moves zero-initialized
/// weights off their special point before a gradient check).
inline void jitter(const ParamList& params, Rng& rng, double stddev) {
  for (const auto& [name, p] : params) {
    Tensor t = p;
    for (double& v : t.mutable_data()) {
      v += stddev * normal01(rng);
    }
  }
}

/// Largest |analytic| or |central difference| over the coordinates of `param`.
inline double max_abs_gradient(const std::function<Tensor()>& loss, Tensor& param, double h = 1e-5) {
  param.zero_grad();
  loss().backward();
  double worst = 0.0;
  for (double g : param.grad()) {
    worst = std::max(worst, std::abs(g));
  }
  param.zero_grad();
  NoGradGuard no_grad;
  auto values = param.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss().item();
    values[i] = saved - h;
    const double down = loss().item();
    values[i] = saved;
    worst = std::max(worst, std::abs(up - down) / (2.0 * h));
  }
  return worst;
}

/// Worst relative gradient error over all parameters. A key bias shifts every
/// score of a query row equally, so softmax cancels it and its true gradient
/// is zero; a relative check there only measures round-off, so those
/// parameters contribute their absolute gradient instead.
inline double worst_param_error(const ParamList& params, const std::function<Tensor()>& loss) {
  double worst = 0.0;
  for (const auto& [name, p] : params) {
    Tensor t = p;
    const bool zero_gradient = name.ends_with("attn.k.bias");
    worst = std::max(worst, zero_gradient ? max_abs_gradient(loss, t) : grad_check_param(loss, t));
  }
  return worst;
}

}  // namespace lft::test
