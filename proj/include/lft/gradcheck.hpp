#pragma once

#include <functional>

#include "lft/tensor.hpp"

namespace lft {

/// Relative error of the analytic gradient against central differences in the
/// max norm: max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, 1e-8).
/// `f` must build a fresh recorded scalar from `x` on every call.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Same check against a leaf that `loss` closes over (e.g. a network weight).
/// The leaf's value is perturbed in place and restored; its grad is reset.
double grad_check_param(const std::function<Tensor()>& loss, Tensor& param, double h = 1e-5);

}  // namespace lft
