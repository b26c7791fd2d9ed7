#include "lft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lft/error.hpp"

namespace lft {

double grad_check_param(const std::function<Tensor()>& loss, Tensor& param, double h) {
  if (!(h > 0.0)) {
    throw ContractError("grad_check: h must be positive");
  }
  if (!param.is_leaf()) {
    throw ContractError("grad_check: probe must be a leaf tensor");
  }
  const bool had_flag = param.requires_grad();
  param.set_requires_grad(true);
  param.zero_grad();
  loss().backward();
  const std::vector<double> analytic(param.grad().begin(), param.grad().end());

  auto values = param.mutable_data();
  std::vector<double> numeric(values.size());
  {
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().item();
      values[i] = saved - h;
      const double down = loss().item();
      values[i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
  }
  // Central differences carry round-off near eps * |loss| / h, which swamps a
  // per-coordinate ratio on entries far below the gradient's own scale.
  double scale = 1e-8;
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
  }
  worst /= scale;
  param.zero_grad();
  param.set_requires_grad(had_flag);
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor probe = x.detach();
  return grad_check_param([&] { return f(probe); }, probe, h);
}

}  // namespace lft
