#include "lft/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "lft/error.hpp"
#include "lft/metrics.hpp"

namespace lft {

namespace {

double grid_time(std::size_t i, std::size_t k) {
  return i == k ? 1.0 : static_cast<double>(i) / static_cast<double>(k);
}

void check_pair(const PairBatch& batch) {
  if (!batch.x0.defined() || !batch.x1.defined() || batch.x0.shape() != batch.x1.shape()) {
    throw DimensionError("pair batch: x0 and x1 must have identical shapes");
  }
}

}  // namespace

std::string to_string(StepRule rule) { return rule == StepRule::Euler ? "euler" : "midpoint"; }

std::string to_string(FlowMethod method) {
  switch (method) {
    case FlowMethod::SFM:
      return "sfm";
    case FlowMethod::FW:
      return "fw";
    case FlowMethod::Hybrid:
      return "hybrid";
  }
  return "?";
}

StepRule parse_step_rule(const std::string& s) {
  if (s == "euler") {
    return StepRule::Euler;
  }
  if (s == "midpoint") {
    return StepRule::Midpoint;
  }
  throw InputError("unknown step rule '" + s + "' (expected euler|midpoint)");
}

FlowMethod parse_flow_method(const std::string& s) {
  if (s == "sfm") {
    return FlowMethod::SFM;
  }
  if (s == "fw") {
    return FlowMethod::FW;
  }
  if (s == "hybrid") {
    return FlowMethod::Hybrid;
  }
  throw InputError("unknown flow method '" + s + "' (expected sfm|fw|hybrid)");
}

std::string to_string(WalkTimes w) { return w == WalkTimes::PerBatch ? "per_batch" : "per_row"; }

WalkTimes parse_walk_times(const std::string& s) {
  if (s == "per_batch") {
    return WalkTimes::PerBatch;
  }
  if (s == "per_row") {
    return WalkTimes::PerRow;
  }
  throw InputError("unknown walk_times '" + s + "' (expected per_batch|per_row)");
}

void FlowConfig::validate() const {
  if (k_train < 1) {
    throw ContractError("flow config: k_train must be >= 1");
  }
  if (!(alpha >= 0.0)) {
    throw ContractError("flow config: alpha must be >= 0");
  }
  if (batch_size == 0) {
    throw ContractError("flow config: batch_size must be positive");
  }
  if (log_every == 0 || eval_k == 0) {
    throw ContractError("flow config: log_every and eval_k must be positive");
  }
  if (!(optim.lr > 0.0) || !(lr_final_fraction >= 0.0 && lr_final_fraction <= 1.0)) {
    throw ContractError("flow config: invalid learning-rate schedule");
  }
}

Interpolant interpolate_linear(const Tensor& x0, const Tensor& x1, const Tensor& t) {
  if (x0.shape() != x1.shape()) {
    throw DimensionError("interpolate_linear: " + shape_str(x0.shape()) + " vs " + shape_str(x1.shape()));
  }
  const std::size_t rows = x0.rows();
  const std::size_t d = x0.cols();
  if (t.numel() != rows) {
    throw DimensionError("interpolate_linear: " + std::to_string(t.numel()) + " times for " +
                         std::to_string(rows) + " rows");
  }
  const auto a = x0.data();
  const auto b = x1.data();
  const auto tv = t.data();
  std::vector<double> xt(a.size());
  std::vector<double> vt(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = tv[r];
    if (!(s >= 0.0 && s <= 1.0)) {
      throw ContractError("interpolate_linear: time outside [0, 1]");
    }
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = r * d + j;
      xt[i] = (1.0 - s) * a[i] + s * b[i];
      vt[i] = b[i] - a[i];
    }
  }
  return {Tensor::from(x0.shape(), std::move(xt)), Tensor::from(x0.shape(), std::move(vt))};
}

Tensor constant_times(std::size_t rows, double t) { return Tensor::full({rows}, t); }

Tensor fm_loss(const VelocityEstimator& est, const PairBatch& batch, const Tensor& t) {
  check_pair(batch);
  const Interpolant path = interpolate_linear(batch.x0, batch.x1, t);
  const Tensor u = est.velocity(path.x_t, t, batch.ctx);
  return scale(sum_squares(sub(u, path.v_t)), 1.0 / static_cast<double>(batch.x0.rows()));
}

Tensor euler_step(const VelocityEstimator& est, const Tensor& x, double t, double t_next, const FlowContext& ctx) {
  if (!(t_next >= t)) {
    throw ContractError("euler_step: t' must not precede t");
  }
  const double d = t_next - t;
  return add(x, scale(est.velocity(x, constant_times(x.rows(), t), ctx), d));
}

Tensor midpoint_step(const VelocityEstimator& est, const Tensor& x, double t, double t_next,
                     const FlowContext& ctx) {
  if (!(t_next >= t)) {
    throw ContractError("midpoint_step: t' must not precede t");
  }
  const double d = t_next - t;
  const std::size_t rows = x.rows();
  const Tensor half = add(x, scale(est.velocity(x, constant_times(rows, t), ctx), d / 2.0));
  return add(x, scale(est.velocity(half, constant_times(rows, t + d / 2.0), ctx), d));
}

Tensor flow_step(const VelocityEstimator& est, const Tensor& x, double t, double t_next, StepRule rule,
                 const FlowContext& ctx) {
  return rule == StepRule::Euler ? euler_step(est, x, t, t_next, ctx) : midpoint_step(est, x, t, t_next, ctx);
}

Tensor fw_loss(const VelocityEstimator& est, const PairBatch& batch, const std::vector<double>& interior,
               StepRule rule) {
  check_pair(batch);
  double prev = 0.0;
  for (double t : interior) {
    if (!(t >= prev && t <= 1.0)) {
      throw ContractError("fw_loss: walk times must be sorted within [0, 1]");
    }
    prev = t;
  }
  Tensor x = batch.x0;
  double t = 0.0;
  for (double t_next : interior) {
    x = flow_step(est, x, t, t_next, rule, batch.ctx);
    t = t_next;
  }
  x = flow_step(est, x, t, 1.0, rule, batch.ctx);
  return scale(sum_squares(sub(x, batch.x1)), 1.0 / static_cast<double>(batch.x0.rows()));
}

Tensor flow_step_rows(const VelocityEstimator& est, const Tensor& x, const Tensor& t, const Tensor& t_next,
                      StepRule rule, const FlowContext& ctx) {
  const std::size_t rows = x.rows();
  const std::size_t d = x.cols();
  if (t.numel() != rows || t_next.numel() != rows) {
    throw DimensionError("flow_step_rows: need one time per row");
  }
  const auto a = t.data();
  const auto b = t_next.data();
  std::vector<double> step(rows * d);
  std::vector<double> half_step(rows * d);
  std::vector<double> mid(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!(b[r] >= a[r])) {
      throw ContractError("flow_step_rows: t' must not precede t");
    }
    const double h = b[r] - a[r];
    mid[r] = a[r] + h / 2.0;
    std::fill_n(step.begin() + static_cast<std::ptrdiff_t>(r * d), d, h);
    std::fill_n(half_step.begin() + static_cast<std::ptrdiff_t>(r * d), d, h / 2.0);
  }
  const Tensor dt = Tensor::from(x.shape(), std::move(step));
  if (rule == StepRule::Euler) {
    return add(x, mul(est.velocity(x, t, ctx), dt));
  }
  const Tensor half = add(x, mul(est.velocity(x, t, ctx), Tensor::from(x.shape(), std::move(half_step))));
  return add(x, mul(est.velocity(half, Tensor::from({rows}, std::move(mid)), ctx), dt));
}

Tensor fw_loss_rows(const VelocityEstimator& est, const PairBatch& batch, const Tensor& interior, StepRule rule) {
  check_pair(batch);
  const std::size_t rows = batch.x0.rows();
  if (interior.rank() != 2 || interior.rows() != rows) {
    throw DimensionError("fw_loss_rows: interior times must be [rows, k - 1], got " + shape_str(interior.shape()));
  }
  const std::size_t n = interior.cols();
  std::vector<Tensor> grid;
  grid.push_back(Tensor::full({rows}, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> col(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double prev = i == 0 ? 0.0 : interior.at(r, i - 1);
      col[r] = interior.at(r, i);
      if (!(col[r] >= prev && col[r] <= 1.0)) {
        throw ContractError("fw_loss_rows: walk times must be sorted within [0, 1]");
      }
    }
    grid.push_back(Tensor::from({rows}, std::move(col)));
  }
  grid.push_back(Tensor::full({rows}, 1.0));
  Tensor x = batch.x0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    x = flow_step_rows(est, x, grid[i], grid[i + 1], rule, batch.ctx);
  }
  return scale(sum_squares(sub(x, batch.x1)), 1.0 / static_cast<double>(rows));
}

Tensor fw_loss(const VelocityEstimator& est, const PairBatch& batch, double t1, double t2, StepRule rule) {
  return fw_loss(est, batch, std::vector<double>{t1, t2}, rule);
}

Tensor hybrid_loss(const VelocityEstimator& est, const PairBatch& batch, double alpha,
                   const std::vector<double>& interior, const Tensor& fm_t, StepRule rule) {
  if (!(alpha >= 0.0)) {
    throw ContractError("hybrid_loss: alpha must be >= 0");
  }
  const Tensor walk = fw_loss(est, batch, interior, rule);
  if (alpha == 0.0) {
    return walk;
  }
  return add(walk, scale(fm_loss(est, batch, fm_t), alpha));
}

Tensor hybrid_loss_rows(const VelocityEstimator& est, const PairBatch& batch, double alpha, const Tensor& interior,
                        const Tensor& fm_t, StepRule rule) {
  if (!(alpha >= 0.0)) {
    throw ContractError("hybrid_loss: alpha must be >= 0");
  }
  const Tensor walk = fw_loss_rows(est, batch, interior, rule);
  if (alpha == 0.0) {
    return walk;
  }
  return add(walk, scale(fm_loss(est, batch, fm_t), alpha));
}

Tensor sample_walk_times_rows(Rng& rng, std::size_t rows, std::size_t k) {
  if (k == 0) {
    throw ContractError("sample_walk_times_rows: k must be >= 1");
  }
  std::vector<double> ts;
  ts.reserve(rows * (k - 1));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<double> row = sample_walk_times(rng, k);
    ts.insert(ts.end(), row.begin(), row.end());
  }
  return Tensor::from({rows, k - 1}, std::move(ts));
}

std::vector<double> sample_walk_times(Rng& rng, std::size_t k) {
  if (k == 0) {
    throw ContractError("sample_walk_times: k must be >= 1");
  }
  std::vector<double> ts(k - 1);
  for (double& t : ts) {
    t = uniform01(rng);
  }
  std::sort(ts.begin(), ts.end());
  return ts;
}

Tensor sample_row_times(Rng& rng, std::size_t rows) {
  std::vector<double> ts(rows);
  for (double& t : ts) {
    t = uniform01(rng);
  }
  return Tensor::from({rows}, std::move(ts));
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "step,loss,val_nmse\n";
  char buf[96];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", r.step, r.loss, r.val_nmse);
    os << buf;
  }
}

TrainLog train(VelocityEstimator& est, PairSource& source, const FlowConfig& config) {
  config.validate();
  TrainLog log;
  if (config.steps == 0) {
    return log;
  }
  AdamW opt(est.parameters(), config.optim);
  Rng batch_rng = named_stream(config.seed, "flow.batches");
  Rng time_rng = named_stream(config.seed, "flow.times");
  const PairBatch val = source.validation();
  double window = 0.0;
  std::size_t window_n = 0;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    double lr = config.optim.lr;
    if (config.lr_final_fraction < 1.0) {
      const double progress = static_cast<double>(step - 1) / static_cast<double>(config.steps);
      const double floor = config.optim.lr * config.lr_final_fraction;
      lr = floor + 0.5 * (config.optim.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
    }
    const PairBatch batch = source.next(batch_rng, config.batch_size);
    Tensor loss;
    switch (config.method) {
      case FlowMethod::SFM:
        loss = fm_loss(est, batch, sample_row_times(time_rng, batch.x0.rows()));
        break;
      case FlowMethod::FW:
        if (config.walk_times == WalkTimes::PerRow && config.k_train > 1) {
          loss = fw_loss_rows(est, batch, sample_walk_times_rows(time_rng, batch.x0.rows(), config.k_train),
                              config.step_rule);
        } else {
          loss = fw_loss(est, batch, sample_walk_times(time_rng, config.k_train), config.step_rule);
        }
        break;
      case FlowMethod::Hybrid:
        if (config.walk_times == WalkTimes::PerRow && config.k_train > 1) {
          const Tensor walk = sample_walk_times_rows(time_rng, batch.x0.rows(), config.k_train);
          const Tensor fm_t = sample_row_times(time_rng, batch.x0.rows());
          loss = hybrid_loss_rows(est, batch, config.alpha, walk, fm_t, config.step_rule);
        } else {
          const auto walk = sample_walk_times(time_rng, config.k_train);
          const Tensor fm_t = sample_row_times(time_rng, batch.x0.rows());
          loss = hybrid_loss(est, batch, config.alpha, walk, fm_t, config.step_rule);
        }
        break;
    }
    const double lv = loss.item();
    if (!std::isfinite(lv)) {
      throw DivergenceError("non-finite training loss", static_cast<long>(step), lr);
    }
    opt.zero_grad();
    loss.backward();
    if (config.grad_clip > 0.0) {
      opt.clip_grad_norm(config.grad_clip);
    }
    opt.step(lr);
    log.step_losses.push_back(lv);
    window += lv;
    ++window_n;
    if (step % config.log_every == 0 || step == config.steps) {
      double val_nmse = 0.0;
      {
        NoGradGuard no_grad;
        val_nmse = nmse(lft_infer(est, val.x0, config.eval_k, config.step_rule, val.ctx), val.x1);
      }
      log.records.push_back({step, window / static_cast<double>(window_n), val_nmse});
      window = 0.0;
      window_n = 0;
    }
  }
  return log;
}

Tensor lft_infer(const VelocityEstimator& est, const Tensor& x0, std::size_t k, StepRule rule,
                 const FlowContext& ctx) {
  if (k == 0) {
    throw ContractError("lft_infer: k must be >= 1");
  }
  Tensor x = x0;
  for (std::size_t i = 0; i < k; ++i) {
    x = flow_step(est, x, grid_time(i, k), grid_time(i + 1, k), rule, ctx);
  }
  return x;
}

std::vector<Tensor> lft_trajectory(const VelocityEstimator& est, const Tensor& x0, std::size_t k, StepRule rule,
                                   const FlowContext& ctx) {
  if (k == 0) {
    throw ContractError("lft_trajectory: k must be >= 1");
  }
  std::vector<Tensor> states{x0};
  for (std::size_t i = 0; i < k; ++i) {
    states.push_back(flow_step(est, states.back(), grid_time(i, k), grid_time(i + 1, k), rule, ctx));
  }
  return states;
}

UnrolledFlow::UnrolledFlow(const VelocityEstimator& est, std::vector<Block> blocks)
    : est_(&est), blocks_(std::move(blocks)) {}

Tensor UnrolledFlow::operator()(const Tensor& x0, const FlowContext& ctx) const {
  Tensor x = x0;
  for (const auto& b : blocks_) {
    x = flow_step(*est_, x, b.t_from, b.t_to, b.rule, ctx);
  }
  return x;
}

std::size_t UnrolledFlow::estimator_calls() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) {
    n += b.rule == StepRule::Euler ? 1 : 2;
  }
  return n;
}

UnrolledFlow unroll_graph(const VelocityEstimator& est, std::size_t k, StepRule rule) {
  if (k == 0) {
    throw ContractError("unroll_graph: k must be >= 1");
  }
  std::vector<UnrolledFlow::Block> blocks;
  for (std::size_t i = 0; i < k; ++i) {
    blocks.push_back({grid_time(i, k), grid_time(i + 1, k), rule});
  }
  return UnrolledFlow(est, std::move(blocks));
}

}  // namespace lft
