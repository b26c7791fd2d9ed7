#include "lft/distill.hpp"

#include <algorithm>
#include <numeric>

#include "lft/corpus.hpp"
#include "lft/error.hpp"
#include "lft/rng.hpp"

namespace lft {

namespace {

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> windows, std::size_t seq_len) {
  const std::size_t d = src.cols();
  const auto data = src.data();
  std::vector<double> out;
  out.reserve(windows.size() * seq_len * d);
  for (std::size_t w : windows) {
    const auto first = data.begin() + static_cast<std::ptrdiff_t>(w * seq_len * d);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(seq_len * d));
  }
  return Tensor::from({windows.size() * seq_len, d}, std::move(out));
}

}  // namespace

void ReplacementSpec::validate(std::size_t n_layers) const {
  if (m > n || n >= n_layers) {
    throw InputError("replacement spec (" + std::to_string(m) + ", " + std::to_string(n) +
                     ") must satisfy 0 <= m <= n < " + std::to_string(n_layers));
  }
}

PairBatch LatentPairs::windows(std::span<const std::size_t> ids) const {
  for (std::size_t w : ids) {
    if (w >= n_windows) {
      throw ContractError("LatentPairs: window index out of range");
    }
  }
  PairBatch b;
  b.x0 = gather_rows(x0, ids, seq_len);
  b.x1 = gather_rows(x1, ids, seq_len);
  b.ctx = {b.x0, seq_len};
  for (std::size_t w : ids) {
    for (std::size_t i = 0; i < seq_len; ++i) {
      b.positions.push_back(w * seq_len + i);
    }
  }
  return b;
}

PairBatch LatentPairs::all() const {
  std::vector<std::size_t> ids(n_windows);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return windows(ids);
}

LatentPairs extract_pairs(const MicroTransformer& teacher, std::span<const std::int32_t> tokens,
                          const ReplacementSpec& spec, std::size_t seq_len, std::size_t max_windows) {
  spec.validate(teacher.config().n_layers);
  NoGradGuard no_grad;
  const Windows w = contiguous_windows(tokens, seq_len, max_windows);
  if (w.count == 0) {
    throw InputError("extract_pairs: no complete window");
  }
  const MicroTransformer::Output out = teacher.forward(w.inputs, seq_len);
  LatentPairs p;
  p.spec = spec;
  p.x0 = out.latents[spec.m];
  p.x1 = out.latents[spec.n + 1];
  p.teacher_logits = out.logits;
  p.seq_len = seq_len;
  p.n_windows = w.count;
  p.inputs = w.inputs;
  p.targets = w.targets;
  return p;
}

LatentPairSource::LatentPairSource(const LatentPairs& train, const LatentPairs& validation)
    : train_(&train), val_(&validation), order_(train.n_windows) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();
}

PairBatch LatentPairSource::next(Rng& rng, std::size_t batch_size) {
  const std::size_t n = train_->n_windows;
  const std::size_t want = std::clamp<std::size_t>(batch_size / train_->seq_len, 1, n);
  std::vector<std::size_t> ids;
  while (ids.size() < want) {
    if (cursor_ == n) {
      order_ = permutation(rng, n);
      cursor_ = 0;
    }
    ids.push_back(order_[cursor_++]);
  }
  return train_->windows(ids);
}

PairBatch LatentPairSource::validation() const { return val_->all(); }

RegressionLayer::RegressionLayer(const TransformerLayer& init) : layer_(init.clone()) {}

Tensor RegressionLayer::velocity(const Tensor& x, const Tensor&, const FlowContext& ctx) const {
  return layer_.residual(x, ctx.seq_len ? ctx.seq_len : x.rows());
}

ParamList RegressionLayer::named_parameters() const {
  ParamList out;
  layer_.append_params(out, "regression.layer");
  return out;
}

std::string to_string(StudentKind kind) {
  switch (kind) {
    case StudentKind::Teacher:
      return "teacher";
    case StudentKind::Skip:
      return "skip";
    case StudentKind::Regression:
      return "regression";
    case StudentKind::Flow:
      return "lft";
  }
  return "?";
}

StudentModel StudentModel::teacher(const MicroTransformer& t, const ReplacementSpec& spec) {
  spec.validate(t.config().n_layers);
  return {t, spec, StudentKind::Teacher};
}

StudentModel StudentModel::skip(const MicroTransformer& t, const ReplacementSpec& spec) {
  spec.validate(t.config().n_layers);
  return {t, spec, StudentKind::Skip};
}

StudentModel StudentModel::regression(const MicroTransformer& t, const ReplacementSpec& spec,
                                      std::unique_ptr<RegressionLayer> layer) {
  spec.validate(t.config().n_layers);
  StudentModel s(t, spec, StudentKind::Regression);
  s.regression_ = std::move(layer);
  return s;
}

StudentModel StudentModel::flow(const MicroTransformer& t, const ReplacementSpec& spec,
                                std::unique_ptr<DitVelocityLayer> layer, StepRule rule) {
  spec.validate(t.config().n_layers);
  StudentModel s(t, spec, StudentKind::Flow);
  s.flow_ = std::move(layer);
  s.rule_ = rule;
  return s;
}

Tensor StudentModel::replace(const Tensor& x0, std::size_t seq_len, std::size_t k) const {
  switch (kind_) {
    case StudentKind::Teacher:
      return teacher_->run_layers(x0, spec_.m, spec_.n + 1, seq_len);
    case StudentKind::Skip:
      return x0;
    case StudentKind::Regression:
      return regression_->layer().forward(x0, seq_len);
    case StudentKind::Flow:
      return lft_infer(*flow_, x0, k, rule_, {x0, seq_len});
  }
  throw ContractError("StudentModel: unknown kind");
}

Tensor StudentModel::logits(std::span<const std::int32_t> tokens, std::size_t seq_len, std::size_t k,
                            Tensor* x1_hat) const {
  const Tensor h0 = teacher_->embed(tokens, seq_len);
  const Tensor x0 = teacher_->run_layers(h0, 0, spec_.m, seq_len);
  const Tensor x1 = replace(x0, seq_len, k);
  if (x1_hat) {
    *x1_hat = x1;
  }
  return teacher_->head(teacher_->run_layers(x1, spec_.n + 1, teacher_->config().n_layers, seq_len));
}

std::size_t StudentModel::parameter_count() const {
  const std::size_t total = teacher_->parameter_count();
  const std::size_t per_layer = teacher_->layer(spec_.m).parameter_count();
  const std::size_t r = spec_.replaced();
  switch (kind_) {
    case StudentKind::Teacher:
      return total;
    case StudentKind::Skip:
      return total - r * per_layer;
    case StudentKind::Regression:
      return total - (r - 1) * per_layer;
    case StudentKind::Flow:
      return total - (r - 1) * per_layer + flow_->conditioning_parameter_count();
  }
  return total;
}

void DistillConfig::validate(std::size_t n_layers) const {
  spec.validate(n_layers);
  flow.validate();
  if (seq_len == 0 || budget_tokens < seq_len || eval_windows == 0 || val_windows == 0) {
    throw ContractError("distill config: need seq_len > 0, budget_tokens >= seq_len and positive window counts");
  }
  if (k_infer.empty() || std::find(k_infer.begin(), k_infer.end(), std::size_t{0}) != k_infer.end()) {
    throw ContractError("distill config: k_infer must be a non-empty list of positive step counts");
  }
}

DistillConfig default_distill_config() {
  DistillConfig c;
  c.flow.method = FlowMethod::FW;
  c.flow.k_train = 3;
  c.flow.step_rule = StepRule::Midpoint;
  c.flow.steps = 1500;
  c.flow.batch_size = 512;
  c.flow.optim.lr = 1e-3;
  c.flow.lr_final_fraction = 0.1;
  c.flow.grad_clip = 1.0;
  c.flow.log_every = 50;
  return c;
}

StudentModel train_lft(const MicroTransformer& teacher, const LatentPairs& train, const LatentPairs& val,
                       const DistillConfig& config, TrainLog* log) {
  config.validate(teacher.config().n_layers);
  Rng init = named_stream(config.flow.seed, "distill.cond");
  auto layer = std::make_unique<DitVelocityLayer>(teacher.layer(config.spec.m), init, config.cond_hidden);
  LatentPairSource source(train, val);
  TrainLog l = lft::train(*layer, source, config.flow);
  if (log) {
    *log = std::move(l);
  }
  return StudentModel::flow(teacher, config.spec, std::move(layer), config.flow.step_rule);
}

StudentModel baseline_regression(const MicroTransformer& teacher, const LatentPairs& train, const LatentPairs& val,
                                 const DistillConfig& config, TrainLog* log) {
  config.validate(teacher.config().n_layers);
  auto layer = std::make_unique<RegressionLayer>(teacher.layer(config.spec.m));
  FlowConfig fc = config.flow;
  fc.method = FlowMethod::FW;
  fc.k_train = 1;
  fc.step_rule = StepRule::Euler;
  fc.eval_k = 1;
  LatentPairSource source(train, val);
  TrainLog l = lft::train(*layer, source, fc);
  if (log) {
    *log = std::move(l);
  }
  return StudentModel::regression(teacher, config.spec, std::move(layer));
}

StudentModel baseline_skip(const MicroTransformer& teacher, const ReplacementSpec& spec) {
  return StudentModel::skip(teacher, spec);
}

EvalReport evaluate_at(const StudentModel& student, const LatentPairs& heldout, std::size_t k,
                       const std::string& method) {
  const ReplacementSpec& s = student.spec();
  if (heldout.spec.m != s.m || heldout.spec.n != s.n) {
    throw InputError("evaluate: held-out pairs were extracted for a different replacement spec");
  }
  NoGradGuard no_grad;
  Tensor x1_hat;
  const Tensor logits = student.logits(heldout.inputs, heldout.seq_len, k, &x1_hat);
  EvalReport r;
  r.method = method;
  r.m = s.m;
  r.n = s.n;
  r.k = k;
  r.nmse = nmse(x1_hat, heldout.x1);
  r.kl_latent = latent_kl(heldout.x1, x1_hat, student.base());
  r.kl_lm = kl_categorical(heldout.teacher_logits, logits);
  r.ppl = perplexity(logits, heldout.targets);
  r.n_tokens = heldout.n_tokens();
  return r;
}

std::vector<EvalReport> evaluate(const StudentModel& student, const LatentPairs& heldout,
                                 std::span<const std::size_t> k_list, const std::string& method) {
  std::vector<EvalReport> out;
  if (student.kind() != StudentKind::Flow) {
    out.push_back(evaluate_at(student, heldout, 0, method));
    return out;
  }
  for (std::size_t k : k_list) {
    out.push_back(evaluate_at(student, heldout, k, method));
  }
  return out;
}

}  // namespace lft
