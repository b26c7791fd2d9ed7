#include "lft/teacher.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

#include "lft/error.hpp"
#include "lft/io.hpp"
#include "lft/metrics.hpp"
#include "lft/rng.hpp"

namespace lft {

namespace {

double scheduled_lr(const TeacherConfig& c, std::size_t step) {
  const double base = c.optim.lr;
  if (step <= c.warmup) {
    return base * static_cast<double>(step) / static_cast<double>(c.warmup);
  }
  const double span = static_cast<double>(c.steps - std::min(c.warmup, c.steps));
  const double progress = span > 0.0 ? static_cast<double>(step - 1 - c.warmup) / span : 1.0;
  const double floor = base * c.lr_final_fraction;
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

std::size_t meta_value(const ParamList& params, const std::string& name) {
  const Tensor& t = find_param(params, name);
  if (t.numel() != 1) {
    throw InputError("teacher checkpoint: " + name + " must hold one value");
  }
  return static_cast<std::size_t>(t.item());
}

bool has_param(const ParamList& params, const std::string& name) {
  for (const auto& entry : params) {
    if (entry.first == name) {
      return true;
    }
  }
  return false;
}

}  // namespace

void TeacherConfig::validate() const {
  if (batch_seqs == 0 || seq_len == 0 || log_every == 0 || eval_windows == 0) {
    throw ContractError("teacher config: batch_seqs, seq_len, log_every and eval_windows must be positive");
  }
  if (seq_len > model.context) {
    throw ContractError("teacher config: seq_len exceeds the model context");
  }
  if (model.n_heads == 0 || model.d_model % model.n_heads != 0) {
    throw ContractError("teacher config: d_model must be divisible by n_heads");
  }
  if (!(optim.lr > 0.0) || !(lr_final_fraction >= 0.0 && lr_final_fraction <= 1.0)) {
    throw ContractError("teacher config: invalid learning-rate schedule");
  }
}

Teacher init_teacher(const TeacherConfig& config) {
  config.validate();
  Rng rng = named_stream(config.seed, "teacher.init");
  Teacher t;
  t.model = std::make_unique<MicroTransformer>(config.model, rng);
  t.optim.hyper = config.optim;
  return t;
}

void TeacherLog::write_csv(std::ostream& os) const {
  os << "step,loss,val_ppl\n";
  char buf[96];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", r.step, r.loss, r.val_ppl);
    os << buf;
  }
}

TeacherLog train_teacher(Teacher& teacher, const Corpus& corpus, const TeacherConfig& config) {
  config.validate();
  if (corpus.vocab_size != config.model.vocab_size) {
    throw InputError("teacher: corpus vocabulary " + std::to_string(corpus.vocab_size) +
                     " differs from model vocabulary " + std::to_string(config.model.vocab_size));
  }
  const auto train = corpus.train();
  if (train.size() < config.seq_len + 2) {
    throw InputError("teacher: training split too short for one window");
  }
  const std::size_t S = config.seq_len;
  AdamW opt(teacher.model->parameters(), config.optim);
  if (!teacher.optim.moments.empty()) {
    if (teacher.optim.moments.size() != opt.params().size()) {
      throw InputError("teacher: optimizer state does not match the model");
    }
    opt.state().moments = teacher.optim.moments;
    opt.state().step_count = teacher.optim.step_count;
  }
  const std::uint64_t batch_base = mix64(config.seed ^ hash_str("teacher.batches"));
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - S - 1);
  TeacherLog log;
  double window = 0.0;
  std::size_t window_n = 0;
  std::vector<std::int32_t> inputs(config.batch_seqs * S);
  std::vector<std::int32_t> targets(config.batch_seqs * S);
  for (std::size_t step = teacher.step + 1; step <= config.steps; ++step) {
    Rng rng(mix64(batch_base ^ step));
    for (std::size_t b = 0; b < config.batch_seqs; ++b) {
      const std::size_t s = pick(rng);
      for (std::size_t i = 0; i < S; ++i) {
        inputs[b * S + i] = train[s + i];
        targets[b * S + i] = train[s + i + 1];
      }
    }
    const double lr = scheduled_lr(config, step);
    const Tensor logits = teacher.model->forward(inputs, S).logits;
    const Tensor loss = cross_entropy(logits, targets);
    const double lv = loss.item();
    if (!std::isfinite(lv)) {
      throw DivergenceError("non-finite teacher loss", static_cast<long>(step), lr);
    }
    opt.zero_grad();
    loss.backward();
    if (config.grad_clip > 0.0) {
      opt.clip_grad_norm(config.grad_clip);
    }
    opt.step(lr);
    teacher.step = step;
    window += lv;
    ++window_n;
    if (step % config.log_every == 0 || step == config.steps) {
      const double ppl = heldout_perplexity(*teacher.model, corpus.heldout(), S, config.eval_windows);
      log.records.push_back({step, window / static_cast<double>(window_n), ppl});
      window = 0.0;
      window_n = 0;
    }
  }
  teacher.optim = opt.state();
  return log;
}

double heldout_perplexity(const MicroTransformer& model, std::span<const std::int32_t> tokens, std::size_t seq_len,
                          std::size_t max_windows) {
  NoGradGuard no_grad;
  const Windows w = contiguous_windows(tokens, seq_len, max_windows);
  return perplexity(model.forward(w.inputs, seq_len).logits, w.targets);
}

void save_teacher(const std::filesystem::path& path, const Teacher& teacher) {
  ParamList params = teacher.model->named_parameters();
  const std::size_t n_model = params.size();
  params.emplace_back("meta.step", Tensor::scalar(static_cast<double>(teacher.step)));
  params.emplace_back("meta.n_heads", Tensor::scalar(static_cast<double>(teacher.model->config().n_heads)));
  params.emplace_back("meta.optim_step", Tensor::scalar(static_cast<double>(teacher.optim.step_count)));
  if (teacher.optim.moments.size() == n_model) {
    for (std::size_t i = 0; i < n_model; ++i) {
      const Shape& shape = params[i].second.shape();
      const std::string& name = params[i].first;
      params.emplace_back("optim.m." + name, Tensor::from(shape, teacher.optim.moments[i].m));
      params.emplace_back("optim.v." + name, Tensor::from(shape, teacher.optim.moments[i].v));
    }
  }
  save_checkpoint(path, params);
}

Teacher load_teacher(const std::filesystem::path& path) {
  const ParamList params = load_checkpoint(path);
  MicroConfig mc;
  const Tensor& tok = find_param(params, "embed.tok");
  const Tensor& pos = find_param(params, "embed.pos");
  if (tok.rank() != 2 || pos.rank() != 2) {
    throw InputError("teacher checkpoint: embeddings must be matrices");
  }
  mc.vocab_size = tok.dim(0);
  mc.d_model = tok.dim(1);
  mc.context = pos.dim(0);
  mc.n_layers = 0;
  while (has_param(params, "layers." + std::to_string(mc.n_layers) + ".ln1.gamma")) {
    ++mc.n_layers;
  }
  if (mc.n_layers == 0) {
    throw InputError("teacher checkpoint: no layers found");
  }
  mc.d_ff = find_param(params, "layers.0.mlp.fc1.weight").dim(1);
  mc.n_heads = meta_value(params, "meta.n_heads");
  Rng rng(0);
  Teacher t;
  t.model = std::make_unique<MicroTransformer>(mc, rng);
  const ParamList target = t.model->named_parameters();
  assign_params(target, params);
  t.step = meta_value(params, "meta.step");
  t.optim.step_count = meta_value(params, "meta.optim_step");
  bool has_moments = true;
  for (const auto& [name, p] : target) {
    has_moments = has_moments && has_param(params, "optim.m." + name);
  }
  if (has_moments) {
    for (const auto& [name, p] : target) {
      const auto m = find_param(params, "optim.m." + name).data();
      const auto v = find_param(params, "optim.v." + name).data();
      t.optim.moments.push_back({{m.begin(), m.end()}, {v.begin(), v.end()}});
    }
  }
  return t;
}

}  // namespace lft
