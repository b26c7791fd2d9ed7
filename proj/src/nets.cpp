#include "lft/nets.hpp"

#include <cmath>
#include <map>

#include "lft/error.hpp"

namespace lft {

Linear Linear::init(Rng& rng, std::size_t in, std::size_t out, double stddev) {
  return {randn(rng, {in, out}, stddev, true), Tensor::zeros({out}, true)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

void Linear::append_params(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor time_features(const Tensor& t, std::size_t n_freqs, double max_freq) {
  if (n_freqs == 0) {
    throw ContractError("time_features: need at least one frequency");
  }
  const auto tv = t.data();
  const std::size_t rows = tv.size();
  std::vector<double> freqs(n_freqs, 1.0);
  for (std::size_t i = 0; i < n_freqs && n_freqs > 1; ++i) {
    freqs[i] = std::pow(max_freq, static_cast<double>(i) / static_cast<double>(n_freqs - 1));
  }
  std::vector<double> out(rows * 2 * n_freqs);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < n_freqs; ++i) {
      out[r * 2 * n_freqs + 2 * i] = std::sin(freqs[i] * tv[r]);
      out[r * 2 * n_freqs + 2 * i + 1] = std::cos(freqs[i] * tv[r]);
    }
  }
  return Tensor::from({rows, 2 * n_freqs}, std::move(out));
}

// ---------------------------------------------------------------------------
// VelocityMlp

VelocityMlp::VelocityMlp(const VelocityMlpConfig& config, Rng& rng) : config_(config) {
  if (config.dim == 0 || config.hidden == 0 || config.n_hidden_layers == 0) {
    throw ContractError("VelocityMlp: dimensions must be positive");
  }
  std::size_t in = config.dim + 2 * config.time_freqs;
  for (std::size_t i = 0; i < config.n_hidden_layers; ++i) {
    layers_.push_back(Linear::init(rng, in, config.hidden, 1.0 / std::sqrt(static_cast<double>(in))));
    in = config.hidden;
  }
  if (config.zero_init_output) {
    layers_.push_back(Linear::zeros(in, config.dim));
  } else {
    layers_.push_back(Linear::init(rng, in, config.dim, 1.0 / std::sqrt(static_cast<double>(in))));
  }
}

Tensor VelocityMlp::forward(const Tensor& x, const Tensor& t) const {
  if (x.rank() != 2 || x.dim(1) != config_.dim) {
    throw DimensionError("VelocityMlp: expected [B, " + std::to_string(config_.dim) + "], got " +
                         shape_str(x.shape()));
  }
  if (t.numel() != x.dim(0)) {
    throw DimensionError("VelocityMlp: " + std::to_string(t.numel()) + " times for " +
                         std::to_string(x.dim(0)) + " rows");
  }
  for (double tv : t.data()) {
    if (!(tv >= 0.0 && tv <= 1.0)) {
      throw ContractError("VelocityMlp: time " + std::to_string(tv) + " outside [0, 1]");
    }
  }
  Tensor h = concat_cols({x, time_features(t, config_.time_freqs)});
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = silu(layers_[i](h));
  }
  return layers_.back()(h);
}

ParamList VelocityMlp::named_parameters() const {
  ParamList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].append_params(out, "mlp." + std::to_string(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TransformerLayer

TransformerLayer TransformerLayer::init(Rng& rng, std::size_t d_model, std::size_t n_heads, std::size_t d_ff,
                                        std::size_t n_layers_total) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("TransformerLayer: d_model must be divisible by n_heads");
  }
  TransformerLayer l;
  l.n_heads = n_heads;
  l.ln1_g = Tensor::full({d_model}, 1.0, true);
  l.ln1_b = Tensor::zeros({d_model}, true);
  l.ln2_g = Tensor::full({d_model}, 1.0, true);
  l.ln2_b = Tensor::zeros({d_model}, true);
  const double s_in = 1.0 / std::sqrt(static_cast<double>(d_model));
  const double s_out = 1.0 / std::sqrt(2.0 * static_cast<double>(n_layers_total));
  l.q = Linear::init(rng, d_model, d_model, s_in);
  l.k = Linear::init(rng, d_model, d_model, s_in);
  l.v = Linear::init(rng, d_model, d_model, s_in);
  l.o = Linear::init(rng, d_model, d_model, s_in * s_out);
  l.fc1 = Linear::init(rng, d_model, d_ff, s_in);
  l.fc2 = Linear::init(rng, d_ff, d_model, s_out / std::sqrt(static_cast<double>(d_ff)));
  return l;
}

Tensor TransformerLayer::residual(const Tensor& h, std::size_t seq_len) const {
  const Tensor a = layer_norm(h, ln1_g, ln1_b, ln_eps);
  const Tensor attn = o(causal_attention(q(a), k(a), v(a), n_heads, seq_len));
  const Tensor mlp = fc2(gelu(fc1(layer_norm(h, ln2_g, ln2_b, ln_eps))));
  return add(attn, mlp);
}

Tensor TransformerLayer::forward(const Tensor& h, std::size_t seq_len) const {
  const Tensor a = layer_norm(h, ln1_g, ln1_b, ln_eps);
  const Tensor attn = o(causal_attention(q(a), k(a), v(a), n_heads, seq_len));
  const Tensor mlp = fc2(gelu(fc1(layer_norm(h, ln2_g, ln2_b, ln_eps))));
  return add(add(h, attn), mlp);
}

TransformerLayer TransformerLayer::clone() const {
  TransformerLayer c;
  c.ln1_g = ln1_g.detach();
  c.ln1_b = ln1_b.detach();
  c.ln2_g = ln2_g.detach();
  c.ln2_b = ln2_b.detach();
  c.q = q.clone();
  c.k = k.clone();
  c.v = v.clone();
  c.o = o.clone();
  c.fc1 = fc1.clone();
  c.fc2 = fc2.clone();
  c.n_heads = n_heads;
  c.ln_eps = ln_eps;
  ParamList ps;
  c.append_params(ps, "");
  for (auto& [name, p] : ps) {
    p.set_requires_grad(true);
  }
  return c;
}

void TransformerLayer::append_params(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".ln1.gamma", ln1_g);
  out.emplace_back(prefix + ".ln1.beta", ln1_b);
  out.emplace_back(prefix + ".ln2.gamma", ln2_g);
  out.emplace_back(prefix + ".ln2.beta", ln2_b);
  q.append_params(out, prefix + ".attn.q");
  k.append_params(out, prefix + ".attn.k");
  v.append_params(out, prefix + ".attn.v");
  o.append_params(out, prefix + ".attn.o");
  fc1.append_params(out, prefix + ".mlp.fc1");
  fc2.append_params(out, prefix + ".mlp.fc2");
}

std::size_t TransformerLayer::parameter_count() const {
  ParamList ps;
  append_params(ps, "");
  return count_params(ps);
}

// ---------------------------------------------------------------------------
// DitVelocityLayer

Modulation Modulation::identity(std::size_t rows, std::size_t d) {
  return {Tensor::zeros({rows, d}), Tensor::full({rows, d}, 1.0), Tensor::full({rows, d}, 1.0),
          Tensor::zeros({rows, d}), Tensor::full({rows, d}, 1.0), Tensor::full({rows, d}, 1.0)};
}

DitVelocityLayer::DitVelocityLayer(const TransformerLayer& teacher_layer, Rng& rng, std::size_t cond_hidden,
                                   std::size_t time_freqs)
    : layer_(teacher_layer.clone()), time_freqs_(time_freqs) {
  const std::size_t n_feat = 2 * time_freqs;
  cond_in_ = Linear::init(rng, n_feat, cond_hidden, 1.0 / std::sqrt(static_cast<double>(n_feat)));
  cond_out_ = Linear::zeros(cond_hidden, 6 * layer_.d_model());
}

Modulation DitVelocityLayer::modulation(const Tensor& t) const {
  const std::size_t d = layer_.d_model();
  for (double tv : t.data()) {
    if (!(tv >= 0.0 && tv <= 1.0)) {
      throw ContractError("DitVelocityLayer: time " + std::to_string(tv) + " outside [0, 1]");
    }
  }
  const Tensor raw = cond_out_(silu(cond_in_(time_features(t, time_freqs_))));
  return {slice_cols(raw, 0, d),
          add_scalar(slice_cols(raw, d, d), 1.0),
          add_scalar(slice_cols(raw, 2 * d, d), 1.0),
          slice_cols(raw, 3 * d, d),
          add_scalar(slice_cols(raw, 4 * d, d), 1.0),
          add_scalar(slice_cols(raw, 5 * d, d), 1.0)};
}

Tensor DitVelocityLayer::block(const Tensor& x, const Tensor& context, const Modulation& mod,
                               std::size_t seq_len) const {
  const Tensor& ctx = context.defined() ? context : x;
  if (ctx.shape() != x.shape()) {
    throw DimensionError("DitVelocityLayer: x " + shape_str(x.shape()) + " vs context " +
                         shape_str(ctx.shape()));
  }
  const auto& L = layer_;
  const Tensor ax = add(mul(layer_norm(x, L.ln1_g, L.ln1_b, L.ln_eps), mod.scale_attn), mod.shift_attn);
  const Tensor ac = add(mul(layer_norm(ctx, L.ln1_g, L.ln1_b, L.ln_eps), mod.scale_attn), mod.shift_attn);
  const Tensor attn = L.o(causal_attention(L.q(ax), L.k(ac), L.v(ac), L.n_heads, seq_len));
  const Tensor am = add(mul(layer_norm(x, L.ln2_g, L.ln2_b, L.ln_eps), mod.scale_mlp), mod.shift_mlp);
  const Tensor mlp = L.fc2(gelu(L.fc1(am)));
  return add(add(x, mul(mod.gate_attn, attn)), mul(mod.gate_mlp, mlp));
}

Tensor DitVelocityLayer::velocity_with(const Tensor& x, const Tensor& context, const Modulation& mod,
                                       std::size_t seq_len) const {
  return sub(block(x, context, mod, seq_len), x);
}

Tensor DitVelocityLayer::velocity(const Tensor& x, const Tensor& t, const FlowContext& ctx) const {
  if (t.numel() != x.rows()) {
    throw DimensionError("DitVelocityLayer: " + std::to_string(t.numel()) + " times for " +
                         std::to_string(x.rows()) + " rows");
  }
  const std::size_t seq_len = ctx.seq_len ? ctx.seq_len : x.rows();
  return velocity_with(x, ctx.context, modulation(t), seq_len);
}

ParamList DitVelocityLayer::named_parameters() const {
  ParamList out;
  layer_.append_params(out, "flow.layer");
  cond_in_.append_params(out, "flow.cond.in");
  cond_out_.append_params(out, "flow.cond.out");
  return out;
}

std::size_t DitVelocityLayer::parameter_count() const { return count_params(named_parameters()); }

std::size_t DitVelocityLayer::conditioning_parameter_count() const {
  ParamList ps;
  cond_in_.append_params(ps, "in");
  cond_out_.append_params(ps, "out");
  return count_params(ps);
}

// ---------------------------------------------------------------------------
// MicroTransformer

MicroTransformer::MicroTransformer(const MicroConfig& config, Rng& rng) : config_(config) {
  if (config.vocab_size == 0 || config.d_model == 0 || config.n_layers == 0 || config.context == 0) {
    throw ContractError("MicroTransformer: dimensions must be positive");
  }
  tok_emb_ = randn(rng, {config.vocab_size, config.d_model}, 1.0, true);
  pos_emb_ = randn(rng, {config.context, config.d_model}, 0.1, true);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    layers_.push_back(TransformerLayer::init(rng, config.d_model, config.n_heads, config.d_ff, config.n_layers));
  }
  lnf_g_ = Tensor::full({config.d_model}, 1.0, true);
  lnf_b_ = Tensor::zeros({config.d_model}, true);
  unembed_ = randn(rng, {config.d_model, config.vocab_size}, 0.02, true);
  unembed_bias_ = Tensor::zeros({config.vocab_size}, true);
}

Tensor MicroTransformer::embed(std::span<const std::int32_t> tokens, std::size_t seq_len) const {
  if (seq_len == 0 || seq_len > config_.context) {
    throw InputError("MicroTransformer: sequence length " + std::to_string(seq_len) + " exceeds context " +
                     std::to_string(config_.context));
  }
  if (tokens.empty() || tokens.size() % seq_len != 0) {
    throw InputError("MicroTransformer: token count is not a multiple of the sequence length");
  }
  for (std::int32_t tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= config_.vocab_size) {
      throw InputError("MicroTransformer: token id " + std::to_string(tok) + " outside vocabulary of " +
                       std::to_string(config_.vocab_size));
    }
  }
  std::vector<std::int32_t> positions(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    positions[i] = static_cast<std::int32_t>(i % seq_len);
  }
  return add(embedding(tok_emb_, tokens), embedding(pos_emb_, positions));
}

Tensor MicroTransformer::run_layers(const Tensor& h, std::size_t first, std::size_t last, std::size_t seq_len,
                                    std::vector<Tensor>* trace) const {
  if (first > last || last > layers_.size()) {
    throw InputError("MicroTransformer: layer range [" + std::to_string(first) + ", " + std::to_string(last) +
                     ") out of " + std::to_string(layers_.size()));
  }
  Tensor x = h;
  for (std::size_t l = first; l < last; ++l) {
    x = layers_[l].forward(x, seq_len);
    if (trace) {
      trace->push_back(x);
    }
  }
  return x;
}

Tensor MicroTransformer::head(const Tensor& h) const {
  if (h.cols() != config_.d_model) {
    throw InputError("MicroTransformer: latent width " + std::to_string(h.cols()) + " vs d_model " +
                     std::to_string(config_.d_model));
  }
  return linear(layer_norm(h, lnf_g_, lnf_b_, 1e-5), unembed_, unembed_bias_);
}

MicroTransformer::Output MicroTransformer::forward(std::span<const std::int32_t> tokens,
                                                   std::size_t seq_len) const {
  Output out;
  out.latents.push_back(embed(tokens, seq_len));
  const Tensor last = run_layers(out.latents.front(), 0, layers_.size(), seq_len, &out.latents);
  out.logits = head(last);
  return out;
}

ParamList MicroTransformer::named_parameters() const {
  ParamList out;
  out.emplace_back("embed.tok", tok_emb_);
  out.emplace_back("embed.pos", pos_emb_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].append_params(out, "layers." + std::to_string(l));
  }
  out.emplace_back("final_ln.gamma", lnf_g_);
  out.emplace_back("final_ln.beta", lnf_b_);
  out.emplace_back("unembed.weight", unembed_);
  out.emplace_back("unembed.bias", unembed_bias_);
  return out;
}

std::vector<Tensor> MicroTransformer::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, p] : named_parameters()) {
    out.push_back(p);
  }
  return out;
}

std::size_t MicroTransformer::parameter_count() const { return count_params(named_parameters()); }

// ---------------------------------------------------------------------------

void assign_params(const ParamList& target, const ParamList& source) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : source) {
    by_name[name] = &t;
  }
  for (auto [name, t] : target) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw InputError("missing parameter '" + name + "'");
    }
    if (it->second->shape() != t.shape()) {
      throw InputError("parameter '" + name + "' has shape " + shape_str(it->second->shape()) + ", expected " +
                       shape_str(t.shape()));
    }
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  }
}

std::size_t count_params(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) {
    n += t.numel();
  }
  return n;
}

}  // namespace lft
