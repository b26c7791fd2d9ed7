#pragma once

// Network architectures: the point-cloud velocity MLP, the teacher's
// parallel-residual transformer layer, its time-modulated velocity variant,
// and the micro-transformer language model.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lft/estimator.hpp"
#include "lft/rng.hpp"
#include "lft/tensor.hpp"

namespace lft {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(Rng& rng, std::size_t in, std::size_t out, double stddev);
  static Linear zeros(std::size_t in, std::size_t out);

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  Linear clone() const { return {weight.detach(), bias.detach()}; }
  void append_params(ParamList& out, const std::string& prefix) const;
};

/// Sinusoidal features [sin(w_i t), cos(w_i t)] with w_i geometrically spaced
/// over [1, max_freq]. Result is [rows, 2 * n_freqs], no gradient. Low
/// frequencies keep the velocity smooth in t, which lets a walk trained on a
/// few random steps transfer to other step grids.
Tensor time_features(const Tensor& t, std::size_t n_freqs = 8, double max_freq = 4.0);

// ---------------------------------------------------------------------------

struct VelocityMlpConfig {
  std::size_t dim = 2;
  std::size_t hidden = 128;
  std::size_t n_hidden_layers = 2;
  std::size_t time_freqs = 8;
  bool zero_init_output = true;
};

/// u(x, t) for point clouds: [x, phi(t)] -> hidden -> hidden -> dim, SiLU.
class VelocityMlp : public VelocityEstimator {
 public:
  VelocityMlp(const VelocityMlpConfig& config, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& t) const;
  Tensor velocity(const Tensor& x, const Tensor& t, const FlowContext&) const override { return forward(x, t); }
  ParamList named_parameters() const override;

  const VelocityMlpConfig& config() const { return config_; }

 private:
  VelocityMlpConfig config_;
  std::vector<Linear> layers_;
};

// ---------------------------------------------------------------------------

/// Pythia-style block: h + Attn(LN1(h)) + MLP(LN2(h)).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  static TransformerLayer init(Rng& rng, std::size_t d_model, std::size_t n_heads, std::size_t d_ff,
                               std::size_t n_layers_total);

  Tensor forward(const Tensor& h, std::size_t seq_len) const;
  /// Attn(LN1(h)) + MLP(LN2(h)).
  Tensor residual(const Tensor& h, std::size_t seq_len) const;

  TransformerLayer clone() const;
  void append_params(ParamList& out, const std::string& prefix) const;
  std::size_t parameter_count() const;

  std::size_t d_model() const { return ln1_g.numel(); }

  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  Linear q, k, v, o, fc1, fc2;
  std::size_t n_heads = 1;
  double ln_eps = 1e-5;
};

/// Per-row modulation vectors, each [rows, D].
struct Modulation {
  Tensor shift_attn, scale_attn, gate_attn;
  Tensor shift_mlp, scale_mlp, gate_mlp;

  /// scale = 1, shift = 0, gate = 1.
  static Modulation identity(std::size_t rows, std::size_t d);
};

/// Teacher layer augmented with time-conditioned scale/shift/gate. The
/// velocity is block output minus block input. Keys and values are taken from
/// `ctx.context` (the frozen teacher stream); queries come from x_t.
class DitVelocityLayer : public VelocityEstimator {
 public:
  /// Copies `teacher_layer` weights; the conditioning MLP's last layer starts
  /// at zero so the initial modulation is the identity.
  DitVelocityLayer(const TransformerLayer& teacher_layer, Rng& rng, std::size_t cond_hidden = 64,
                   std::size_t time_freqs = 8);

  Modulation modulation(const Tensor& t) const;
  Tensor block(const Tensor& x, const Tensor& context, const Modulation& mod, std::size_t seq_len) const;
  Tensor velocity_with(const Tensor& x, const Tensor& context, const Modulation& mod, std::size_t seq_len) const;

  Tensor velocity(const Tensor& x, const Tensor& t, const FlowContext& ctx) const override;
  ParamList named_parameters() const override;
  std::size_t parameter_count() const;
  std::size_t conditioning_parameter_count() const;

  const TransformerLayer& layer() const { return layer_; }

 private:
  TransformerLayer layer_;
  Linear cond_in_;
  Linear cond_out_;
  std::size_t time_freqs_;
};

// ---------------------------------------------------------------------------

struct MicroConfig {
  std::size_t vocab_size = 64;
  std::size_t d_model = 64;
  std::size_t n_layers = 8;
  std::size_t n_heads = 4;
  std::size_t context = 64;
  std::size_t d_ff = 256;
};

class MicroTransformer {
 public:
  struct Output {
    Tensor logits;                // [rows, V]
    std::vector<Tensor> latents;  // L + 1 entries of [rows, D]
  };

  MicroTransformer(const MicroConfig& config, Rng& rng);

  /// `tokens` holds whole sequences of `seq_len` back to back.
  Output forward(std::span<const std::int32_t> tokens, std::size_t seq_len) const;
  Tensor embed(std::span<const std::int32_t> tokens, std::size_t seq_len) const;
  /// Applies layers [first, last) to h; appends each output to `trace` if given.
  Tensor run_layers(const Tensor& h, std::size_t first, std::size_t last, std::size_t seq_len,
                    std::vector<Tensor>* trace = nullptr) const;
  /// Final LN + unembedding.
  Tensor head(const Tensor& h) const;

  ParamList named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  const MicroConfig& config() const { return config_; }
  const TransformerLayer& layer(std::size_t i) const { return layers_.at(i); }

 private:
  MicroConfig config_;
  Tensor tok_emb_;  // [V, D]
  Tensor pos_emb_;  // [C, D]
  std::vector<TransformerLayer> layers_;
  Tensor lnf_g_, lnf_b_;
  Tensor unembed_;      // [D, V]
  Tensor unembed_bias_;  // [V]
};

/// Copies values from `source` into same-named tensors of `target`.
/// Throws InputError on a missing name or shape mismatch.
void assign_params(const ParamList& target, const ParamList& source);

std::size_t count_params(const ParamList& params);

}  // namespace lft
