#pragma once

// Binary artifacts. All integers and floats are little-endian.
//
// Checkpoint ("LFTM"):
//   char[4] "LFTM" | u32 version = 1 | u32 entry_count
//   entry_count x { u32 name_len | name bytes | u32 rank | u64 dims[rank] | u64 byte_offset }
//   blob section: raw f64 parameter values, offsets relative to its start
//
// Latent dump ("LFTD"):
//   char[4] "LFTD" | u32 version = 1 | u32 dtype (0 = f32) | u32 n_layers
//   u32 n_tokens | u32 d_model | n_layers contiguous row-major [n_tokens, d_model] blocks

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "lft/estimator.hpp"
#include "lft/tensor.hpp"

namespace lft {

void save_checkpoint(const std::filesystem::path& path, const ParamList& params);
ParamList load_checkpoint(const std::filesystem::path& path);

/// Looks up `name`; throws InputError when absent.
const Tensor& find_param(const ParamList& params, const std::string& name);

struct LatentDump {
  std::size_t n_layers = 0;
  std::size_t n_tokens = 0;
  std::size_t d_model = 0;
  std::vector<float> values;  // n_layers * n_tokens * d_model

  /// Rows `token_ids` of layer `layer`, widened to f64.
  Tensor gather(std::size_t layer, std::span<const std::size_t> token_ids) const;
  Tensor layer(std::size_t layer) const;
};

/// Stacks per-layer [n_tokens, d_model] latents.
LatentDump make_latent_dump(const std::vector<Tensor>& latents);
void save_latent_dump(const std::filesystem::path& path, const LatentDump& dump);
LatentDump load_latent_dump(const std::filesystem::path& path);

}  // namespace lft
