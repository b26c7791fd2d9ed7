#include "lft/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lft/error.hpp"

namespace lft {

static_assert(std::endian::native == std::endian::little, "artifact I/O assumes a little-endian host");

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : os_(path, std::ios::binary | std::ios::trunc) {
    if (!os_) {
      throw InputError("cannot open '" + path.string() + "' for writing");
    }
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void finish(const std::filesystem::path& path) {
    os_.flush();
    if (!os_) {
      throw InputError("write failed for '" + path.string() + "'");
    }
  }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) {
      throw InputError("cannot open '" + path.string() + "'");
    }
  }
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) {
      throw InputError("truncated file '" + path_.string() + "'");
    }
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  void magic(const char* expected) {
    char m[4];
    bytes(m, 4);
    if (std::memcmp(m, expected, 4) != 0) {
      throw InputError("'" + path_.string() + "' is not a " + std::string(expected, 4) + " file");
    }
    if (u32() != kVersion) {
      throw InputError("'" + path_.string() + "' has an unsupported version");
    }
  }

 private:
  std::filesystem::path path_;
  std::ifstream is_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  Writer w(path);
  w.bytes("LFTM", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      w.u64(d);
    }
    w.u64(offset);
    offset += t.numel() * sizeof(double);
  }
  for (const auto& [name, t] : params) {
    w.bytes(t.data().data(), t.numel() * sizeof(double));
  }
  w.finish(path);
}

ParamList load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  r.magic("LFTM");
  const std::uint32_t count = r.u32();
  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  std::uint64_t expected = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name.resize(r.u32());
    r.bytes(e.name.data(), e.name.size());
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) {
      throw InputError("checkpoint entry '" + e.name + "' has invalid rank");
    }
    for (std::uint32_t a = 0; a < rank; ++a) {
      e.shape.push_back(r.u64());
    }
    e.offset = r.u64();
    if (e.offset != expected) {
      throw InputError("checkpoint entry '" + e.name + "' has a non-contiguous offset");
    }
    expected += shape_numel(e.shape) * sizeof(double);
    entries.push_back(std::move(e));
  }
  ParamList out;
  for (auto& e : entries) {
    std::vector<double> values(shape_numel(e.shape));
    r.bytes(values.data(), values.size() * sizeof(double));
    out.emplace_back(e.name, Tensor::from(e.shape, std::move(values)));
  }
  return out;
}

const Tensor& find_param(const ParamList& params, const std::string& name) {
  for (const auto& [n, t] : params) {
    if (n == name) {
      return t;
    }
  }
  throw InputError("checkpoint has no entry '" + name + "'");
}

Tensor LatentDump::gather(std::size_t layer_index, std::span<const std::size_t> token_ids) const {
  if (layer_index >= n_layers) {
    throw InputError("latent dump: layer " + std::to_string(layer_index) + " of " + std::to_string(n_layers));
  }
  std::vector<double> out(token_ids.size() * d_model);
  const float* base = values.data() + layer_index * n_tokens * d_model;
  for (std::size_t r = 0; r < token_ids.size(); ++r) {
    if (token_ids[r] >= n_tokens) {
      throw InputError("latent dump: token index out of range");
    }
    const float* row = base + token_ids[r] * d_model;
    for (std::size_t j = 0; j < d_model; ++j) {
      out[r * d_model + j] = static_cast<double>(row[j]);
    }
  }
  return Tensor::from({token_ids.size(), d_model}, std::move(out));
}

Tensor LatentDump::layer(std::size_t layer_index) const {
  std::vector<std::size_t> ids(n_tokens);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return gather(layer_index, ids);
}

LatentDump make_latent_dump(const std::vector<Tensor>& latents) {
  if (latents.empty()) {
    throw InputError("latent dump: no layers");
  }
  LatentDump d;
  d.n_layers = latents.size();
  d.n_tokens = latents[0].rows();
  d.d_model = latents[0].cols();
  d.values.reserve(d.n_layers * d.n_tokens * d.d_model);
  for (const auto& t : latents) {
    if (t.rows() != d.n_tokens || t.cols() != d.d_model) {
      throw DimensionError("latent dump: inconsistent layer shapes");
    }
    for (double v : t.data()) {
      d.values.push_back(static_cast<float>(v));
    }
  }
  return d;
}

void save_latent_dump(const std::filesystem::path& path, const LatentDump& dump) {
  Writer w(path);
  w.bytes("LFTD", 4);
  w.u32(kVersion);
  w.u32(0);
  w.u32(static_cast<std::uint32_t>(dump.n_layers));
  w.u32(static_cast<std::uint32_t>(dump.n_tokens));
  w.u32(static_cast<std::uint32_t>(dump.d_model));
  w.bytes(dump.values.data(), dump.values.size() * sizeof(float));
  w.finish(path);
}

LatentDump load_latent_dump(const std::filesystem::path& path) {
  Reader r(path);
  r.magic("LFTD");
  if (r.u32() != 0) {
    throw InputError("latent dump '" + path.string() + "' has an unsupported dtype");
  }
  LatentDump d;
  d.n_layers = r.u32();
  d.n_tokens = r.u32();
  d.d_model = r.u32();
  if (d.n_layers == 0 || d.n_tokens == 0 || d.d_model == 0) {
    throw InputError("latent dump '" + path.string() + "' is empty");
  }
  d.values.resize(d.n_layers * d.n_tokens * d.d_model);
  r.bytes(d.values.data(), d.values.size() * sizeof(float));
  return d;
}

}  // namespace lft
