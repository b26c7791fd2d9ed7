#pragma once

// Training, evaluation and checkpointing of the micro-transformer teacher.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "lft/corpus.hpp"
#include "lft/nets.hpp"
#include "lft/optim.hpp"

namespace lft {

struct TeacherConfig {
  MicroConfig model;
  std::size_t steps = 600;
  std::size_t batch_seqs = 16;
  std::size_t seq_len = 64;
  AdamWHyper optim{3e-3, 0.9, 0.99, 1e-8, 0.01};
  std::size_t warmup = 50;
  double lr_final_fraction = 0.1;
  double grad_clip = 1.0;
  std::size_t log_every = 50;
  /// Held-out windows used for the logged perplexity.
  std::size_t eval_windows = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Teacher {
  std::unique_ptr<MicroTransformer> model;
  AdamWState optim;
  std::size_t step = 0;
};

Teacher init_teacher(const TeacherConfig& config);

struct TeacherRecord {
  std::size_t step;
  double loss;
  double val_ppl;
};

struct TeacherLog {
  std::vector<TeacherRecord> records;

  /// `step,loss,val_ppl`
  void write_csv(std::ostream& os) const;
};

/// Continues training from teacher.step up to config.steps. The batch of each
/// step depends only on (seed, step), so a resumed run matches an
/// uninterrupted one.
TeacherLog train_teacher(Teacher& teacher, const Corpus& corpus, const TeacherConfig& config);

/// Perplexity over up to `max_windows` consecutive windows of `tokens`.
double heldout_perplexity(const MicroTransformer& model, std::span<const std::int32_t> tokens, std::size_t seq_len,
                          std::size_t max_windows);

/// Weights, optimizer moments and the step counter in one LFTM file.
void save_teacher(const std::filesystem::path& path, const Teacher& teacher);
Teacher load_teacher(const std::filesystem::path& path);

}  // namespace lft
