#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "doctest.h"
#include "lft/error.hpp"
#include "lft/teacher.hpp"
#include "support.hpp"

using namespace lft;
namespace fs = std::filesystem;

namespace {

TeacherConfig tiny_teacher(std::size_t steps) {
  TeacherConfig c;
  c.model = {16, 8, 2, 2, 8, 16};
  c.steps = steps;
  c.batch_seqs = 2;
  c.seq_len = 8;
  c.warmup = 2;
  c.log_every = 2;
  c.eval_windows = 2;
  return c;
}

CorpusConfig tiny_corpus() {
  CorpusConfig c;
  c.vocab_size = 16;
  c.n_tokens = 2000;
  return c;
}

std::vector<double> flatten(const MicroTransformer& m) {
  std::vector<double> out;
  for (const auto& [n, p] : m.named_parameters()) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return out;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("markov source") {
  const MarkovSource src(8, 0, 2.5);
  for (std::int32_t a = 0; a < 8; ++a) {
    for (std::int32_t b = 0; b < 8; ++b) {
      const auto p = src.next_distribution(a, b);
      double s = 0.0;
      double h = 0.0;
      for (double v : p) {
        s += v;
        h -= v > 0 ? v * std::log(v) : 0.0;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(src.conditional_entropy(a, b) == doctest::Approx(h).epsilon(1e-12));
      CHECK(h <= std::log(8.0) + 1e-12);
    }
  }
  // empirical transition frequencies of a long sample follow the table
  const auto toks = src.sample(200000, 1);
  std::map<std::pair<int, int>, std::vector<double>> counts;
  for (std::size_t i = 2; i < toks.size(); ++i) {
    auto& c = counts[{toks[i - 2], toks[i - 1]}];
    c.resize(8, 0.0);
    c[static_cast<std::size_t>(toks[i])] += 1.0;
  }
  // the most visited context gives the tightest check
  auto total = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  const auto& [ctx, c] = *std::max_element(counts.begin(), counts.end(), [&](const auto& a, const auto& b) {
    return total(a.second) < total(b.second);
  });
  const double n = total(c);
  REQUIRE(n > 1000);
  const auto p = src.next_distribution(ctx.first, ctx.second);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(std::abs(c[j] / n - p[j]) < 5.0 * std::sqrt(p[j] * (1 - p[j]) / n) + 1e-3);
  }
  CHECK(src.sample(50, 3) == src.sample(50, 3));
}

TEST_CASE("corpus split and windows") {
  const Corpus c = make_corpus(tiny_corpus(), 0);
  CHECK(c.tokens.size() == 2000);
  CHECK(c.train_end == 1800);
  CHECK(c.heldout().size() == 200);
  // held-out entropy is the mean source entropy over held-out contexts
  const MarkovSource src(16, 0, 2.5);
  double h = 0.0;
  std::size_t n = 0;
  for (std::size_t i = std::max<std::size_t>(c.train_end, 2); i < c.tokens.size(); ++i) {
    h += src.conditional_entropy(c.tokens[i - 2], c.tokens[i - 1]);
    ++n;
  }
  CHECK(c.heldout_entropy == doctest::Approx(h / static_cast<double>(n)).epsilon(1e-9));

  const Windows w = contiguous_windows(c.train(), 10, 3);
  CHECK(w.count == 3);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(w.inputs[i] == c.tokens[i]);
    CHECK(w.targets[i] == c.tokens[i + 1]);
  }
  CHECK_THROWS_AS(contiguous_windows(std::span<const std::int32_t>(c.tokens.data(), 5), 10, 3), InputError);
  CorpusConfig bad = tiny_corpus();
  bad.heldout_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

}  // TEST_SUITE

TEST_SUITE("teacher") {

TEST_CASE("training lowers loss and is deterministic") {
  const Corpus corpus = make_corpus(tiny_corpus(), 0);
  Teacher a = init_teacher(tiny_teacher(8));
  const TeacherLog log = train_teacher(a, corpus, tiny_teacher(8));
  REQUIRE(log.records.size() == 4);
  CHECK(log.records.back().loss < log.records.front().loss);
  Teacher b = init_teacher(tiny_teacher(8));
  train_teacher(b, corpus, tiny_teacher(8));
  CHECK(flatten(*a.model) == flatten(*b.model));
  CHECK(a.step == 8);
  CHECK(a.optim.step_count == 8);
}

TEST_CASE("checkpoint resume matches an uninterrupted run") {
  const Corpus corpus = make_corpus(tiny_corpus(), 0);
  Teacher full = init_teacher(tiny_teacher(6));
  train_teacher(full, corpus, tiny_teacher(6));

  Teacher half = init_teacher(tiny_teacher(3));
  train_teacher(half, corpus, tiny_teacher(3));
  const fs::path p = fs::temp_directory_path() / "lft_unit_teacher.lftm";
  save_teacher(p, half);
  Teacher resumed = load_teacher(p);
  CHECK(resumed.step == 3);
  CHECK(flatten(*resumed.model) == flatten(*half.model));
  CHECK(resumed.model->config().n_heads == 2);
  train_teacher(resumed, corpus, tiny_teacher(6));
  CHECK(flatten(*resumed.model) == flatten(*full.model));
}

TEST_CASE("vocabulary mismatch is an input error") {
  CorpusConfig cc = tiny_corpus();
  cc.vocab_size = 12;
  const Corpus corpus = make_corpus(cc, 0);
  Teacher t = init_teacher(tiny_teacher(2));
  CHECK_THROWS_AS(train_teacher(t, corpus, tiny_teacher(2)), InputError);
}

}  // TEST_SUITE
