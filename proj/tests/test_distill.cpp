#include <cmath>

#include "doctest.h"
#include "lft/distill.hpp"
#include "lft/error.hpp"
#include "lft/teacher.hpp"
#include "support.hpp"

using namespace lft;
using lft::test::max_abs_diff;

namespace {

struct Fixture {
  Corpus corpus;
  Teacher teacher;

  Fixture() {
    CorpusConfig cc;
    cc.vocab_size = 16;
    cc.n_tokens = 4000;
    corpus = make_corpus(cc, 0);
    TeacherConfig tc;
    tc.model = {16, 8, 4, 2, 8, 16};
    tc.steps = 0;
    tc.seq_len = 8;
    teacher = init_teacher(tc);
  }

  const MicroTransformer& t() const { return *teacher.model; }
  LatentPairs pairs(ReplacementSpec s, bool heldout, std::size_t windows = 4) const {
    return extract_pairs(t(), heldout ? corpus.heldout() : corpus.train(), s, 8, windows);
  }
};

DistillConfig small_config(ReplacementSpec s, std::size_t steps) {
  DistillConfig c = default_distill_config();
  c.spec = s;
  c.seq_len = 8;
  c.budget_tokens = 64;
  c.cond_hidden = 4;
  c.k_infer = {1, 3};
  c.flow.steps = steps;
  c.flow.batch_size = 16;
  c.flow.log_every = 2;
  return c;
}

}  // namespace

TEST_SUITE("distill") {

TEST_CASE("pairs are the teacher's latents at the block boundaries") {
  const Fixture f;
  const ReplacementSpec s{1, 2};
  const LatentPairs p = f.pairs(s, false, 3);
  const auto out = f.t().forward(p.inputs, 8);
  CHECK(p.n_tokens() == 24);
  CHECK(test::bitwise_equal(p.x0, out.latents[1]));
  CHECK(test::bitwise_equal(p.x1, out.latents[3]));
  CHECK(test::bitwise_equal(p.teacher_logits, out.logits));
  const std::vector<std::size_t> ids{2};
  const PairBatch b = p.windows(ids);
  CHECK(b.x0.rows() == 8);
  CHECK(b.x0.at(0, 0) == p.x0.at(16, 0));
  CHECK(b.ctx.seq_len == 8);
  CHECK_THROWS_AS(p.windows(std::vector<std::size_t>{3}), ContractError);
}

TEST_CASE("teacher composition reproduces the full model") {
  const Fixture f;
  const ReplacementSpec s{1, 2};
  const LatentPairs h = f.pairs(s, true);
  const EvalReport r = evaluate_at(StudentModel::teacher(f.t(), s), h, 0, "teacher");
  CHECK(r.nmse == 0.0);
  CHECK(r.kl_latent == 0.0);
  CHECK(std::abs(r.kl_lm) < 1e-12);
  CHECK(r.ppl == doctest::Approx(heldout_perplexity(f.t(), f.corpus.heldout(), 8, 4)).epsilon(1e-12));
}

TEST_CASE("skip baseline") {
  const Fixture f;
  const ReplacementSpec s{1, 2};
  const LatentPairs h = f.pairs(s, true);
  const auto reports = evaluate(baseline_skip(f.t(), s), h, std::vector<std::size_t>{1, 3}, "skip");
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].k == 0);
  CHECK(reports[0].nmse == doctest::Approx(nmse(h.x0, h.x1)).epsilon(1e-14));
  CHECK(reports[0].kl_lm > 0.0);
}

TEST_CASE("untrained students start from teacher layer m") {
  const Fixture f;
  // with a single replaced layer both students begin as an exact copy of it
  const ReplacementSpec s{2, 2};
  const LatentPairs tr = f.pairs(s, false);
  const LatentPairs va = f.pairs(s, true, 2);
  const LatentPairs h = f.pairs(s, true);
  const DistillConfig c = small_config(s, 0);
  const StudentModel reg = baseline_regression(f.t(), tr, va, c);
  CHECK(evaluate_at(reg, h, 0, "regression").nmse < 1e-24);
  DistillConfig ce = c;
  ce.flow.step_rule = StepRule::Euler;
  const StudentModel flow = train_lft(f.t(), tr, va, ce);
  const EvalReport r = evaluate_at(flow, h, 1, "lft");
  CHECK(r.nmse < 1e-24);
  CHECK(std::abs(r.kl_lm) < 1e-12);
}

TEST_CASE("parameter counts") {
  const Fixture f;
  const ReplacementSpec s{1, 3};
  const LatentPairs tr = f.pairs(s, false);
  const LatentPairs va = f.pairs(s, true, 2);
  const std::size_t total = f.t().parameter_count();
  const std::size_t layer = f.t().layer(1).parameter_count();
  CHECK(StudentModel::teacher(f.t(), s).parameter_count() == total);
  CHECK(baseline_skip(f.t(), s).parameter_count() == total - 3 * layer);
  CHECK(baseline_regression(f.t(), tr, va, small_config(s, 0)).parameter_count() == total - 2 * layer);
  const StudentModel flow = train_lft(f.t(), tr, va, small_config(s, 0));
  CHECK(flow.parameter_count() == total - 2 * layer + flow.flow_layer()->conditioning_parameter_count());
}

TEST_CASE("short training is finite, deterministic and evaluated per k") {
  const Fixture f;
  const ReplacementSpec s{1, 2};
  const LatentPairs tr = f.pairs(s, false);
  const LatentPairs va = f.pairs(s, true, 2);
  const LatentPairs h = f.pairs(s, true);
  const DistillConfig c = small_config(s, 4);
  TrainLog log;
  const StudentModel a = train_lft(f.t(), tr, va, c, &log);
  const StudentModel b = train_lft(f.t(), tr, va, c);
  CHECK(log.records.size() == 2);
  const auto ra = evaluate(a, h, c.k_infer, "lft");
  const auto rb = evaluate(b, h, c.k_infer, "lft");
  REQUIRE(ra.size() == 2);
  CHECK(ra[1].k == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::isfinite(ra[i].kl_lm));
    CHECK(ra[i].kl_lm == rb[i].kl_lm);
  }
  // held-out pairs must match the student's spec
  CHECK_THROWS_AS(evaluate_at(a, f.pairs({1, 3}, true), 1, "lft"), InputError);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(ReplacementSpec({3, 2}).validate(4), InputError);
  CHECK_THROWS_AS(ReplacementSpec({1, 4}).validate(4), InputError);
  CHECK_NOTHROW(ReplacementSpec({0, 3}).validate(4));
  CHECK(ReplacementSpec({2, 5}).replaced() == 4);
}

TEST_CASE("pair source serves whole windows") {
  const Fixture f;
  const LatentPairs tr = f.pairs({1, 1}, false);
  const LatentPairs va = f.pairs({1, 1}, true, 2);
  LatentPairSource src(tr, va);
  Rng rng(1);
  CHECK(src.next(rng, 20).x0.rows() == 16);
  CHECK(src.next(rng, 3).x0.rows() == 8);
  CHECK(src.next(rng, 1000).x0.rows() == 32);
  CHECK(src.validation().x0.rows() == 16);
}

}  // TEST_SUITE
