// Acceptance suite: one PASS/FAIL line per criterion. With no arguments all
// criteria run; otherwise only the listed numbers. --lft points at the CLI
// binary (criterion 8) and --work at a scratch directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "../fields.hpp"
#include "../support.hpp"
#include "lft/distill.hpp"
#include "lft/gradcheck.hpp"
#include "lft/teacher.hpp"
#include "lft/toy2d.hpp"
#include "lft/transport.hpp"

namespace fs = std::filesystem;
using namespace lft;
using namespace lft::test;

namespace {

struct Options {
  fs::path lft;
  fs::path work = "acceptance_work";
};

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> notes;  // per-check lines printed under the verdict

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity(const Options&) {
  Outcome o;
  std::map<std::string, double> worst;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t S = 4;
    const std::size_t D = 8;

    VelocityMlpConfig mc;
    mc.dim = D;
    mc.hidden = 10;
    VelocityMlp mlp(mc, rng);
    jitter(mlp.named_parameters(), rng, 0.2);

    const TransformerLayer layer = TransformerLayer::init(rng, D, 2, 16, 4);
    jitter([&] {
      ParamList ps;
      layer.append_params(ps, "l");
      return ps;
    }(), rng, 0.05);
    DitVelocityLayer dit(layer, rng, 6, 3);
    jitter(dit.named_parameters(), rng, 0.05);

    PairBatch b;
    b.x0 = randn(rng, {2 * S, D});
    b.x1 = randn(rng, {2 * S, D});
    b.ctx = {b.x0, S};
    PairBatch flat = b;
    flat.ctx = {};
    const Tensor y = randn(rng, {2 * S, D});
    const Tensor t = rand_uniform(rng, {2 * S});
    const Tensor fm_t = rand_uniform(rng, {2 * S});
    const Tensor walk = sample_walk_times_rows(rng, 2 * S, 3);

    auto note = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };
    note("velocity mlp",
         worst_param_error(mlp.named_parameters(), [&] { return sum(mul(mlp.forward(b.x0, t), y)); }));
    note("velocity mlp (input)", grad_check([&](const Tensor& a) { return sum(mul(mlp.forward(a, t), y)); }, b.x0));
    ParamList lps;
    layer.append_params(lps, "layer");
    note("teacher layer", worst_param_error(lps, [&] { return sum(mul(layer.forward(b.x0, S), y)); }));
    note("teacher layer (input)", grad_check([&](const Tensor& a) { return sum(mul(layer.forward(a, S), y)); }, b.x0));
    note("dit block",
         worst_param_error(dit.named_parameters(), [&] { return sum(mul(dit.velocity(b.x0, t, b.ctx), y)); }));
    note("dit block (input)",
         grad_check([&](const Tensor& a) { return sum(mul(dit.velocity(a, t, b.ctx), y)); }, b.x0));
    note("fm loss", worst_param_error(mlp.named_parameters(), [&] { return fm_loss(mlp, flat, t); }));
    for (StepRule rule : {StepRule::Euler, StepRule::Midpoint}) {
      const std::string r = " " + to_string(rule);
      note("fw 3-step chain (mlp)" + r,
           worst_param_error(mlp.named_parameters(), [&] { return fw_loss(mlp, flat, 0.3, 0.7, rule); }));
      note("fw 3-step chain (dit)" + r,
           worst_param_error(dit.named_parameters(), [&] { return fw_loss(dit, b, 0.2, 0.65, rule); }));
      note("fw per-row walk" + r,
           worst_param_error(mlp.named_parameters(), [&] { return fw_loss_rows(mlp, flat, walk, rule); }));
      note("hybrid loss" + r, worst_param_error(mlp.named_parameters(), [&] {
             return hybrid_loss(mlp, flat, 0.5, {0.3, 0.7}, fm_t, rule);
           }));
    }
    MicroConfig tc{13, D, 2, 2, S, 16};
    MicroTransformer micro(tc, rng);
    jitter(micro.named_parameters(), rng, 0.05);
    std::vector<std::int32_t> tokens(2 * S);
    std::vector<std::int32_t> targets(2 * S);
    for (std::size_t i = 0; i < 2 * S; ++i) {
      tokens[i] = static_cast<std::int32_t>(rng() % 13);
      targets[i] = static_cast<std::int32_t>(rng() % 13);
    }
    note("teacher lm cross-entropy", worst_param_error(micro.named_parameters(), [&] {
           return cross_entropy(micro.forward(tokens, S).logits, targets);
         }));
  }
  double overall = 0.0;
  for (const auto& [name, err] : worst) {
    o.check(err < 1e-5, name + ": max rel err " + fmt("%.2e", err));
    overall = std::max(overall, err);
  }
  o.detail = "worst relative error " + fmt("%.2e", overall) + " over " + std::to_string(worst.size()) +
             " checks x 5 seeds";
  return o;
}

// ---------------------------------------------------------------------------

Outcome ot_oracle(const Options&) {
  Outcome o;
  Rng rng(2);
  std::size_t mismatches = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    std::size_t bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
      CostMatrix c;
      c.n = n;
      c.entries.resize(n * n);
      for (double& e : c.entries) {
        e = uniform01(rng);
      }
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), std::size_t{0});
      double best = std::numeric_limits<double>::infinity();
      do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          s += c(i, p[i]);
        }
        best = std::min(best, s);
      } while (std::next_permutation(p.begin(), p.end()));
      bad += ot_assign(c).total_cost == best ? 0 : 1;
    }
    o.check(bad == 0, "N=" + std::to_string(n) + ": " + std::to_string(100 - bad) + "/100 exact");
    mismatches += bad;
  }
  o.detail = std::to_string(700 - mismatches) + "/700 assignments equal the exhaustive minimum";
  return o;
}

// ---------------------------------------------------------------------------

Outcome recoupling(const Options&) {
  Outcome o;
  Rng rng(3);
  const Tensor src = randn(rng, {64, 5});
  std::vector<double> moved(src.data().begin(), src.data().end());
  for (std::size_t i = 0; i < moved.size(); ++i) {
    moved[i] += 1.5 - 0.5 * static_cast<double>(i % 5);
  }
  const double r_shift = recoupling_ratio({{src, Tensor::from({64, 5}, moved)}}).ratio;
  o.check(r_shift == 0.0, "translated identity R = " + fmt("%g", r_shift));

  const double r_x =
      recoupling_ratio({{Tensor::from({2, 2}, {0, 0, 0, 1}), Tensor::from({2, 2}, {1, 1, 1, 0})}}).ratio;
  o.check(r_x == 1.0, "two-point X R = " + fmt("%g", r_x));

  std::vector<std::pair<Tensor, Tensor>> batches;
  double fixed = 0.0;
  for (int b = 0; b < 8; ++b) {
    const Tensor s = randn(rng, {64, 5});
    const auto perm = permutation(rng, 64);
    std::vector<double> d(64 * 5);
    for (std::size_t i = 0; i < 64; ++i) {
      fixed += perm[i] == i ? 1.0 : 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        d[i * 5 + j] = s.at(perm[i], j) + 0.25;
      }
    }
    batches.emplace_back(s, Tensor::from({64, 5}, d));
  }
  const double oracle = 1.0 - fixed / (8.0 * 64.0);
  const double r_perm = recoupling_ratio(batches).ratio;
  o.check(r_perm == oracle, "random permutations R = " + fmt("%.6f", r_perm) + " vs fixed-point oracle " +
                                fmt("%.6f", oracle));
  o.detail = "R(shift) = " + fmt("%g", r_shift) + ", R(X) = " + fmt("%g", r_x) + ", R(perm) matches oracle " +
             fmt("%.6f", oracle);
  return o;
}

// ---------------------------------------------------------------------------

Outcome integrator_order(const Options&) {
  Outcome o;
  const AffineInTime affine({0.3, -1.2, 2.0}, {1.5, 0.25, -3.0});
  Rng rng(4);
  const Tensor x = randn(rng, {4, 3});
  double worst_exact = 0.0;
  for (std::size_t k : {1, 2, 5}) {
    const Tensor y = lft_infer(affine, x, k, StepRule::Midpoint);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double a = std::vector<double>{0.3, -1.2, 2.0}[j];
        const double b = std::vector<double>{1.5, 0.25, -3.0}[j];
        worst_exact = std::max(worst_exact, std::abs(y.at(r, j) - (x.at(r, j) + a + b / 2.0)));
      }
    }
  }
  o.check(worst_exact <= 1e-10, "affine-in-t field: max error " + fmt("%.1e", worst_exact));

  const GrowthField growth;
  const Tensor x0 = Tensor::from({3, 2}, {1.0, -0.5, 2.0, 0.3, -1.1, 0.7});
  const Tensor exact = scale(x0, GrowthField::exact_scale());
  std::vector<double> errs;
  for (std::size_t k : {8, 16, 32, 64}) {
    errs.push_back(max_abs_diff(lft_infer(growth, x0, k, StepRule::Midpoint), exact));
  }
  std::string ratios;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double r = errs[i] / errs[i + 1];
    o.check(r >= 3.2 && r <= 4.8, "halving " + std::to_string(i + 1) + ": error ratio " + fmt("%.3f", r));
    ratios += (i ? ", " : "") + fmt("%.3f", r);
  }
  o.detail = "affine error " + fmt("%.1e", worst_exact) + "; halving ratios " + ratios;
  return o;
}

// ---------------------------------------------------------------------------

Outcome unroll_equivalence(const Options&) {
  Outcome o;
  Rng rng(5);
  const TransformerLayer layer = TransformerLayer::init(rng, 8, 2, 16, 4);
  DitVelocityLayer dit(layer, rng, 8, 4);
  jitter(dit.named_parameters(), rng, 0.1);
  std::size_t cases = 0;
  std::size_t equal = 0;
  for (std::size_t k : {1, 2, 3, 8}) {
    for (StepRule rule : {StepRule::Euler, StepRule::Midpoint}) {
      const UnrolledFlow graph = unroll_graph(dit, k, rule);
      std::size_t ok = 0;
      for (int i = 0; i < 10; ++i) {
        const Tensor x0 = randn(rng, {12, 8});
        const FlowContext ctx{x0, 4};
        ok += bitwise_equal(graph(x0, ctx), lft_infer(dit, x0, k, rule, ctx)) ? 1 : 0;
      }
      o.check(ok == 10 && graph.block_count() == k,
              "k=" + std::to_string(k) + " " + to_string(rule) + ": " + std::to_string(ok) + "/10 bitwise, " +
                  std::to_string(graph.block_count()) + " blocks, " + std::to_string(graph.estimator_calls()) +
                  " estimator calls");
      cases += 10;
      equal += ok;
    }
  }
  o.detail = std::to_string(equal) + "/" + std::to_string(cases) + " unrolled graphs bitwise equal to lft_infer";
  return o;
}

// ---------------------------------------------------------------------------

Outcome toy_phenomena(const Options&) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ToyDataset swapped = gen_pairs(ToyKind::SwappedClusters, 16, 0.25, 0);
  const ToyDataset lines = gen_pairs(ToyKind::ParallelLines, 16, 0.25, 0);
  auto run = [](FlowMethod m, std::size_t k, const ToyDataset& d) {
    ToyRunConfig c = default_toy_config(m, k);
    c.k_infer = {3, 8};
    return run_toy(c, d);
  };
  const ToyRun sfm = run(FlowMethod::SFM, 3, swapped);
  const ToyRun fw1 = run(FlowMethod::FW, 1, swapped);
  const ToyRun fw2 = run(FlowMethod::FW, 2, swapped);
  const ToyRun fw3 = run(FlowMethod::FW, 3, swapped);
  const ToyRun hyb = run(FlowMethod::Hybrid, 3, swapped);
  const ToyRun sfm_lines = run(FlowMethod::SFM, 3, lines);
  const double elapsed = seconds_since(t0);

  const auto& s3 = sfm.diags[0];
  const auto& f3 = fw3.diags[0];
  const auto& f8 = fw3.diags[1];
  o.check(s3.pair_preservation < 0.5, "SFM pair preservation " + fmt("%.3f", s3.pair_preservation) + " < 0.5");
  o.check(f3.pair_preservation > 0.95, "FW(k=3) pair preservation " + fmt("%.3f", f3.pair_preservation) + " > 0.95");
  const double ratio = f8.endpoint_nmse / f3.endpoint_nmse;
  o.check(ratio <= 1.3, "FW(k=3) NMSE at k=8 / at k=3 = " + fmt("%.2e", f8.endpoint_nmse) + " / " +
                            fmt("%.2e", f3.endpoint_nmse) + " = " + fmt("%.2f", ratio) + " <= 1.3");
  for (const ToyRun* r : {&fw1, &fw2}) {
    const std::size_t k = r == &fw1 ? 1 : 2;
    o.check(r->diags[1].endpoint_nmse > f8.endpoint_nmse,
            "FW(k=" + std::to_string(k) + ") NMSE at k=8 " + fmt("%.2e", r->diags[1].endpoint_nmse) +
                " > FW(k=3) " + fmt("%.2e", f8.endpoint_nmse));
  }
  const auto& h3 = hyb.diags[0];
  const double bound = sfm_lines.diags[0].straightness + 0.05;
  o.check(h3.pair_preservation > 0.95, "hybrid pair preservation " + fmt("%.3f", h3.pair_preservation) + " > 0.95");
  o.check(h3.straightness < bound, "hybrid straightness " + fmt("%.4f", h3.straightness) +
                                       " < SFM-on-parallel-lines " + fmt("%.4f", bound - 0.05) + " + 0.05");
  o.check(elapsed < 900.0, "runtime " + fmt("%.0f", elapsed) + " s < 900 s");
  o.detail = "k=8/k=3 NMSE ratio " + fmt("%.2f", ratio) + ", SFM/FW3/hybrid preservation " +
             fmt("%.2f", s3.pair_preservation) + "/" + fmt("%.2f", f3.pair_preservation) + "/" +
             fmt("%.2f", h3.pair_preservation);
  return o;
}

// ---------------------------------------------------------------------------

Outcome micro_distillation(const Options&) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = make_corpus(CorpusConfig{}, 0);
  TeacherConfig tc;
  Teacher teacher = init_teacher(tc);
  train_teacher(teacher, corpus, tc);
  const MicroTransformer& t = *teacher.model;

  DistillConfig dc = default_distill_config();
  dc.flow.steps = 600;
  dc.k_infer = {3};
  const ReplacementSpec spec = dc.spec;
  const LatentPairs train = extract_pairs(t, corpus.train(), spec, dc.seq_len, dc.budget_tokens / dc.seq_len);
  const LatentPairs val = extract_pairs(t, corpus.heldout(), spec, dc.seq_len, dc.val_windows);
  const LatentPairs held = extract_pairs(t, corpus.heldout(), spec, dc.seq_len, dc.eval_windows);

  // skip-j drops layers m .. m + j - 1
  std::vector<double> skip;
  for (std::size_t j = 1; j <= spec.replaced(); ++j) {
    const ReplacementSpec s{spec.m, spec.m + j - 1};
    const LatentPairs h = extract_pairs(t, corpus.heldout(), s, dc.seq_len, dc.eval_windows);
    skip.push_back(evaluate_at(baseline_skip(t, s), h, 0, "skip").kl_lm);
  }
  DistillConfig fw = dc;
  fw.flow.method = FlowMethod::FW;
  DistillConfig sfm = dc;
  sfm.flow.method = FlowMethod::SFM;
  const double kl_fw = evaluate_at(train_lft(t, train, val, fw), held, 3, "lft-fw").kl_lm;
  const double kl_sfm = evaluate_at(train_lft(t, train, val, sfm), held, 3, "lft-sfm").kl_lm;
  const double kl_reg = evaluate_at(baseline_regression(t, train, val, dc), held, 0, "regression").kl_lm;
  const double elapsed = seconds_since(t0);

  std::string chain;
  bool monotone = true;
  for (std::size_t j = 0; j < skip.size(); ++j) {
    chain += (j ? " < " : "") + fmt("%.4f", skip[j]);
    monotone = monotone && (j == 0 || skip[j] > skip[j - 1]);
  }
  o.check(monotone, "(a) skip-1..4 KL " + chain);
  o.check(kl_fw < skip[1], "(b) LFT-FW k=3 KL " + fmt("%.4f", kl_fw) + " < skip-2 " + fmt("%.4f", skip[1]));
  o.check(kl_fw <= kl_sfm, "(b) LFT-FW k=3 KL " + fmt("%.4f", kl_fw) + " <= LFT-SFM k=3 " + fmt("%.4f", kl_sfm));
  o.check(kl_reg < skip.back(), "(c) regression KL " + fmt("%.4f", kl_reg) + " < skip-" +
                                    std::to_string(skip.size()) + " " + fmt("%.4f", skip.back()));
  o.check(elapsed < 1800.0, "runtime " + fmt("%.0f", elapsed) + " s < 1800 s");
  o.detail = "KL_PQ fw " + fmt("%.4f", kl_fw) + ", sfm " + fmt("%.4f", kl_sfm) + ", regression " +
             fmt("%.4f", kl_reg) + ", skip-2 " + fmt("%.4f", skip[1]);
  return o;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::is_directory(dir)) {
    return files;
  }
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      files[fs::relative(e.path(), dir).string()] =
          std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
  }
  return files;
}

int run_cli(const Options& opt, const std::string& cmd, const fs::path& config, const fs::path& out) {
  const std::string line = "\"" + opt.lft.string() + "\" " + cmd + " \"" + config.string() + "\" --out \"" +
                           out.string() + "\" > \"" + (out.string() + ".log") + "\" 2>&1";
  const int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const Options& opt) {
  Outcome o;
  if (opt.lft.empty() || !fs::exists(opt.lft)) {
    o.check(false, "CLI binary not found (pass --lft)");
    return o;
  }
  const fs::path root = fs::absolute(opt.work / "determinism");
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string corpus = R"("corpus": {"n_tokens": 20000})";
  const fs::path teacher = root / "teacher" / "teacher.lftm";
  const fs::path dump = root / "dump-latents" / "latents.lftd";
  const fs::path student = root / "distill" / "student_fw.lftm";
  const std::vector<std::pair<std::string, std::string>> steps{
      {"toy2d", R"({"seed": 3, "steps": 150, "hidden": 16, "k_infer": [1, 3],
                    "runs": [{"method": "fw", "k_train": 3}, {"method": "hybrid"}, {"method": "sfm"}]})"},
      {"teacher", "{\"seed\": 1, " + corpus + R"(, "model": {"d_model": 16, "n_layers": 4, "n_heads": 2,
                    "context": 16, "d_ff": 32}, "steps": 12, "seq_len": 16, "batch_seqs": 4, "warmup": 3,
                    "log_every": 4, "eval_windows": 4})"},
      {"dump-latents", "{\"teacher\": \"" + teacher.string() + "\", " + corpus + R"(, "seq_len": 16,
                         "max_tokens": 256})"},
      {"recouple", "{\"seed\": 2, \"dump\": \"" + dump.string() + R"(", "o_m": 32, "n_batches": 2})"},
      {"distill", "{\"seed\": 4, \"teacher\": \"" + teacher.string() + "\", " + corpus + R"(,
                    "spec": {"m": 1, "n": 2}, "seq_len": 16, "budget_tokens": 256, "steps": 6,
                    "batch_tokens": 32, "eval_windows": 2, "val_windows": 1, "cond_hidden": 8,
                    "log_every": 3, "k_infer": [1, 3]})"},
      {"eval", "{\"teacher\": \"" + teacher.string() + "\", \"student\": \"" + student.string() + "\", " +
                   corpus + R"(, "seq_len": 16, "eval_windows": 2, "k_infer": [1, 2]})"},
  };
  std::size_t identical = 0;
  for (const auto& [cmd, body] : steps) {
    const fs::path cfg = root / (cmd + ".json");
    std::ofstream(cfg) << body;
    const fs::path out = root / cmd;
    const int first = run_cli(opt, cmd, cfg, out);
    const auto a = snapshot(out);
    fs::remove_all(out);
    const int second = run_cli(opt, cmd, cfg, out);
    const auto b = snapshot(out);
    std::size_t artifacts = 0;
    for (const auto& [name, bytes] : a) {
      const bool is_artifact = name.ends_with(".csv") || name.ends_with(".lftm") || name.ends_with(".lftd");
      artifacts += is_artifact ? 1 : 0;
    }
    const bool same = first == 0 && second == 0 && a == b && artifacts > 0 && a.count("provenance.json");
    identical += same ? 1 : 0;
    o.check(same, cmd + ": exit " + std::to_string(first) + "/" + std::to_string(second) + ", " +
                      std::to_string(a.size()) + " files (" + std::to_string(artifacts) +
                      " CSV/checkpoint) byte-identical across runs");
  }
  o.detail = std::to_string(identical) + "/" + std::to_string(steps.size()) +
             " commands reproduce their outputs byte for byte";
  return o;
}

// ---------------------------------------------------------------------------

Outcome metric_units(const Options&) {
  Outcome o;
  Rng rng(9);
  const Tensor x = randn(rng, {6, 5});
  const double n0 = nmse(x, x);
  const double n1 = nmse(Tensor::zeros({6, 5}), x);
  const double n2 = nmse(scale(x, 2.0), x);
  o.check(n0 == 0.0 && std::abs(n1 - 1.0) < 1e-15 && std::abs(n2 - 1.0) < 1e-15,
          "NMSE {pred=target, pred=0, pred=2 target} = {" + fmt("%g", n0) + ", " + fmt("%.15g", n1) + ", " +
              fmt("%.15g", n2) + "}");
  const double kl =
      kl_categorical(Tensor::from({1, 2}, {std::log(2.0), 0.0}), Tensor::from({1, 2}, {0.0, 0.0}));
  o.check(std::abs(kl - 0.0566) <= 1e-4, "two-outcome KL " + fmt("%.6f", kl) + " = 0.0566 +- 1e-4");
  const std::vector<std::int32_t> next(10, 7);
  const double ppl = perplexity(Tensor::zeros({10, 64}), next);
  o.check(std::abs(ppl - 64.0) <= 1e-9, "uniform-logit PPL " + fmt("%.12f", ppl) + " = 64 +- 1e-9");
  o.detail = "NMSE {0, 1, 1}, KL " + fmt("%.6f", kl) + ", PPL " + fmt("%.9f", ppl);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--lft" && i + 1 < argc) {
      opt.lft = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      opt.work = argv[++i];
    } else {
      wanted.push_back(std::atoi(a.c_str()));
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"OT oracle equivalence", ot_oracle},
      {"recoupling correctness", recoupling},
      {"integrator order", integrator_order},
      {"unroll equivalence", unroll_equivalence},
      {"toy flow phenomena", toy_phenomena},
      {"micro-distillation ordering", micro_distillation},
      {"determinism", determinism},
      {"metric unit values", metric_units},
  };
  if (wanted.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
      wanted.push_back(i);
    }
  }
  int failed = 0;
  for (int id : wanted) {
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    const auto& [name, fn] = criteria[static_cast<std::size_t>(id - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = fn(opt);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    for (const auto& n : r.notes) {
      std::cout << "    " << n << "\n";
    }
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << r.detail << " ("
              << fmt("%.1f", seconds_since(t0)) << " s)\n"
              << std::flush;
    failed += r.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
