// lft: command-line front end. Each subcommand takes one JSON config file;
// --out and --seed override the corresponding config keys.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "config.hpp"
#include "lft/distill.hpp"
#include "lft/error.hpp"
#include "lft/io.hpp"
#include "lft/teacher.hpp"
#include "lft/toy2d.hpp"
#include "lft/transport.hpp"

namespace fs = std::filesystem;
using namespace lft;
using namespace lft::cli;

namespace {

struct Invocation {
  std::string command;
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed = false;
};

struct RunContext {
  Section root;
  fs::path out;
  std::uint64_t seed = 0;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

RunContext open_run(const Invocation& inv) {
  RunContext rc{Section(read_json(inv.config_path), ""), {}, 0};
  std::string out = rc.root.str("out", "out/" + inv.command);
  if (!inv.out_override.empty()) {
    out = inv.out_override;
  }
  rc.seed = rc.root.uint("seed", 0);
  if (inv.has_seed) {
    rc.seed = inv.seed_override;
  }
  rc.out = out;
  return rc;
}

/// Finishes config validation, then creates the output directory and writes
/// the provenance file. Nothing touches the disk before this point.
void commit(RunContext& rc, const std::string& command) {
  rc.root.finish();
  json resolved = rc.root.resolved();
  resolved["out"] = rc.out.string();
  resolved["seed"] = rc.seed;
  fs::create_directories(rc.out);
  json prov;
  prov["command"] = command;
  prov["version"] = LFT_VERSION;
  prov["seed"] = rc.seed;
  prov["config"] = resolved;
  std::ofstream(rc.out / "provenance.json") << prov.dump(2) << "\n";
}

template <class F>
void write_file(const fs::path& path, F&& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot write " + path.string());
  }
  body(os);
}

fs::path existing_file(Section& s, const std::string& key, const std::string& what) {
  const std::string p = s.str(key, "");
  if (p.empty()) {
    throw ConfigError("config key '" + key + "' (" + what + ") is required");
  }
  return p;
}

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) {
    throw InputError(what + " '" + p.string() + "' does not exist");
  }
}

AdamWHyper read_optim(Section& s, AdamWHyper h) {
  h.lr = s.num("lr", h.lr);
  h.weight_decay = s.num("weight_decay", h.weight_decay);
  return h;
}

CorpusConfig read_corpus(Section& root, std::uint64_t* corpus_seed) {
  Section s = root.sub("corpus");
  CorpusConfig c;
  c.vocab_size = s.uint("vocab_size", c.vocab_size);
  c.n_tokens = s.uint("n_tokens", c.n_tokens);
  c.table_seed = s.uint("table_seed", c.table_seed);
  c.logit_scale = s.num("logit_scale", c.logit_scale);
  c.heldout_fraction = s.num("heldout_fraction", c.heldout_fraction);
  *corpus_seed = s.uint("seed", 0);
  root.adopt("corpus", s);
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ReplacementSpec read_spec(Section& root) {
  Section s = root.sub("spec");
  ReplacementSpec spec;
  spec.m = s.uint("m", spec.m);
  spec.n = s.uint("n", spec.n);
  root.adopt("spec", s);
  return spec;
}

StepRule read_rule(Section& s, StepRule fallback) {
  try {
    return parse_step_rule(s.str("step_rule", to_string(fallback)));
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

template <class F>
auto as_config(F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_toy2d(const Invocation& inv) {
  RunContext rc = open_run(inv);
  Section& root = rc.root;
  const ToyKind dataset = as_config([&] { return parse_toy_kind(root.str("dataset", "swapped_clusters")); });
  const std::size_t n_pairs = root.uint("n_pairs", 16);
  const double sigma = root.num("noise_sigma", 0.25);
  const std::uint64_t data_seed = root.uint("data_seed", 0);
  ToyRunConfig base = default_toy_config(FlowMethod::FW, 3);
  base.flow.steps = root.uint("steps", base.flow.steps);
  base.flow.batch_size = root.uint("batch_size", base.flow.batch_size);
  base.flow.lr_final_fraction = root.num("lr_final_fraction", base.flow.lr_final_fraction);
  base.flow.grad_clip = root.num("grad_clip", base.flow.grad_clip);
  base.flow.log_every = root.uint("log_every", base.flow.log_every);
  base.flow.step_rule = read_rule(root, base.flow.step_rule);
  base.flow.walk_times = as_config([&] { return parse_walk_times(root.str("walk_times", "per_row")); });
  base.flow.optim = read_optim(root, base.flow.optim);
  base.mlp.hidden = root.uint("hidden", base.mlp.hidden);
  base.k_infer = root.uint_list("k_infer", base.k_infer);
  const double alpha = root.num("alpha", base.flow.alpha);
  base.flow.seed = rc.seed;

  struct Run {
    FlowMethod method;
    std::size_t k_train;
    ToyKind dataset;
    double alpha;
  };
  std::vector<Run> runs;
  std::vector<Section> run_secs = root.objects("runs");
  if (run_secs.empty() && !root.has("runs")) {
    for (auto [m, k] : {std::pair{FlowMethod::SFM, 3}, {FlowMethod::FW, 1}, {FlowMethod::FW, 2},
                        {FlowMethod::FW, 3}, {FlowMethod::Hybrid, 3}}) {
      runs.push_back({m, static_cast<std::size_t>(k), dataset, alpha});
    }
  }
  json resolved_runs = json::array();
  for (Section& s : run_secs) {
    Run r{};
    r.method = as_config([&] { return parse_flow_method(s.str("method", "fw")); });
    r.k_train = s.uint("k_train", 3);
    r.dataset = as_config([&] { return parse_toy_kind(s.str("dataset", to_string(dataset))); });
    r.alpha = s.num("alpha", alpha);
    runs.push_back(r);
  }
  root.adopt("runs", run_secs);
  if (runs.empty()) {
    throw ConfigError("runs: need at least one run");
  }
  for (const Run& r : runs) {
    ToyRunConfig c = base;
    c.flow.method = r.method;
    c.flow.k_train = r.k_train;
    c.flow.alpha = r.alpha;
    as_config([&] {
      c.flow.validate();
      return 0;
    });
    if (c.k_infer.empty() || std::count(c.k_infer.begin(), c.k_infer.end(), 0u)) {
      throw ConfigError("k_infer must list positive step counts");
    }
  }
  if (n_pairs < 2 || !(sigma >= 0.0)) {
    throw ConfigError("n_pairs must be >= 2 and noise_sigma >= 0");
  }
  commit(rc, "toy2d");

  std::ostringstream diag;
  diag << "dataset,";
  write_diag_header(diag);
  for (const Run& r : runs) {
    const ToyDataset data = gen_pairs(r.dataset, n_pairs, sigma, data_seed);
    ToyRunConfig c = base;
    c.flow.method = r.method;
    c.flow.k_train = r.k_train;
    c.flow.alpha = r.alpha;
    const ToyRun run = run_toy(c, data);
    const std::string tag = to_string(r.dataset) + "_" + to_string(r.method) + "_k" + std::to_string(r.k_train);
    write_file(rc.out / ("train_" + tag + ".csv"), [&](std::ostream& os) { run.log.write_csv(os); });
    for (std::size_t i = 0; i < run.diags.size(); ++i) {
      diag << to_string(r.dataset) << ",";
      write_diag_row(diag, to_string(r.method), r.k_train, run.diags[i]);
      write_file(rc.out / ("traj_" + tag + "_infer" + std::to_string(run.diags[i].k_infer) + ".csv"),
                 [&](std::ostream& os) { write_trajectory_csv(os, run.states[i]); });
    }
  }
  write_file(rc.out / "diagnostics.csv", [&](std::ostream& os) { os << diag.str(); });
  std::cout << diag.str();
  return 0;
}

int cmd_teacher(const Invocation& inv) {
  RunContext rc = open_run(inv);
  Section& root = rc.root;
  std::uint64_t corpus_seed = 0;
  const CorpusConfig cc = read_corpus(root, &corpus_seed);
  TeacherConfig tc;
  Section model = root.sub("model");
  tc.model.vocab_size = cc.vocab_size;
  tc.model.d_model = model.uint("d_model", tc.model.d_model);
  tc.model.n_layers = model.uint("n_layers", tc.model.n_layers);
  tc.model.n_heads = model.uint("n_heads", tc.model.n_heads);
  tc.model.context = model.uint("context", tc.model.context);
  tc.model.d_ff = model.uint("d_ff", tc.model.d_ff);
  root.adopt("model", model);
  tc.steps = root.uint("steps", tc.steps);
  tc.batch_seqs = root.uint("batch_seqs", tc.batch_seqs);
  tc.seq_len = root.uint("seq_len", tc.seq_len);
  tc.warmup = root.uint("warmup", tc.warmup);
  tc.lr_final_fraction = root.num("lr_final_fraction", tc.lr_final_fraction);
  tc.grad_clip = root.num("grad_clip", tc.grad_clip);
  tc.log_every = root.uint("log_every", tc.log_every);
  tc.eval_windows = root.uint("eval_windows", tc.eval_windows);
  tc.optim = read_optim(root, tc.optim);
  const std::string resume = root.str("resume", "");
  tc.seed = rc.seed;
  as_config([&] {
    tc.validate();
    return 0;
  });
  if (!resume.empty()) {
    require_exists(resume, "resume checkpoint");
  }
  commit(rc, "teacher");

  const Corpus corpus = make_corpus(cc, corpus_seed);
  Teacher teacher = resume.empty() ? init_teacher(tc) : load_teacher(resume);
  const TeacherLog log = train_teacher(teacher, corpus, tc);
  save_teacher(rc.out / "teacher.lftm", teacher);
  write_file(rc.out / "train_log.csv", [&](std::ostream& os) { log.write_csv(os); });
  const double ppl = heldout_perplexity(*teacher.model, corpus.heldout(), tc.seq_len, tc.eval_windows);
  char buf[160];
  std::snprintf(buf, sizeof buf, "step %zu held-out ppl %.4f (source floor %.4f, uniform %zu)\n", teacher.step, ppl,
                std::exp(corpus.heldout_entropy), cc.vocab_size);
  std::cout << buf;
  return 0;
}

int cmd_dump_latents(const Invocation& inv) {
  RunContext rc = open_run(inv);
  Section& root = rc.root;
  const fs::path teacher_path = existing_file(root, "teacher", "teacher checkpoint");
  std::uint64_t corpus_seed = 0;
  const CorpusConfig cc = read_corpus(root, &corpus_seed);
  const std::string split = root.str("split", "train");
  const std::size_t seq_len = root.uint("seq_len", 64);
  const std::size_t max_tokens = root.uint("max_tokens", 4096);
  if (split != "train" && split != "heldout") {
    throw ConfigError("split must be 'train' or 'heldout'");
  }
  if (seq_len == 0 || max_tokens < seq_len) {
    throw ConfigError("need seq_len > 0 and max_tokens >= seq_len");
  }
  require_exists(teacher_path, "teacher checkpoint");
  commit(rc, "dump-latents");

  const Teacher teacher = load_teacher(teacher_path);
  const Corpus corpus = make_corpus(cc, corpus_seed);
  NoGradGuard no_grad;
  const Windows w =
      contiguous_windows(split == "train" ? corpus.train() : corpus.heldout(), seq_len, max_tokens / seq_len);
  const auto out = teacher.model->forward(w.inputs, seq_len);
  save_latent_dump(rc.out / "latents.lftd", make_latent_dump(out.latents));
  std::cout << "dumped " << out.latents.size() << " latent states x " << w.count * seq_len << " tokens\n";
  return 0;
}

int cmd_recouple(const Invocation& inv) {
  RunContext rc = open_run(inv);
  Section& root = rc.root;
  const fs::path dump_path = existing_file(root, "dump", "latent dump");
  const std::size_t o_m = root.uint("o_m", 256);
  const std::size_t n_batches = root.uint("n_batches", 8);
  const CostMetric metric = as_config([&] { return parse_cost_metric(root.str("metric", "squared_euclidean")); });
  if (o_m == 0 || n_batches == 0) {
    throw ConfigError("o_m and n_batches must be positive");
  }
  require_exists(dump_path, "latent dump");
  commit(rc, "recouple");

  const LatentDump dump = load_latent_dump(dump_path);
  const auto entries = recoupling_matrix(dump, o_m, n_batches, metric, rc.seed);
  write_file(rc.out / "recoupling.csv", [&](std::ostream& os) { write_recoupling_csv(os, entries); });
  write_recoupling_csv(std::cout, entries);
  return 0;
}

// Student checkpoints hold the replacement operator plus its spec.
void save_student(const fs::path& path, const StudentModel& s) {
  ParamList params;
  double kind = 0.0;
  if (s.flow_layer()) {
    params = s.flow_layer()->named_parameters();
    kind = 2.0;
  } else if (s.regression_layer()) {
    params = s.regression_layer()->named_parameters();
    kind = 1.0;
  }
  params.emplace_back("meta.kind", Tensor::scalar(kind));
  params.emplace_back("meta.m", Tensor::scalar(static_cast<double>(s.spec().m)));
  params.emplace_back("meta.n", Tensor::scalar(static_cast<double>(s.spec().n)));
  params.emplace_back("meta.step_rule", Tensor::scalar(s.step_rule() == StepRule::Euler ? 0.0 : 1.0));
  save_checkpoint(path, params);
}

StudentModel load_student(const fs::path& path, const MicroTransformer& teacher) {
  const ParamList params = load_checkpoint(path);
  const auto kind = static_cast<int>(find_param(params, "meta.kind").item());
  ReplacementSpec spec{static_cast<std::size_t>(find_param(params, "meta.m").item()),
                       static_cast<std::size_t>(find_param(params, "meta.n").item())};
  spec.validate(teacher.config().n_layers);
  const StepRule rule = find_param(params, "meta.step_rule").item() == 0.0 ? StepRule::Euler : StepRule::Midpoint;
  if (kind == 2) {
    const Tensor& cond_in = find_param(params, "flow.cond.in.weight");
    Rng rng(0);
    auto layer = std::make_unique<DitVelocityLayer>(teacher.layer(spec.m), rng, cond_in.dim(1), cond_in.dim(0) / 2);
    assign_params(layer->named_parameters(), params);
    return StudentModel::flow(teacher, spec, std::move(layer), rule);
  }
  if (kind == 1) {
    auto layer = std::make_unique<RegressionLayer>(teacher.layer(spec.m));
    assign_params(layer->named_parameters(), params);
    return StudentModel::regression(teacher, spec, std::move(layer));
  }
  return StudentModel::skip(teacher, spec);
}

int cmd_distill(const Invocation& inv) {
  RunContext rc = open_run(inv);
  Section& root = rc.root;
  const fs::path teacher_path = existing_file(root, "teacher", "teacher checkpoint");
  std::uint64_t corpus_seed = 0;
  const CorpusConfig cc = read_corpus(root, &corpus_seed);
  DistillConfig dc = default_distill_config();
  dc.spec = read_spec(root);
  dc.seq_len = root.uint("seq_len", dc.seq_len);
  dc.budget_tokens = root.uint("budget_tokens", dc.budget_tokens);
  dc.eval_windows = root.uint("eval_windows", dc.eval_windows);
  dc.val_windows = root.uint("val_windows", dc.val_windows);
  dc.cond_hidden = root.uint("cond_hidden", dc.cond_hidden);
  dc.k_infer = root.uint_list("k_infer", dc.k_infer);
  dc.flow.k_train = root.uint("k_train", dc.flow.k_train);
  dc.flow.alpha = root.num("alpha", dc.flow.alpha);
  dc.flow.steps = root.uint("steps", dc.flow.steps);
  dc.flow.batch_size = root.uint("batch_tokens", dc.flow.batch_size);
  dc.flow.lr_final_fraction = root.num("lr_final_fraction", dc.flow.lr_final_fraction);
  dc.flow.grad_clip = root.num("grad_clip", dc.flow.grad_clip);
  dc.flow.log_every = root.uint("log_every", dc.flow.log_every);
  dc.flow.step_rule = read_rule(root, dc.flow.step_rule);
  dc.flow.walk_times = as_config([&] { return parse_walk_times(root.str("walk_times", "per_row")); });
  dc.flow.optim = read_optim(root, dc.flow.optim);
  dc.flow.seed = rc.seed;
  const std::vector<std::string> methods =
      root.str_list("methods", {"skip", "regression", "sfm", "fw"});
  const bool nested_skips = root.flag("nested_skips", true);
  for (const std::string& m : methods) {
    if (m != "skip" && m != "regression") {
      as_config([&] { return parse_flow_method(m); });
    }
  }
  if (methods.empty()) {
    throw ConfigError("methods: need at least one method");
  }
  require_exists(teacher_path, "teacher checkpoint");
  const Teacher teacher = load_teacher(teacher_path);
  as_config([&] {
    dc.validate(teacher.model->config().n_layers);
    return 0;
  });
  commit(rc, "distill");

  const Corpus corpus = make_corpus(cc, corpus_seed);
  const MicroTransformer& t = *teacher.model;
  const LatentPairs train = extract_pairs(t, corpus.train(), dc.spec, dc.seq_len, dc.budget_tokens / dc.seq_len);
  const LatentPairs val = extract_pairs(t, corpus.heldout(), dc.spec, dc.seq_len, dc.val_windows);
  const LatentPairs held = extract_pairs(t, corpus.heldout(), dc.spec, dc.seq_len, dc.eval_windows);

  std::ostringstream csv;
  write_eval_header(csv);
  if (nested_skips) {
    for (std::size_t j = dc.spec.m; j < dc.spec.n; ++j) {
      const ReplacementSpec s{dc.spec.m, j};
      const LatentPairs h = extract_pairs(t, corpus.heldout(), s, dc.seq_len, dc.eval_windows);
      write_eval_row(csv, evaluate_at(baseline_skip(t, s), h, 0, "skip"));
    }
  }
  for (const std::string& m : methods) {
    if (m == "skip") {
      write_eval_row(csv, evaluate_at(baseline_skip(t, dc.spec), held, 0, "skip"));
      continue;
    }
    TrainLog log;
    StudentModel student = baseline_skip(t, dc.spec);
    std::string label = m;
    if (m == "regression") {
      student = baseline_regression(t, train, val, dc, &log);
    } else {
      DistillConfig c = dc;
      c.flow.method = parse_flow_method(m);
      student = train_lft(t, train, val, c, &log);
      label = "lft-" + m;
    }
    write_file(rc.out / ("train_log_" + m + ".csv"), [&](std::ostream& os) { log.write_csv(os); });
    save_student(rc.out / ("student_" + m + ".lftm"), student);
    for (const EvalReport& r : evaluate(student, held, dc.k_infer, label)) {
      write_eval_row(csv, r);
    }
  }
  write_file(rc.out / "eval.csv", [&](std::ostream& os) { os << csv.str(); });
  std::cout << csv.str();
  return 0;
}

int cmd_eval(const Invocation& inv) {
  RunContext rc = open_run(inv);
  Section& root = rc.root;
  const fs::path teacher_path = existing_file(root, "teacher", "teacher checkpoint");
  std::uint64_t corpus_seed = 0;
  const CorpusConfig cc = read_corpus(root, &corpus_seed);
  const std::string student_path = root.str("student", "");
  const std::string method = root.str("method", student_path.empty() ? "teacher" : "student");
  const bool explicit_spec = root.has("spec");
  const ReplacementSpec spec = read_spec(root);
  const std::vector<std::size_t> k_infer = root.uint_list("k_infer", {1, 2, 3, 4, 8});
  const std::size_t seq_len = root.uint("seq_len", 64);
  const std::size_t eval_windows = root.uint("eval_windows", 32);
  if (student_path.empty() && method != "teacher" && method != "skip") {
    throw ConfigError("method '" + method + "' needs a student checkpoint (or use teacher|skip)");
  }
  if (k_infer.empty() || std::count(k_infer.begin(), k_infer.end(), 0u) || seq_len == 0 || eval_windows == 0) {
    throw ConfigError("k_infer must list positive step counts; seq_len and eval_windows must be positive");
  }
  require_exists(teacher_path, "teacher checkpoint");
  if (!student_path.empty()) {
    require_exists(student_path, "student checkpoint");
  }
  const Teacher teacher = load_teacher(teacher_path);
  const MicroTransformer& t = *teacher.model;
  // a student checkpoint carries its own spec; "spec" then only cross-checks it
  StudentModel student = student_path.empty() ? StudentModel::teacher(t, as_config([&] {
    spec.validate(t.config().n_layers);
    return spec;
  }))
                                              : load_student(student_path, t);
  if (!student_path.empty() && explicit_spec && (student.spec().m != spec.m || student.spec().n != spec.n)) {
    throw ConfigError("spec (" + std::to_string(spec.m) + ", " + std::to_string(spec.n) +
                      ") differs from the student checkpoint's (" + std::to_string(student.spec().m) + ", " +
                      std::to_string(student.spec().n) + ")");
  }
  if (student_path.empty() && method == "skip") {
    student = StudentModel::skip(t, spec);
  }
  commit(rc, "eval");

  const Corpus corpus = make_corpus(cc, corpus_seed);
  const LatentPairs held = extract_pairs(t, corpus.heldout(), student.spec(), seq_len, eval_windows);
  std::ostringstream csv;
  write_eval_header(csv);
  for (const EvalReport& r : evaluate(student, held, k_infer, method)) {
    write_eval_row(csv, r);
  }
  write_file(rc.out / "eval.csv", [&](std::ostream& os) { os << csv.str(); });
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent flow transformer experiments"};
  app.set_version_flag("--version", std::string(LFT_VERSION));
  app.require_subcommand(1);
  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"toy2d", "Train flow methods on paired 2-D toy data and write trajectory diagnostics"},
      {"teacher", "Train the micro-transformer teacher on the synthetic corpus"},
      {"dump-latents", "Write the teacher's per-layer latents for a corpus split"},
      {"recouple", "Compute the recoupling ratio for every latent pair of a dump"},
      {"distill", "Replace a block of teacher layers and compare students with baselines"},
      {"eval", "Evaluate the teacher, a skip baseline or a saved student"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", inv.config_path, "JSON config file")->required();
    sub->add_option("--out", inv.out_override, "Output directory (overrides 'out')");
    sub->add_option("--seed", inv.seed_override, "Global seed (overrides 'seed')")
        ->each([&](const std::string&) { inv.has_seed = true; });
    sub->callback([&inv, name = name] { inv.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (inv.command == "toy2d") {
      return cmd_toy2d(inv);
    }
    if (inv.command == "teacher") {
      return cmd_teacher(inv);
    }
    if (inv.command == "dump-latents") {
      return cmd_dump_latents(inv);
    }
    if (inv.command == "recouple") {
      return cmd_recouple(inv);
    }
    if (inv.command == "distill") {
      return cmd_distill(inv);
    }
    if (inv.command == "eval") {
      return cmd_eval(inv);
    }
  } catch (const ConfigError& e) {
    std::cerr << "lft " << inv.command << ": config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "lft " << inv.command << ": input error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "lft " << inv.command << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "lft " << inv.command << ": error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "lft: unknown command\n";
  return 2;
}
