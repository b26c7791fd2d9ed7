// Python bindings: numpy arrays in and out, library errors mapped to
// ValueError (bad input) and RuntimeError (everything else).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "lft/corpus.hpp"
#include "lft/error.hpp"
#include "lft/io.hpp"
#include "lft/metrics.hpp"
#include "lft/teacher.hpp"
#include "lft/toy2d.hpp"
#include "lft/transport.hpp"

namespace py = pybind11;
using namespace lft;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I32Array = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const F64Array& a) {
  if (a.ndim() < 1 || a.ndim() > 2) {
    throw InputError("expected a 1-D or 2-D array");
  }
  Shape shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) {
    shape.push_back(static_cast<std::size_t>(a.shape(i)));
  }
  return Tensor::from(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

std::vector<std::int32_t> to_tokens(const I32Array& a) { return {a.data(), a.data() + a.size()}; }

py::array_t<std::int32_t> tokens_to_numpy(const std::vector<std::int32_t>& v) {
  py::array_t<std::int32_t> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict diag_dict(const TrajectoryDiag& d) {
  py::dict out;
  out["k_infer"] = d.k_infer;
  out["endpoint_nmse"] = d.endpoint_nmse;
  out["pair_preservation"] = d.pair_preservation;
  out["straightness"] = d.straightness;
  return out;
}

/// A trained toy velocity field together with the data it was trained on.
struct PyToyRun {
  ToyRun run;
  ToyDataset data;
  StepRule rule = StepRule::Midpoint;
};

struct PyTeacher {
  Teacher teacher;
};

}  // namespace

PYBIND11_MODULE(_lft, m) {
  m.doc() = "Latent flow transformer core (float64 C++ implementation)";
  m.attr("__version__") = LFT_VERSION;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  // transport
  m.def(
      "cost_matrix",
      [](const F64Array& src, const F64Array& dst, const std::string& metric) {
        const CostMatrix c = cost_matrix(to_tensor(src), to_tensor(dst), parse_cost_metric(metric));
        return to_numpy(Tensor::from({c.n, c.n}, c.entries));
      },
      py::arg("src"), py::arg("dst"), py::arg("metric") = "squared_euclidean");
  m.def(
      "ot_assign",
      [](const F64Array& cost) {
        const Tensor c = to_tensor(cost);
        if (c.rank() != 2 || c.dim(0) != c.dim(1)) {
          throw InputError("ot_assign: cost must be a square matrix");
        }
        CostMatrix cm;
        cm.n = c.dim(0);
        cm.entries.assign(c.data().begin(), c.data().end());
        const AssignmentPlan plan = ot_assign(cm);
        return py::make_tuple(plan.perm, plan.total_cost);
      },
      py::arg("cost"), "Minimum-cost matching; returns (perm, total_cost) with perm[i] matched to source i.");
  m.def(
      "recoupling_ratio",
      [](const std::vector<std::pair<F64Array, F64Array>>& batches, const std::string& metric) {
        std::vector<std::pair<Tensor, Tensor>> b;
        for (const auto& [src, dst] : batches) {
          b.emplace_back(to_tensor(src), to_tensor(dst));
        }
        const RecouplingReport r = recoupling_ratio(b, parse_cost_metric(metric));
        py::dict out;
        out["ratio"] = r.ratio;
        out["batch_size"] = r.batch_size;
        out["n_batches"] = r.n_batches;
        out["fixed_fractions"] = r.fixed_fractions;
        return out;
      },
      py::arg("batches"), py::arg("metric") = "squared_euclidean");

  // metrics
  m.def(
      "nmse", [](const F64Array& pred, const F64Array& target) { return nmse(to_tensor(pred), to_tensor(target)); },
      py::arg("pred"), py::arg("target"));
  m.def(
      "kl_categorical",
      [](const F64Array& p, const F64Array& q) { return kl_categorical(to_tensor(p), to_tensor(q)); },
      py::arg("p_logits"), py::arg("q_logits"), "Mean over rows of KL(softmax(p) || softmax(q)).");
  m.def(
      "perplexity",
      [](const F64Array& logits, const I32Array& next) { return perplexity(to_tensor(logits), to_tokens(next)); },
      py::arg("logits"), py::arg("next_tokens"));

  // toy flows
  m.def(
      "gen_pairs",
      [](const std::string& kind, std::size_t n_pairs, double sigma, std::uint64_t seed) {
        const ToyDataset d = gen_pairs(parse_toy_kind(kind), n_pairs, sigma, seed);
        return py::make_tuple(to_numpy(d.x0), to_numpy(d.x1));
      },
      py::arg("kind"), py::arg("n_pairs") = 16, py::arg("noise_sigma") = 0.25, py::arg("seed") = 0);
  m.def(
      "pair_preservation",
      [](const F64Array& pred, const F64Array& targets) {
        return pair_preservation(to_tensor(pred), to_tensor(targets));
      },
      py::arg("pred"), py::arg("targets"));
  m.def(
      "straightness",
      [](const std::vector<F64Array>& states) {
        std::vector<Tensor> s;
        for (const auto& a : states) {
          s.push_back(to_tensor(a));
        }
        return straightness(to_trajectories(s));
      },
      py::arg("states"), "Mean arc-length / chord - 1 over walk states [k + 1] x [n, 2].");

  py::class_<PyToyRun, std::shared_ptr<PyToyRun>>(m, "ToyRun")
      .def_property_readonly("diagnostics",
                             [](const PyToyRun& r) {
                               py::list out;
                               for (const auto& d : r.run.diags) {
                                 out.append(diag_dict(d));
                               }
                               return out;
                             })
      .def_property_readonly("losses",
                             [](const PyToyRun& r) {
                               std::vector<double> out;
                               for (const auto& rec : r.run.log.records) {
                                 out.push_back(rec.loss);
                               }
                               return out;
                             })
      .def(
          "infer",
          [](const PyToyRun& r, const F64Array& x0, std::size_t k) {
            return to_numpy(lft_infer(*r.run.model, to_tensor(x0), k, r.rule));
          },
          py::arg("x0"), py::arg("k"))
      .def(
          "trajectory",
          [](const PyToyRun& r, std::size_t k) {
            std::vector<py::array_t<double>> out;
            for (const Tensor& s : lft_trajectory(*r.run.model, r.data.x0, k, r.rule)) {
              out.push_back(to_numpy(s));
            }
            return out;
          },
          py::arg("k"));
  m.def(
      "run_toy",
      [](const std::string& method, std::size_t k_train, const std::string& dataset, std::size_t n_pairs,
         double noise_sigma, std::size_t steps, std::size_t hidden, const std::vector<std::size_t>& k_infer,
         std::uint64_t seed, std::uint64_t data_seed, double alpha, const std::string& step_rule) {
        ToyRunConfig c = default_toy_config(parse_flow_method(method), k_train);
        c.flow.steps = steps;
        c.flow.seed = seed;
        c.flow.alpha = alpha;
        c.flow.step_rule = parse_step_rule(step_rule);
        c.mlp.hidden = hidden;
        c.k_infer = k_infer;
        auto r = std::make_shared<PyToyRun>();
        r->data = gen_pairs(parse_toy_kind(dataset), n_pairs, noise_sigma, data_seed);
        r->rule = c.flow.step_rule;
        py::gil_scoped_release release;
        r->run = run_toy(c, r->data);
        return r;
      },
      py::arg("method"), py::arg("k_train") = 3, py::arg("dataset") = "swapped_clusters", py::arg("n_pairs") = 16,
      py::arg("noise_sigma") = 0.25, py::arg("steps") = 20000, py::arg("hidden") = 128,
      py::arg("k_infer") = std::vector<std::size_t>{1, 3, 8}, py::arg("seed") = 0, py::arg("data_seed") = 0,
      py::arg("alpha") = 0.001, py::arg("step_rule") = "midpoint");

  // corpus and teacher
  m.def(
      "make_corpus",
      [](std::size_t vocab_size, std::size_t n_tokens, std::uint64_t table_seed, double logit_scale,
         double heldout_fraction, std::uint64_t seed) {
        CorpusConfig c{vocab_size, n_tokens, table_seed, logit_scale, heldout_fraction};
        const Corpus corpus = make_corpus(c, seed);
        py::dict out;
        out["tokens"] = tokens_to_numpy(corpus.tokens);
        out["train_end"] = corpus.train_end;
        out["heldout_entropy"] = corpus.heldout_entropy;
        return out;
      },
      py::arg("vocab_size") = 64, py::arg("n_tokens") = 200000, py::arg("table_seed") = 0,
      py::arg("logit_scale") = 2.5, py::arg("heldout_fraction") = 0.1, py::arg("seed") = 0);

  py::class_<PyTeacher, std::shared_ptr<PyTeacher>>(m, "Teacher")
      .def_property_readonly("config",
                             [](const PyTeacher& t) {
                               const MicroConfig& c = t.teacher.model->config();
                               py::dict out;
                               out["vocab_size"] = c.vocab_size;
                               out["d_model"] = c.d_model;
                               out["n_layers"] = c.n_layers;
                               out["n_heads"] = c.n_heads;
                               out["context"] = c.context;
                               out["d_ff"] = c.d_ff;
                               return out;
                             })
      .def_property_readonly("step", [](const PyTeacher& t) { return t.teacher.step; })
      .def(
          "forward",
          [](const PyTeacher& t, const I32Array& tokens, std::size_t seq_len) {
            const auto toks = to_tokens(tokens);
            NoGradGuard no_grad;
            const MicroTransformer::Output o = t.teacher.model->forward(toks, seq_len);
            std::vector<py::array_t<double>> latents;
            for (const Tensor& h : o.latents) {
              latents.push_back(to_numpy(h));
            }
            return py::make_tuple(to_numpy(o.logits), latents);
          },
          py::arg("tokens"), py::arg("seq_len"), "Returns (logits, latents) for whole windows of seq_len tokens.")
      .def(
          "heldout_perplexity",
          [](const PyTeacher& t, const I32Array& tokens, std::size_t seq_len, std::size_t max_windows) {
            return heldout_perplexity(*t.teacher.model, to_tokens(tokens), seq_len, max_windows);
          },
          py::arg("tokens"), py::arg("seq_len") = 64, py::arg("max_windows") = 32);
  m.def(
      "load_teacher",
      [](const std::filesystem::path& path) {
        auto t = std::make_shared<PyTeacher>();
        t->teacher = load_teacher(path);
        return t;
      },
      py::arg("path"));
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        py::dict out;
        for (const auto& [name, t] : load_checkpoint(path)) {
          out[py::str(name)] = to_numpy(t);
        }
        return out;
      },
      py::arg("path"), "All named float64 tensors of an .lftm checkpoint.");
}
