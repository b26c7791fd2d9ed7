#include <cmath>
#include <vector>

#include "doctest.h"
#include "lft/error.hpp"
#include "lft/gradcheck.hpp"
#include "lft/nets.hpp"
#include "support.hpp"

using namespace lft;
using lft::test::jitter;
using lft::test::max_abs_diff;
using lft::test::worst_param_error;

namespace {

MicroConfig tiny_config() {
  MicroConfig c;
  c.vocab_size = 11;
  c.d_model = 8;
  c.n_layers = 3;
  c.n_heads = 2;
  c.context = 8;
  c.d_ff = 16;
  return c;
}

}  // namespace

TEST_SUITE("nets") {

TEST_CASE("time features") {
  const Tensor f = time_features(Tensor::from({2}, {0.0, 0.5}), 4, 4.0);
  CHECK(f.shape() == Shape{2, 8});
  // (sin, cos) pairs per frequency
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f.at(0, 2 * i) == 0.0);
    CHECK(f.at(0, 2 * i + 1) == 1.0);
  }
  // lowest frequency is 1, highest is max_freq
  CHECK(f.at(1, 0) == doctest::Approx(std::sin(0.5)));
  CHECK(f.at(1, 1) == doctest::Approx(std::cos(0.5)));
  CHECK(f.at(1, 6) == doctest::Approx(std::sin(2.0)));
}

TEST_CASE("velocity mlp: zero-initialized output and gradients") {
  Rng rng(1);
  VelocityMlpConfig c;
  c.hidden = 12;
  VelocityMlp net(c, rng);
  const Tensor x = randn(rng, {5, 2});
  const Tensor t = rand_uniform(rng, {5});
  const Tensor v0 = net.forward(x, t);
  for (double v : v0.data()) {
    CHECK(v == 0.0);
  }
  jitter(net.named_parameters(), rng, 0.3);
  const Tensor y = randn(rng, {5, 2});
  CHECK(worst_param_error(net.named_parameters(), [&] { return sum(mul(net.forward(x, t), y)); }) < 1e-5);
  CHECK(grad_check([&](const Tensor& a) { return sum(mul(net.forward(a, t), y)); }, x) < 1e-5);
}

TEST_CASE("transformer layer: parallel residual and gradients") {
  Rng rng(2);
  const TransformerLayer L = TransformerLayer::init(rng, 8, 2, 16, 4);
  const Tensor h = randn(rng, {8, 8});
  CHECK(max_abs_diff(L.forward(h, 4), add(h, L.residual(h, 4))) < 1e-15);
  CHECK(L.parameter_count() == 4 * 8 + 4 * (8 * 8 + 8) + (8 * 16 + 16) + (16 * 8 + 8));
  const Tensor y = randn(rng, {8, 8});
  ParamList ps;
  L.append_params(ps, "l");
  CHECK(count_params(ps) == L.parameter_count());
  CHECK(worst_param_error(ps, [&] { return sum(mul(L.forward(h, 4), y)); }) < 1e-5);
  CHECK(grad_check([&](const Tensor& a) { return sum(mul(L.forward(a, 4), y)); }, h) < 1e-5);
}

TEST_CASE("dit velocity layer starts as the teacher layer") {
  Rng rng(3);
  const TransformerLayer L = TransformerLayer::init(rng, 8, 2, 16, 4);
  DitVelocityLayer dit(L, rng, 6, 3);
  const Tensor x = randn(rng, {8, 8});
  const Tensor t = rand_uniform(rng, {8});
  const Tensor v = dit.velocity(x, t, {x, 4});
  CHECK(max_abs_diff(v, L.residual(x, 4)) < 1e-13);
  // the clone is independent of the source layer
  Tensor w = dit.named_parameters().front().second;
  CHECK(w.node() != L.ln1_g.node());
  CHECK(dit.conditioning_parameter_count() == (6 * 6 + 6) + (6 * 48 + 48));
  CHECK(dit.parameter_count() == L.parameter_count() + dit.conditioning_parameter_count());
  CHECK_THROWS_AS(dit.velocity(x, Tensor::full({8}, 1.5), {x, 4}), ContractError);
}

TEST_CASE("dit velocity layer gradients") {
  Rng rng(4);
  const TransformerLayer L = TransformerLayer::init(rng, 8, 2, 16, 4);
  DitVelocityLayer dit(L, rng, 6, 3);
  jitter(dit.named_parameters(), rng, 0.1);
  const Tensor x = randn(rng, {8, 8});
  const Tensor ctx = randn(rng, {8, 8});
  const Tensor t = rand_uniform(rng, {8});
  const Tensor y = randn(rng, {8, 8});
  CHECK(worst_param_error(dit.named_parameters(), [&] { return sum(mul(dit.velocity(x, t, {ctx, 4}), y)); }) <
        1e-5);
  CHECK(grad_check([&](const Tensor& a) { return sum(mul(dit.velocity(a, t, {ctx, 4}), y)); }, x) < 1e-5);
}

TEST_CASE("micro transformer") {
  Rng rng(5);
  const MicroConfig c = tiny_config();
  MicroTransformer m(c, rng);
  const std::vector<std::int32_t> tokens{1, 4, 2, 9, 0, 3, 3, 7, 5, 10, 2, 1};
  const auto out = m.forward(tokens, 6);
  CHECK(out.logits.shape() == Shape{12, 11});
  REQUIRE(out.latents.size() == c.n_layers + 1);
  // the latent list is embed, then each layer output, and the head reads the last
  const Tensor h0 = m.embed(tokens, 6);
  CHECK(test::bitwise_equal(out.latents[0], h0));
  CHECK(test::bitwise_equal(out.latents[2], m.run_layers(h0, 0, 2, 6)));
  CHECK(test::bitwise_equal(out.logits, m.head(out.latents.back())));
  CHECK(test::bitwise_equal(m.run_layers(out.latents[1], 1, 3, 6), out.latents[3]));

  // causality: editing token 3 of the first sequence leaves positions 0..2 alone
  std::vector<std::int32_t> edited = tokens;
  edited[3] = 6;
  const auto out2 = m.forward(edited, 6);
  for (std::size_t i = 0; i < 3 * 11; ++i) {
    CHECK(out.logits.at(i) == out2.logits.at(i));
  }
  CHECK(out.logits.at(3 * 11) != out2.logits.at(3 * 11));
  for (std::size_t i = 6 * 11; i < 12 * 11; ++i) {
    CHECK(out.logits.at(i) == out2.logits.at(i));
  }

  CHECK(m.parameter_count() == count_params(m.named_parameters()));
  std::vector<std::int32_t> targets(12, 2);
  const ParamList ps = m.named_parameters();
  Tensor unembed = ps.back().second;
  CHECK(grad_check_param([&] { return cross_entropy(m.forward(tokens, 6).logits, targets); }, unembed) < 1e-5);
  Tensor tok = ps.front().second;
  CHECK(grad_check_param([&] { return cross_entropy(m.forward(tokens, 6).logits, targets); }, tok) < 1e-5);
  CHECK_THROWS(m.forward(std::vector<std::int32_t>{1, 2, 99}, 3));
}

TEST_CASE("assign_params") {
  Rng rng(6);
  MicroTransformer a(tiny_config(), rng);
  MicroTransformer b(tiny_config(), rng);
  assign_params(b.named_parameters(), a.named_parameters());
  const std::vector<std::int32_t> tokens{1, 2, 3, 4};
  CHECK(test::bitwise_equal(a.forward(tokens, 4).logits, b.forward(tokens, 4).logits));
  ParamList partial = a.named_parameters();
  partial.pop_back();
  CHECK_THROWS_AS(assign_params(b.named_parameters(), partial), InputError);
  ParamList wrong = a.named_parameters();
  wrong.front().second = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(assign_params(b.named_parameters(), wrong), InputError);
}

}  // TEST_SUITE
