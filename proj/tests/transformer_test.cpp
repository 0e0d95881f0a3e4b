#include <doctest.h>

#include <cmath>
#include <random>

#include "bgen/rng.hpp"
#include "bgen/transformer.hpp"
#include "test_world.hpp"

using namespace bgen;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.values() == b.values();
}

}  // namespace

TEST_CASE("transformer: config validation") {
  ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.heads = 3;  // 64 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.d_ff = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ModelConfig{};
  cfg.layers = 0;  // a headless stack is legal (head directly on embeddings)
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("transformer: random init is seeded and follows the conventions") {
  Vocabulary v = testworld::vocab();
  ModelConfig cfg = testworld::tiny_config(v);
  Parameters a = init_random(cfg);
  Parameters b = init_random(cfg);
  REQUIRE(a.names() == b.names());
  for (const std::string& name : a.names()) CHECK(tensors_equal(a.at(name), b.at(name)));

  cfg.seed = 8;
  Parameters c = init_random(cfg);
  bool any_diff = false;
  for (const std::string& name : a.names()) any_diff = any_diff || !tensors_equal(a.at(name), c.at(name));
  CHECK(any_diff);

  for (const std::string& name : a.names()) {
    const Tensor& t = a.at(name);
    if (name.size() > 9 && name.compare(name.size() - 9, 9, "norm.gain") == 0) {
      for (double x : t.values()) CHECK(x == 1.0);
    } else if (name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
      for (double x : t.values()) CHECK(x == 0.0);
    } else {
      CHECK(all_finite(t));
      CHECK(t.requires_grad());
    }
  }

  // Registry shapes match the config.
  auto shapes = parameter_shapes(cfg);
  CHECK(shapes.at("embed.token") == std::vector<int>{cfg.vocab_size, cfg.d_model});
  CHECK(shapes.at("layer.0.ffn.in.weight") == std::vector<int>{cfg.d_model, cfg.d_ff});
  CHECK(shapes.count("layer.1.attn.q.weight") == 0);  // only 1 layer configured
  CHECK(shapes.count("head.out.weight") == 0);        // tied head by default
  cfg.untie_head = true;
  CHECK(parameter_shapes(cfg).at("head.out.weight") == std::vector<int>{cfg.d_model, cfg.vocab_size});
}

TEST_CASE("transformer: hybrid init partitions, transfers, and flags conflicts") {
  Vocabulary v = testworld::vocab();
  ModelConfig cfg = testworld::tiny_config(v);
  Parameters base = init_random(cfg);

  SUBCASE("transfer from itself is a copy") {
    TransferManifest manifest;
    Parameters h = init_hybrid(cfg, &base, &base, &manifest);
    for (const std::string& name : base.names()) CHECK(tensors_equal(h.at(name), base.at(name)));
    REQUIRE(manifest.size() == base.names().size());
    for (const std::string& name : base.names()) {
      CHECK(manifest.at(name) == (is_text_side(name) ? "text" : "visual"));
    }
  }

  SUBCASE("visual-only transfer randomizes the text side") {
    ModelConfig cfg2 = cfg;
    cfg2.seed = 99;
    TransferManifest manifest;
    Parameters h = init_hybrid(cfg2, nullptr, &base, &manifest);
    CHECK(tensors_equal(h.at("visual.feat.weight"), base.at("visual.feat.weight")));
    CHECK(tensors_equal(h.at("visual.geo.weight"), base.at("visual.geo.weight")));
    CHECK(tensors_equal(h.at("embed.position"), base.at("embed.position")));
    CHECK(tensors_equal(h.at("embed.segment"), base.at("embed.segment")));
    CHECK_FALSE(tensors_equal(h.at("embed.token"), base.at("embed.token")));
    CHECK_FALSE(tensors_equal(h.at("layer.0.attn.q.weight"), base.at("layer.0.attn.q.weight")));
    CHECK(manifest.at("embed.token") == "random");
    CHECK(manifest.at("visual.feat.weight") == "visual");
    // Fresh random side matches a plain random init of the same seed.
    Parameters r = init_random(cfg2);
    CHECK(tensors_equal(h.at("embed.token"), r.at("embed.token")));
    CHECK(tensors_equal(h.at("head.dense.weight"), r.at("head.dense.weight")));
  }

  SUBCASE("manifest partitions every tensor exactly once") {
    TransferManifest manifest;
    Parameters h = init_hybrid(cfg, &base, nullptr, &manifest);
    auto names = h.names();
    REQUIRE(manifest.size() == names.size());
    for (const std::string& name : names) {
      REQUIRE(manifest.count(name) == 1);
      CHECK(manifest.at(name) == (is_text_side(name) ? "text" : "random"));
    }
  }

  SUBCASE("shape conflicts are rejected by tensor name") {
    ModelConfig bigger = cfg;
    bigger.vocab_size = cfg.vocab_size + 4;
    CHECK_THROWS_WITH_AS(init_hybrid(bigger, &base, nullptr, nullptr),
                         doctest::Contains("embed.token"), std::invalid_argument);
  }
}

TEST_CASE("transformer: attention over a single position is the value path") {
  Vocabulary v = testworld::vocab();
  Model m = make_model(testworld::tiny_config(v));
  std::mt19937_64 rng(4);
  Tensor x = Tensor::zeros({1, m.config.d_model});
  for (double& val : x.values()) val = gaussian(rng);

  std::vector<Tensor> probs;
  Tensor out = multi_head_attention(m, 0, x, &probs);
  REQUIRE(probs.size() == 2);
  for (const Tensor& p : probs) {
    REQUIRE(p.numel() == 1);
    CHECK(p.item() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // With the softmax collapsed to 1, the output is (x Wv + bv) Wo + bo.
  NoGrad ng;
  Tensor vproj = add_row(matmul(x, m.params.at("layer.0.attn.v.weight")), m.params.at("layer.0.attn.v.bias"));
  Tensor expect = add_row(matmul(vproj, m.params.at("layer.0.attn.out.weight")),
                          m.params.at("layer.0.attn.out.bias"));
  for (int j = 0; j < m.config.d_model; ++j) {
    CHECK(out.at(0, j) == doctest::Approx(expect.at(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("transformer: attention rows sum to one and ignore no position") {
  Vocabulary v = testworld::vocab();
  Model m = make_model(testworld::tiny_config(v));
  Sample s = testworld::mt_sample(v);
  ComposedInput in = compose_input(s, {v.id("rot")}, v.specifier("de"), embedding_tables(m.params));

  std::vector<Tensor> probs;
  self_attention_block(m, 0, in.x, &probs);
  REQUIRE(probs.size() == 2);
  for (const Tensor& p : probs) {
    for (int i = 0; i < p.rows(); ++i) {
      double row = 0;
      for (int j = 0; j < p.cols(); ++j) row += p.at(i, j);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  // No causal mask: perturbing the first position moves the last position's
  // output (and in fact every position's).
  Tensor base_out = encode(m, in);
  ComposedInput bumped = in;
  bumped.x = Tensor::from_values(in.x.shape(), in.x.values());
  bumped.x.at(0, 0) += 0.25;
  Tensor bumped_out = encode(m, bumped);
  const int last = in.x.rows() - 1;
  bool moved = false;
  for (int j = 0; j < m.config.d_model; ++j) {
    moved = moved || std::abs(bumped_out.at(last, j) - base_out.at(last, j)) > 1e-12;
  }
  CHECK(moved);
}

TEST_CASE("transformer: forward is a deterministic distribution over the vocabulary") {
  Vocabulary v = testworld::vocab();
  Model m = make_model(testworld::tiny_config(v));
  Sample s = testworld::visual_sample(v, true);
  ComposedInput in = compose_input(s, {s.tgt[0]}, v.specifier("de"), embedding_tables(m.params));

  Tensor logits = forward(m, in);
  REQUIRE(logits.cols() == v.size());
  Tensor p = softmax(logits, 1);
  double total = 0;
  for (int j = 0; j < p.cols(); ++j) total += p.at(0, j);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  Tensor again = forward(m, compose_input(s, {s.tgt[0]}, v.specifier("de"), embedding_tables(m.params)));
  CHECK(logits.values() == again.values());  // bit-identical
}

TEST_CASE("transformer: zero-layer model reduces to the head on the embeddings") {
  // d_model=2 with hand-set tables so the whole path fits scalar arithmetic.
  Vocabulary v = Vocabulary::build({"w"}, {"en"});  // PAD..IMG, [EN], w -> V=8
  ModelConfig cfg;
  cfg.layers = 0;
  cfg.heads = 1;
  cfg.d_model = 2;
  cfg.d_ff = 4;
  cfg.vocab_size = v.size();
  cfg.max_positions = 8;
  cfg.d_v = 4;
  Model m = make_model(cfg);

  // Deterministic small values everywhere.
  int k = 0;
  for (const std::string& name : m.params.names()) {
    Tensor& t = m.params.at(name);
    for (double& val : t.values()) val = 0.01 * (++k % 7) - 0.02;
  }
  // Identity head dense + pass-through norm so logits = (LN∘gelu)(x_mask) E^T + b.
  m.params.at("head.dense.weight").values() = {1, 0, 0, 1};
  m.params.at("head.dense.bias").values() = {0, 0};
  m.params.at("head.norm.gain").values() = {1, 1};
  m.params.at("head.norm.bias").values() = {0, 0};

  Sample s;
  s.src = {v.id("w")};
  s.tgt = {v.id("w"), Vocabulary::kStop};
  ComposedInput in = compose_input(s, {}, v.specifier("en"), embedding_tables(m.params));
  REQUIRE(in.mask_index == 3);  // [EN] w [SEP] [MASK]
  Tensor logits = forward(m, in);

  // Scalar recomputation from the raw tables.
  const Tensor& tok = m.params.at("embed.token");
  const Tensor& pos = m.params.at("embed.position");
  const Tensor& seg = m.params.at("embed.segment");
  double x0 = tok.at(Vocabulary::kMask, 0) + pos.at(3, 0) + seg.at(kSegTgt, 0);
  double x1 = tok.at(Vocabulary::kMask, 1) + pos.at(3, 1) + seg.at(kSegTgt, 1);
  auto gelu_scalar = [](double t) {
    return 0.5 * t * (1.0 + std::tanh(0.7978845608028654 * (t + 0.044715 * t * t * t)));
  };
  double h0 = gelu_scalar(x0), h1 = gelu_scalar(x1);
  const double mean = (h0 + h1) / 2;
  const double var = ((h0 - mean) * (h0 - mean) + (h1 - mean) * (h1 - mean)) / 2;
  const double inv = 1.0 / std::sqrt(var + 1e-12);
  h0 = (h0 - mean) * inv;
  h1 = (h1 - mean) * inv;
  const Tensor& bias = m.params.at("head.out.bias");
  for (int t = 0; t < v.size(); ++t) {
    const double expect = h0 * tok.at(t, 0) + h1 * tok.at(t, 1) + bias.values()[t];
    CHECK(logits.at(0, t) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("transformer: untied head uses its own output matrix") {
  Vocabulary v = testworld::vocab();
  ModelConfig cfg = testworld::tiny_config(v);
  cfg.untie_head = true;
  Model m = make_model(cfg);
  CHECK(m.params.has("head.out.weight"));
  Sample s = testworld::mt_sample(v);
  ComposedInput in = compose_input(s, {}, v.specifier("de"), embedding_tables(m.params));
  Tensor logits = forward(m, in);
  CHECK(logits.cols() == v.size());
  CHECK(all_finite(logits));
}

TEST_CASE("transformer: uniform model scores ln V per example and losses add") {
  Vocabulary v = testworld::vocab();
  ModelConfig cfg = testworld::tiny_config(v);
  Model m = make_model(cfg);
  for (const std::string& name : m.params.names()) {
    for (double& val : m.params.at(name).values()) val = 0.0;
  }

  Sample s = testworld::mt_sample(v);
  std::vector<MaskedExample> all;
  for (const UnrolledExample& ex : unroll(s, 0)) all.push_back(resolve(s, v.specifier("de"), ex));
  REQUIRE(all.size() == 3);

  Tensor one = mlm_loss(m, {all[0]});
  CHECK(one.item() == doctest::Approx(std::log(static_cast<double>(v.size()))).epsilon(1e-12));

  // Prefix/suffix split adds exactly (same left-fold summation order).
  Tensor whole = mlm_loss(m, all);
  std::vector<MaskedExample> a(all.begin(), all.begin() + 2), b(all.begin() + 2, all.end());
  CHECK(whole.item() == mlm_loss(m, a).item() + mlm_loss(m, b).item());

  CHECK_THROWS_AS(mlm_loss(m, {}), std::invalid_argument);
}

TEST_CASE("transformer: order information enters only through positions and geometry") {
  Vocabulary v = testworld::vocab();
  ModelConfig cfg = testworld::tiny_config(v);
  Model m = make_model(cfg);
  for (double& val : m.params.at("embed.position").values()) val = 0.0;

  Sample s = testworld::mt_sample(v, "red ball blue", "rot kugel blau");
  Sample permuted = s;
  std::swap(permuted.src[0], permuted.src[2]);
  Tensor base = forward(m, compose_input(s, {}, v.specifier("de"), embedding_tables(m.params)));
  Tensor perm = forward(m, compose_input(permuted, {}, v.specifier("de"), embedding_tables(m.params)));
  double still = 0;
  for (int j = 0; j < v.size(); ++j) still = std::max(still, std::abs(perm.at(0, j) - base.at(0, j)));
  CHECK(still < 1e-12);  // only float reassociation noise remains

  // With live positional embeddings the permutation is visible: the gap must
  // clear the reassociation noise floor by orders of magnitude.
  Model m2 = make_model(cfg);
  Tensor base2 = forward(m2, compose_input(s, {}, v.specifier("de"), embedding_tables(m2.params)));
  Tensor perm2 = forward(m2, compose_input(permuted, {}, v.specifier("de"), embedding_tables(m2.params)));
  double diff = 0;
  for (int j = 0; j < v.size(); ++j) diff = std::max(diff, std::abs(perm2.at(0, j) - base2.at(0, j)));
  CHECK(diff > 1e-12);
}

TEST_CASE("transformer: gradients check out on a full small model") {
  Vocabulary v = testworld::vocab();
  ModelConfig cfg = testworld::tiny_config(v);  // 1 layer, d_model 8
  Model m = make_model(cfg);
  Sample s = testworld::visual_sample(v, true);
  std::vector<MaskedExample> batch;
  for (const UnrolledExample& ex : unroll(s, 0)) batch.push_back(resolve(s, v.specifier("de"), ex));

  // Fresh-init weights (std 0.02) leave many true gradients below the
  // finite-difference noise floor; check at a scaled-up parameter point where
  // every coordinate's gradient is well resolved.
  for (const std::string& name : m.params.names()) {
    if (name.find("norm.") != std::string::npos) continue;
    for (double& val : m.params.at(name).values()) val *= 12.0;
  }
  std::vector<Tensor> params;
  for (const std::string& name : m.params.names()) params.push_back(m.params.at(name));
  auto f = [&]() { return mlm_loss(m, batch); };
  CHECK(grad_check(f, params, 3e-5) < 1e-6);
}
