#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mcnn/gradcheck.hpp"
#include "mcnn/model.hpp"
#include "oracles.hpp"

using namespace mcnn;

namespace {

ArchitectureConfig small_config(Variant v) {
  ArchitectureConfig cfg;
  cfg.variant = v;
  cfg.max_len = 30;
  cfg.k_rp = 3;
  cfg.word_dim = 5;
  cfg.feature_dim = 9;
  cfg.image_dim = 7;
  cfg.mlp_hidden = 11;
  cfg.conv_channels = {6, 7, 9};
  return cfg;
}

Vocabulary test_vocab() {
  Vocabulary v;
  for (int i = 0; i < 12; ++i) v.add("w" + std::to_string(i));
  return v;
}

EncodedSentence sentence_of(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                            int max_len = 30) {
  return encode_sentence(tokens, vocab, max_len);
}

std::vector<std::string> random_tokens(Rng& rng, int n) {
  std::vector<std::string> tokens;
  for (int i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(rng.below(12)));
  return tokens;
}

std::vector<double> param_values(const MatchModel<double>& m, const std::string& name) {
  return m.params.get(name).values;
}

// Straight-line re-computation of the matching score with explicit loops and
// the shared oracle helpers; structured independently of the library path.
double oracle_score(const MatchModel<double>& model, const std::vector<double>& feature,
                    const EncodedSentence& sent) {
  const auto& cfg = model.config;
  auto proj = oracle::affine(feature, param_values(model, "img_proj_w"),
                             param_values(model, "img_proj_b"), true);

  std::vector<std::vector<double>> rows;
  std::vector<bool> live;
  const auto& embed = model.params.get("embed");
  for (int p = 0; p < cfg.max_len; ++p) {
    int idx = sent.indices[p];
    if (idx == kPadIndex) {
      rows.emplace_back(cfg.word_dim, 0.0);
      live.push_back(false);
    } else {
      std::vector<double> row(cfg.word_dim);
      for (int c = 0; c < cfg.word_dim; ++c) row[c] = embed.at(idx - 1, c);
      rows.push_back(std::move(row));
      live.push_back(true);
    }
  }

  const int fusion = fusion_conv_index(cfg.variant);
  for (int layer = 1; layer <= 3; ++layer) {
    std::vector<double> fused;
    if (layer == fusion) fused = proj;
    auto conv = oracle::seq_conv(rows, live, param_values(model, "conv" + std::to_string(layer) + "_w"),
                                 param_values(model, "conv" + std::to_string(layer) + "_b"),
                                 cfg.k_rp, fused, true);
    rows = oracle::maxpool2(conv.rows);
    std::vector<bool> pooled_live;
    for (std::size_t i = 0; i + 1 < conv.live.size(); i += 2) {
      pooled_live.push_back(conv.live[i] || conv.live[i + 1]);
    }
    live = pooled_live;
  }

  std::vector<double> joint;
  if (cfg.variant == Variant::st) joint = proj;
  for (const auto& row : rows) joint.insert(joint.end(), row.begin(), row.end());

  auto hidden =
      oracle::affine(joint, param_values(model, "mlp_h_w"), param_values(model, "mlp_h_b"), true);
  auto out =
      oracle::affine(hidden, param_values(model, "mlp_s_w"), param_values(model, "mlp_s_b"), false);
  return out[0];
}

}  // namespace

TEST_CASE("shape_plan walks the canonical 30->28->14->12->6->4->2 sequence") {
  for (Variant v : all_variants()) {
    ArchitectureConfig cfg;  // canonical dims
    cfg.variant = v;
    ShapePlan plan = shape_plan(cfg);
    REQUIRE(plan.entries.size() == 6);
    std::vector<int> positions;
    for (const auto& e : plan.entries) positions.push_back(e.positions);
    CHECK(positions == std::vector<int>{28, 14, 12, 6, 4, 2});
    CHECK(plan.final_channels == 300);
    if (v == Variant::st) {
      CHECK(plan.joint_dim == 856);
    } else {
      CHECK(plan.joint_dim == 600);
    }
    // multimodal conv at the variant's fusion layer only
    int fusion = fusion_conv_index(v);
    for (int layer = 1; layer <= 3; ++layer) {
      auto kind = plan.entries[2 * (layer - 1)].kind;
      CHECK(kind == (layer == fusion ? LayerKind::multi_conv : LayerKind::conv));
    }
  }
}

TEST_CASE("shape_plan rejects max_len 10 at the third conv") {
  ArchitectureConfig cfg;
  cfg.max_len = 10;
  CHECK_THROWS_WITH_AS(shape_plan(cfg), doctest::Contains("conv layer 3"), ShapeError);
}

TEST_CASE("build_model shapes the multimodal filters per variant") {
  Vocabulary vocab = test_vocab();
  ArchitectureConfig canonical;

  SUBCASE("wd: first conv takes 3*50+256 inputs across 200 filters") {
    canonical.variant = Variant::wd;
    auto m = build_model<double>(canonical, vocab, 1);
    CHECK(m.params.get("conv1_w").shape == std::vector<int>{200, 406});
    CHECK(m.params.get("conv2_w").shape == std::vector<int>{300, 600});
  }
  SUBCASE("phs: second conv takes 3*200+256 inputs across 300 filters") {
    canonical.variant = Variant::phs;
    auto m = build_model<double>(canonical, vocab, 1);
    CHECK(m.params.get("conv1_w").shape == std::vector<int>{200, 150});
    CHECK(m.params.get("conv2_w").shape == std::vector<int>{300, 856});
  }
  SUBCASE("phl: third conv takes 3*300+256 inputs") {
    canonical.variant = Variant::phl;
    auto m = build_model<double>(canonical, vocab, 1);
    CHECK(m.params.get("conv3_w").shape == std::vector<int>{300, 1156});
  }
  SUBCASE("st: no conv ever sees the image dimension") {
    canonical.variant = Variant::st;
    auto m = build_model<double>(canonical, vocab, 1);
    CHECK(m.params.get("conv1_w").shape == std::vector<int>{200, 150});
    CHECK(m.params.get("conv2_w").shape == std::vector<int>{300, 600});
    CHECK(m.params.get("conv3_w").shape == std::vector<int>{300, 900});
  }
}

TEST_CASE("build_model is deterministic given the seed") {
  Vocabulary vocab = test_vocab();
  auto a = build_model<double>(small_config(Variant::phs), vocab, 42);
  auto b = build_model<double>(small_config(Variant::phs), vocab, 42);
  auto c = build_model<double>(small_config(Variant::phs), vocab, 43);
  CHECK(a.params.get("conv2_w").values == b.params.get("conv2_w").values);
  CHECK(a.params.get("conv2_w").values != c.params.get("conv2_w").values);
}

TEST_CASE("forward_joint output length matches the plan for every variant") {
  Vocabulary vocab = test_vocab();
  Rng rng(5);
  for (Variant v : all_variants()) {
    auto model = build_model<double>(small_config(v), vocab, 9);
    auto sent = sentence_of(vocab, random_tokens(rng, 12));
    std::vector<double> feature(model.config.feature_dim);
    for (auto& x : feature) x = rng.gaussian();
    auto joint = forward_joint(model, feature, sent);
    CHECK(static_cast<int>(joint.size()) == model.plan.joint_dim);
  }
}

TEST_CASE("st variant: joint starts with the exact image projection") {
  Vocabulary vocab = test_vocab();
  Rng rng(6);
  auto model = build_model<double>(small_config(Variant::st), vocab, 10);
  auto sent = sentence_of(vocab, random_tokens(rng, 8));
  std::vector<double> feature(model.config.feature_dim);
  for (auto& x : feature) x = rng.gaussian();

  auto proj = affine_forward(feature, model.params.get("img_proj_w"),
                             model.params.get("img_proj_b"), Act::relu);
  auto joint = forward_joint(model, feature, sent);
  for (int i = 0; i < model.config.image_dim; ++i) CHECK(joint[i] == proj[i]);
}

TEST_CASE("st variant with a zero image vector projects to ReLU of the bias") {
  Vocabulary vocab = test_vocab();
  auto model = build_model<double>(small_config(Variant::st), vocab, 11);
  auto& bias = model.params.get("img_proj_b");
  Rng rng(7);
  for (auto& b : bias.values) b = rng.uniform(-1, 1);

  std::vector<double> zero_feature(model.config.feature_dim, 0.0);
  auto sent = sentence_of(vocab, random_tokens(rng, 5));
  auto joint = forward_joint(model, zero_feature, sent);
  for (int i = 0; i < model.config.image_dim; ++i) {
    CHECK(joint[i] == std::max(0.0, bias.values[i]));
  }
}

TEST_CASE("truncating the last two live tokens only disturbs the final conv windows") {
  Vocabulary vocab = test_vocab();
  Rng rng(8);
  auto model = build_model<double>(small_config(Variant::wd), vocab, 12);
  auto tokens = random_tokens(rng, 30);
  auto full = sentence_of(vocab, tokens);
  auto truncated_tokens = std::vector<std::string>(tokens.begin(), tokens.end() - 2);
  auto truncated = sentence_of(vocab, truncated_tokens);

  std::vector<double> feature(model.config.feature_dim);
  for (auto& x : feature) x = rng.gaussian();
  PairTrace<double> trace_full, trace_cut;
  forward_joint(model, feature, full, &trace_full);
  forward_joint(model, feature, truncated, &trace_cut);

  const auto& conv_full = trace_full.maps[1];
  const auto& conv_cut = trace_cut.maps[1];
  // windows 0..25 read tokens 0..27 only; 26 and 27 reach tokens 28-29
  for (int i = 0; i < 26; ++i) {
    for (int c = 0; c < conv_full.channels; ++c) {
      CHECK(conv_full.at(i, c) == conv_cut.at(i, c));
    }
  }
  bool tail_differs = false;
  for (int i = 26; i < 28; ++i) {
    for (int c = 0; c < conv_full.channels; ++c) {
      tail_differs = tail_differs || conv_full.at(i, c) != conv_cut.at(i, c);
    }
  }
  CHECK(tail_differs);
}

TEST_CASE("score_pair is zero under an all-zero MLP and blocks conv gradients") {
  Vocabulary vocab = test_vocab();
  Rng rng(9);
  auto model = build_model<double>(small_config(Variant::phl), vocab, 13);
  for (const char* name : {"mlp_h_w", "mlp_h_b", "mlp_s_w", "mlp_s_b"}) {
    auto& arr = model.params.get(name);
    std::fill(arr.values.begin(), arr.values.end(), 0.0);
  }
  auto sent = sentence_of(vocab, random_tokens(rng, 10));
  std::vector<double> feature(model.config.feature_dim);
  for (auto& x : feature) x = rng.gaussian();

  model.params.zero_grad();
  PairTrace<double> trace;
  Rng no_drop(0);
  auto score = score_pair(model, feature, sent, RunMode::eval, 0.0, no_drop, &trace);
  CHECK(score.value == 0.0);
  backward_pair(model, trace, 1.0);
  for (int layer = 1; layer <= 3; ++layer) {
    for (double g : model.params.get("conv" + std::to_string(layer) + "_w").grad) {
      CHECK(g == 0.0);
    }
  }
}

TEST_CASE("eval-mode scoring is bit-deterministic") {
  Vocabulary vocab = test_vocab();
  Rng rng(10);
  auto model = build_model<double>(small_config(Variant::phs), vocab, 14);
  auto sent = sentence_of(vocab, random_tokens(rng, 9));
  std::vector<double> feature(model.config.feature_dim);
  for (auto& x : feature) x = rng.gaussian();
  double a = score_pair_eval(model, feature, sent).value;
  double b = score_pair_eval(model, feature, sent).value;
  CHECK(a == b);
}

TEST_CASE("score_pair equals the straight-line oracle for every variant") {
  Vocabulary vocab = test_vocab();
  for (Variant v : all_variants()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto model = build_model<double>(small_config(v), vocab, seed * 17);
      Rng rng(seed * 29);
      auto sent = sentence_of(vocab, random_tokens(rng, 4 + static_cast<int>(rng.below(26))));
      std::vector<double> feature(model.config.feature_dim);
      for (auto& x : feature) x = rng.gaussian();
      double got = score_pair_eval(model, feature, sent).value;
      double want = oracle_score(model, feature, sent);
      INFO(variant_name(v), " seed ", seed);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward without forward is a usage error") {
  Vocabulary vocab = test_vocab();
  auto model = build_model<double>(small_config(Variant::wd), vocab, 3);
  PairTrace<double> trace;
  CHECK_THROWS_AS(backward_pair(model, trace, 1.0), UsageError);
}

TEST_CASE("score_ensemble sums member scores exactly") {
  Vocabulary vocab = test_vocab();
  std::vector<MatchModel<double>> models;
  std::vector<double> constants = {0.2, -0.1, 0.4, 0.3};
  for (std::size_t i = 0; i < constants.size(); ++i) {
    auto m = build_model<double>(small_config(all_variants()[i]), vocab, 20 + i);
    for (const char* name : {"mlp_h_w", "mlp_h_b", "mlp_s_w"}) {
      auto& arr = m.params.get(name);
      std::fill(arr.values.begin(), arr.values.end(), 0.0);
    }
    m.params.get("mlp_s_b").values[0] = constants[i];
    models.push_back(std::move(m));
  }
  Rng rng(30);
  auto sent = sentence_of(vocab, random_tokens(rng, 7));
  std::vector<double> feature(models[0].config.feature_dim);
  for (auto& x : feature) x = rng.gaussian();

  std::vector<const MatchModel<double>*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  CHECK(score_ensemble(ptrs, feature, sent).value == doctest::Approx(0.8).epsilon(1e-15));

  std::vector<const MatchModel<double>*> one = {ptrs[0]};
  CHECK(score_ensemble(one, feature, sent).value == score_pair_eval(models[0], feature, sent).value);

  std::vector<const MatchModel<double>*> none;
  CHECK_THROWS_AS(score_ensemble(none, feature, sent), UsageError);
}

TEST_CASE("single-token perturbations stay inside the receptive-field windows") {
  Vocabulary vocab = test_vocab();
  auto model = build_model<double>(small_config(Variant::st), vocab, 31);
  Rng rng(32);
  auto tokens = random_tokens(rng, 30);
  auto base = sentence_of(vocab, tokens);
  std::vector<double> feature(model.config.feature_dim);
  for (auto& x : feature) x = rng.gaussian();
  PairTrace<double> base_trace;
  forward_joint(model, feature, base, &base_trace);

  for (int t = 0; t < 30; ++t) {
    auto perturbed_tokens = tokens;
    perturbed_tokens[t] = perturbed_tokens[t] == "w0" ? "w1" : "w0";
    PairTrace<double> trace;
    forward_joint(model, feature, sentence_of(vocab, perturbed_tokens), &trace);

    const auto& v2_base = base_trace.maps[2];
    const auto& v2_new = trace.maps[2];
    for (int slot = 0; slot < v2_base.positions; ++slot) {
      bool changed = false;
      for (int c = 0; c < v2_base.channels; ++c) {
        changed = changed || v2_base.at(slot, c) != v2_new.at(slot, c);
      }
      bool in_window = t >= 2 * slot && t <= 2 * slot + 3;  // 4-token span
      if (changed) CHECK(in_window);
    }
    const auto& v4_base = base_trace.maps[4];
    const auto& v4_new = trace.maps[4];
    for (int slot = 0; slot < v4_base.positions; ++slot) {
      bool changed = false;
      for (int c = 0; c < v4_base.channels; ++c) {
        changed = changed || v4_base.at(slot, c) != v4_new.at(slot, c);
      }
      bool in_window = t >= 4 * slot && t <= 4 * slot + 9;  // 10-token span
      if (changed) CHECK(in_window);
    }
  }
}

TEST_CASE("pad extension never changes live first-layer outputs") {
  Vocabulary vocab = test_vocab();
  auto cfg30 = small_config(Variant::phs);
  auto cfg34 = cfg30;
  cfg34.max_len = 34;
  auto m30 = build_model<double>(cfg30, vocab, 40);
  auto m34 = build_model<double>(cfg34, vocab, 40);  // same shapes, same init stream

  Rng rng(41);
  auto tokens = random_tokens(rng, 10);
  std::vector<double> feature(cfg30.feature_dim);
  for (auto& x : feature) x = rng.gaussian();

  PairTrace<double> t30, t34;
  forward_joint(m30, feature, sentence_of(vocab, tokens, 30), &t30);
  forward_joint(m34, feature, sentence_of(vocab, tokens, 34), &t34);
  const auto& c30 = t30.maps[1];
  const auto& c34 = t34.maps[1];
  for (int p = 0; p < c30.positions; ++p) {
    for (int c = 0; c < c30.channels; ++c) CHECK(c30.at(p, c) == c34.at(p, c));
    CHECK(c30.live[p] == c34.live[p]);
  }
}

TEST_CASE("end-to-end gradients match finite differences for every variant") {
  GradcheckConfig cfg;
  cfg.seeds = 2;
  auto runs = run_gradcheck(cfg);
  REQUIRE(runs.size() == 8);
  for (const auto& run : runs) {
    INFO(variant_name(run.variant), " seed ", run.seed, " attempts ", run.attempts,
         " max_rel ", run.max_rel_error);
    CHECK(run.passed);
    // embedding rows of probe-sentence tokens must actually be exercised
    bool embed_checked = false;
    for (const auto& r : run.results) {
      if (r.param_name == "embed") embed_checked = true;
    }
    CHECK(embed_checked);
  }
}
