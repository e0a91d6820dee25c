#ifndef MCNN_MODEL_HPP_
#define MCNN_MODEL_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mcnn/common.hpp"
#include "mcnn/data.hpp"
#include "mcnn/kernel.hpp"
#include "mcnn/tensor.hpp"

namespace mcnn {

// Architecture variants, named by where the image vector enters the sentence
// composition: at the word windows (wd), after one conv/pool stage (phs),
// after two (phl), or only by concatenation once the sentence is fully
// encoded (st).
enum class Variant { wd, phs, phl, st };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::wd: return "wd";
    case Variant::phs: return "phs";
    case Variant::phl: return "phl";
    case Variant::st: return "st";
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string& name);

inline std::vector<Variant> all_variants() {
  return {Variant::wd, Variant::phs, Variant::phl, Variant::st};
}

// Which of the three conv layers is multimodal; 0 means none (st).
inline int fusion_conv_index(Variant v) {
  switch (v) {
    case Variant::wd: return 1;
    case Variant::phs: return 2;
    case Variant::phl: return 3;
    case Variant::st: return 0;
  }
  return 0;
}

struct ArchitectureConfig {
  Variant variant = Variant::wd;
  int max_len = 30;
  int k_rp = 3;
  int word_dim = 50;
  int feature_dim = 4096;   // incoming image feature length
  int image_dim = 256;      // d, the projected image representation
  int mlp_hidden = 400;
  std::array<int, 3> conv_channels = {200, 300, 300};
};

enum class LayerKind { conv, multi_conv, max2 };

struct ShapePlanEntry {
  LayerKind kind;
  std::string label;
  int positions = 0;  // output positions
  int channels = 0;   // output channels
};

struct ShapePlan {
  std::vector<ShapePlanEntry> entries;  // conv/pool stages in order
  int joint_dim = 0;                    // length of the joint representation
  int mlp_hidden = 0;
  int final_positions = 0;
  int final_channels = 0;
};

// Walks the narrow-convolution length law (conv: L -> L-k_rp+1, pool:
// L -> floor(L/2)) over the three conv/pool stages and reports the resulting
// joint-representation and MLP shapes. Throws ShapeError when the sequence
// becomes shorter than the receptive field.
ShapePlan shape_plan(const ArchitectureConfig& config);

template <typename T>
struct MatchModel {
  ArchitectureConfig config;
  Vocabulary vocab;
  ParamSet<T> params;
  ShapePlan plan;

  ParamArray<T>& embed() { return params.get("embed"); }
  const ParamArray<T>& embed() const { return params.get("embed"); }
};

// Records one forward pass for the backward sweep.
template <typename T>
struct PairTrace {
  bool valid = false;
  RunMode mode = RunMode::eval;
  std::vector<T> image_feature;
  std::vector<T> image_proj;               // post-ReLU projected image vector
  std::vector<FeatureMap<T>> maps;         // maps[0] = embedded sentence, then per stage
  std::vector<std::vector<int>> pool_argmax;
  std::vector<T> joint;
  std::vector<T> dropout_mask;
  std::vector<T> dropped_joint;
  std::vector<T> mlp_hidden;
  EncodedSentence sentence;
  T score = T(0);
};

struct PairScore {
  double value = 0.0;
};

namespace detail {

template <typename T>
void glorot_init(ParamArray<T>& arr, int fan_in, int fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : arr.values) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace detail

// Parameter shapes per variant; multimodal conv filters are widened by
// image_dim at the fusion point only. Deterministic given the seed.
template <typename T>
MatchModel<T> build_model(const ArchitectureConfig& config, const Vocabulary& vocab,
                          std::uint64_t seed) {
  MatchModel<T> model;
  model.config = config;
  model.vocab = vocab;
  model.plan = shape_plan(config);
  Rng rng(seed);

  // PAD row lives in its own frozen array; real tokens start at index 1.
  model.params.add("embed_pad", {1, config.word_dim}, /*trainable=*/false);
  auto& embed = model.params.add("embed", {vocab.size() - 1, config.word_dim});
  detail::glorot_init(embed, vocab.size(), config.word_dim, rng);

  auto& proj_w = model.params.add("img_proj_w", {config.image_dim, config.feature_dim});
  detail::glorot_init(proj_w, config.feature_dim, config.image_dim, rng);
  model.params.add("img_proj_b", {config.image_dim});

  int in_channels = config.word_dim;
  const int fusion = fusion_conv_index(config.variant);
  for (int layer = 1; layer <= 3; ++layer) {
    const int out_channels = config.conv_channels[layer - 1];
    const int fused_dim = (layer == fusion) ? config.image_dim : 0;
    const int seg_dim = config.k_rp * in_channels + fused_dim;
    auto& w = model.params.add("conv" + std::to_string(layer) + "_w", {out_channels, seg_dim});
    detail::glorot_init(w, seg_dim, out_channels, rng);
    model.params.add("conv" + std::to_string(layer) + "_b", {out_channels});
    in_channels = out_channels;
  }

  auto& h_w = model.params.add("mlp_h_w", {config.mlp_hidden, model.plan.joint_dim});
  detail::glorot_init(h_w, model.plan.joint_dim, config.mlp_hidden, rng);
  model.params.add("mlp_h_b", {config.mlp_hidden});
  auto& s_w = model.params.add("mlp_s_w", {1, config.mlp_hidden});
  detail::glorot_init(s_w, config.mlp_hidden, 1, rng);
  model.params.add("mlp_s_b", {1});
  return model;
}

// Copies a staged embedding table (pretrained or random) into the model's
// embedding parameters. Row 0 stays in the frozen pad array.
template <typename T>
void apply_embeddings(MatchModel<T>& model, const EmbeddingTable& table) {
  if (table.dim != model.config.word_dim) {
    throw ShapeError("embedding dim " + std::to_string(table.dim) + " != configured word_dim " +
                     std::to_string(model.config.word_dim));
  }
  auto& embed = model.params.get("embed");
  const int dim = model.config.word_dim;
  for (int idx = 1; idx < model.vocab.size(); ++idx) {
    const float* src = table.row(idx);
    T* dst = embed.values.data() + static_cast<std::size_t>(idx - 1) * dim;
    for (int c = 0; c < dim; ++c) dst[c] = static_cast<T>(src[c]);
  }
}

// Embeds an encoded sentence: PAD slots stay hard zero with live=false, so the
// gate sees structure rather than float equality.
template <typename T>
FeatureMap<T> embed_sentence(const MatchModel<T>& model, const EncodedSentence& sentence) {
  const auto& embed = model.params.get("embed");
  const int dim = model.config.word_dim;
  if (static_cast<int>(sentence.indices.size()) != model.config.max_len) {
    throw ShapeError("sentence encoded at length " + std::to_string(sentence.indices.size()) +
                     ", model expects " + std::to_string(model.config.max_len));
  }
  FeatureMap<T> map(model.config.max_len, dim);
  for (int p = 0; p < model.config.max_len; ++p) {
    int idx = sentence.indices[p];
    if (idx == kPadIndex) {
      map.live[p] = 0;
      continue;
    }
    const T* src = embed.values.data() + static_cast<std::size_t>(idx - 1) * dim;
    std::copy(src, src + dim, map.row(p));
  }
  return map;
}

// Runs projection, the conv/pool stack with fusion at the variant's layer,
// and returns the joint representation; the trace keeps every intermediate.
template <typename T>
std::vector<T> forward_joint(const MatchModel<T>& model, const std::vector<T>& image_feature,
                             const EncodedSentence& sentence, PairTrace<T>* trace = nullptr,
                             Warnings* warnings = nullptr) {
  const auto& cfg = model.config;
  if (static_cast<int>(image_feature.size()) != cfg.feature_dim) {
    throw ShapeError("image feature length " + std::to_string(image_feature.size()) +
                     " != configured feature_dim " + std::to_string(cfg.feature_dim));
  }
  std::vector<T> image_proj = affine_forward(image_feature, model.params.get("img_proj_w"),
                                             model.params.get("img_proj_b"), Act::relu);

  FeatureMap<T> map = embed_sentence(model, sentence);
  if (trace != nullptr) {
    trace->image_feature = image_feature;
    trace->image_proj = image_proj;
    trace->sentence = sentence;
    trace->maps.clear();
    trace->pool_argmax.clear();
    trace->maps.push_back(map);
  }

  const int fusion = fusion_conv_index(cfg.variant);
  for (int layer = 1; layer <= 3; ++layer) {
    const auto& w = model.params.get("conv" + std::to_string(layer) + "_w");
    const auto& b = model.params.get("conv" + std::to_string(layer) + "_b");
    const std::vector<T>* fused = (layer == fusion) ? &image_proj : nullptr;
    map = seq_conv_forward(map, w, b, cfg.k_rp, fused, Act::relu);
    if (trace != nullptr) trace->maps.push_back(map);

    std::vector<int> argmax;
    map = maxpool2_forward(map, trace != nullptr ? &argmax : nullptr, warnings);
    if (trace != nullptr) {
      trace->maps.push_back(map);
      trace->pool_argmax.push_back(std::move(argmax));
    }
  }

  // Vectorize position-major; st prepends the image projection.
  std::vector<T> joint;
  joint.reserve(model.plan.joint_dim);
  if (cfg.variant == Variant::st) {
    joint.insert(joint.end(), image_proj.begin(), image_proj.end());
  }
  joint.insert(joint.end(), map.values.begin(), map.values.end());
  if (static_cast<int>(joint.size()) != model.plan.joint_dim) {
    throw ShapeError("joint representation length " + std::to_string(joint.size()) +
                     " != planned " + std::to_string(model.plan.joint_dim));
  }
  if (trace != nullptr) trace->joint = joint;
  return joint;
}

template <typename T>
PairScore score_pair(const MatchModel<T>& model, const std::vector<T>& image_feature,
                     const EncodedSentence& sentence, RunMode mode, double dropout_p, Rng& rng,
                     PairTrace<T>* trace = nullptr) {
  std::vector<T> joint = forward_joint(model, image_feature, sentence, trace);
  std::vector<T> mask;
  std::vector<T> dropped =
      dropout_forward(joint, dropout_p, mode, rng, trace != nullptr ? &mask : nullptr);
  std::vector<T> hidden = affine_forward(dropped, model.params.get("mlp_h_w"),
                                         model.params.get("mlp_h_b"), Act::relu);
  std::vector<T> out = affine_forward(hidden, model.params.get("mlp_s_w"),
                                      model.params.get("mlp_s_b"), Act::identity);
  if (trace != nullptr) {
    trace->mode = mode;
    trace->dropout_mask = std::move(mask);
    trace->dropped_joint = std::move(dropped);
    trace->mlp_hidden = std::move(hidden);
    trace->score = out[0];
    trace->valid = true;
  }
  return PairScore{static_cast<double>(out[0])};
}

// Convenience eval-mode scorer (deterministic, no dropout).
template <typename T>
PairScore score_pair_eval(const MatchModel<T>& model, const std::vector<T>& image_feature,
                          const EncodedSentence& sentence) {
  Rng rng(0);
  return score_pair(model, image_feature, sentence, RunMode::eval, 0.0, rng);
}

// Accumulates d(loss)/d(param) into the ParamSet for one recorded pair,
// scaled by d_score. Subgradients per the kernel conventions.
template <typename T>
void backward_pair(MatchModel<T>& model, const PairTrace<T>& trace, T d_score) {
  if (!trace.valid) throw UsageError("backward_pair called without a recorded forward pass");
  const auto& cfg = model.config;

  // MLP top: identity output layer, then ReLU hidden.
  std::vector<T> d_hidden;
  {
    std::vector<T> d_out{d_score};
    std::vector<T> out{trace.score};
    affine_backward(d_out, trace.mlp_hidden, out, model.params.get("mlp_s_w"),
                    model.params.get("mlp_s_b"), Act::identity, &d_hidden);
  }
  std::vector<T> d_dropped;
  affine_backward(d_hidden, trace.dropped_joint, trace.mlp_hidden, model.params.get("mlp_h_w"),
                  model.params.get("mlp_h_b"), Act::relu, &d_dropped);

  std::vector<T> d_joint;
  dropout_backward(d_dropped, trace.dropout_mask, &d_joint);

  // Split the joint gradient back into image projection and final map parts.
  std::vector<T> d_image_proj(cfg.image_dim, T(0));
  const FeatureMap<T>& final_map = trace.maps.back();
  std::vector<T> d_map(final_map.values.size());
  if (cfg.variant == Variant::st) {
    std::copy(d_joint.begin(), d_joint.begin() + cfg.image_dim, d_image_proj.begin());
    std::copy(d_joint.begin() + cfg.image_dim, d_joint.end(), d_map.begin());
  } else {
    std::copy(d_joint.begin(), d_joint.end(), d_map.begin());
  }

  // Walk conv/pool stages in reverse. maps layout: [embed, c1, p1, c2, p2, c3, p3].
  const int fusion = fusion_conv_index(cfg.variant);
  for (int layer = 3; layer >= 1; --layer) {
    const FeatureMap<T>& conv_out = trace.maps[2 * layer - 1];
    const FeatureMap<T>& conv_in = trace.maps[2 * layer - 2];

    std::vector<T> d_conv_out;
    maxpool2_backward(d_map, trace.pool_argmax[layer - 1], conv_out.positions,
                      conv_out.channels, &d_conv_out);

    auto& w = model.params.get("conv" + std::to_string(layer) + "_w");
    auto& b = model.params.get("conv" + std::to_string(layer) + "_b");
    const std::vector<T>* fused = (layer == fusion) ? &trace.image_proj : nullptr;
    std::vector<T> d_in;
    std::vector<T> d_fused;
    seq_conv_backward(d_conv_out, conv_in, conv_out, w, b, cfg.k_rp, fused, Act::relu, &d_in,
                      (layer == fusion) ? &d_fused : nullptr);
    if (layer == fusion) {
      for (int i = 0; i < cfg.image_dim; ++i) d_image_proj[i] += d_fused[i];
    }
    d_map = std::move(d_in);
  }

  // Scatter the embedded-map gradient into embedding rows; PAD slots were
  // never read so nothing flows to them.
  {
    auto& embed = model.params.get("embed");
    const int dim = cfg.word_dim;
    for (int p = 0; p < cfg.max_len; ++p) {
      int idx = trace.sentence.indices[p];
      if (idx == kPadIndex) continue;
      T* dst = embed.grad.data() + static_cast<std::size_t>(idx - 1) * dim;
      const T* src = d_map.data() + static_cast<std::size_t>(p) * dim;
      for (int c = 0; c < dim; ++c) dst[c] += src[c];
    }
  }

  // Image projection (ReLU affine); the raw feature is an input, not a param.
  affine_backward(d_image_proj, trace.image_feature, trace.image_proj,
                  model.params.get("img_proj_w"), model.params.get("img_proj_b"), Act::relu,
                  static_cast<std::vector<T>*>(nullptr));
}

// Evaluation-time ensemble: exact sum of member scores in member order.
template <typename T>
PairScore score_ensemble(const std::vector<const MatchModel<T>*>& models,
                         const std::vector<T>& image_feature, const EncodedSentence& sentence) {
  if (models.empty()) throw UsageError("score_ensemble: empty model list");
  double total = 0.0;
  for (const auto* m : models) total += score_pair_eval(*m, image_feature, sentence).value;
  return PairScore{total};
}

}  // namespace mcnn

#endif  // MCNN_MODEL_HPP_
