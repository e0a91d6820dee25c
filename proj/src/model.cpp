#include "mcnn/model.hpp"

namespace mcnn {

std::optional<Variant> parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (name == variant_name(v)) return v;
  }
  return std::nullopt;
}

ShapePlan shape_plan(const ArchitectureConfig& config) {
  if (config.k_rp < 1) throw ShapeError("k_rp must be >= 1");
  if (config.max_len < config.k_rp) {
    throw ShapeError("max_len " + std::to_string(config.max_len) +
                     " shorter than receptive field " + std::to_string(config.k_rp));
  }
  ShapePlan plan;
  const int fusion = fusion_conv_index(config.variant);
  int positions = config.max_len;
  int channels = config.word_dim;
  for (int layer = 1; layer <= 3; ++layer) {
    if (positions < config.k_rp) {
      throw ShapeError("config error: conv layer " + std::to_string(layer) + " needs " +
                       std::to_string(config.k_rp) + " positions, plan reaches only " +
                       std::to_string(positions));
    }
    positions = positions - config.k_rp + 1;
    channels = config.conv_channels[layer - 1];
    ShapePlanEntry conv;
    conv.kind = (layer == fusion) ? LayerKind::multi_conv : LayerKind::conv;
    conv.label = (layer == fusion ? "multi-conv" : "conv") + std::to_string(channels);
    conv.positions = positions;
    conv.channels = channels;
    plan.entries.push_back(conv);

    if (positions < 2) {
      throw ShapeError("config error: pool after conv layer " + std::to_string(layer) +
                       " cannot pool " + std::to_string(positions) + " position(s)");
    }
    positions = positions / 2;
    ShapePlanEntry pool{LayerKind::max2, "max-2", positions, channels};
    plan.entries.push_back(pool);
  }
  plan.final_positions = positions;
  plan.final_channels = channels;
  plan.joint_dim = positions * channels +
                   (config.variant == Variant::st ? config.image_dim : 0);
  plan.mlp_hidden = config.mlp_hidden;
  return plan;
}

}  // namespace mcnn
