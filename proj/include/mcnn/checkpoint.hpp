#ifndef MCNN_CHECKPOINT_HPP_
#define MCNN_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "mcnn/model.hpp"
#include "mcnn/train.hpp"

namespace mcnn {

// Binary layout: magic "MCNN", u32 LE version (=1), u32 LE JSON length, UTF-8
// JSON (architecture + train config + metadata incl. vocabulary), then per
// parameter: u32 name length, name, u32 rank, rank x u32 dims, f32 LE values.
// No padding between records. Round trips are bit-exact.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  double val_metric = 0.0;
};

struct LoadedCheckpoint {
  MatchModel<float> model;
  TrainConfig train_config;
  CheckpointMeta meta;
  std::uint64_t vocab_hash = 0;
};

void save_checkpoint(const MatchModel<float>& model, const TrainConfig& train_config,
                     const CheckpointMeta& meta, const std::filesystem::path& path);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mcnn

#endif  // MCNN_CHECKPOINT_HPP_
