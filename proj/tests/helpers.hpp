#ifndef MCNN_TESTS_HELPERS_HPP_
#define MCNN_TESTS_HELPERS_HPP_

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "mcnn/data.hpp"
#include "mcnn/model.hpp"

namespace testutil {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("mcnn_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Small architecture for desk-scale training tests.
inline mcnn::ArchitectureConfig toy_architecture(mcnn::Variant v, int feature_dim) {
  mcnn::ArchitectureConfig cfg;
  cfg.variant = v;
  cfg.max_len = 30;
  cfg.k_rp = 3;
  cfg.word_dim = 24;
  cfg.feature_dim = feature_dim;
  cfg.image_dim = 32;
  cfg.mlp_hidden = 64;
  cfg.conv_channels = {40, 48, 48};
  return cfg;
}

struct LoadedToy {
  mcnn::PairDataset dataset;
  mcnn::Vocabulary vocab;
};

// Writes a toy dataset into dir and loads it back with the train-split vocab.
inline LoadedToy make_loaded_toy(const mcnn::ToyDatasetOptions& opts,
                                 const std::filesystem::path& dir) {
  mcnn::make_toy_dataset(opts, dir);
  auto captions = mcnn::load_captions_tsv(dir / "captions.tsv");
  auto splits = mcnn::load_splits(dir / "splits.json");
  LoadedToy toy;
  toy.vocab = mcnn::build_vocabulary(captions, splits);
  toy.dataset = mcnn::load_dataset(dir, toy.vocab, 30);
  return toy;
}

}  // namespace testutil

#endif  // MCNN_TESTS_HELPERS_HPP_
