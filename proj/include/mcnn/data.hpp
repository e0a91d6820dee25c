#ifndef MCNN_DATA_HPP_
#define MCNN_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcnn/common.hpp"

namespace mcnn {

inline constexpr int kPadIndex = 0;
inline constexpr int kUnkIndex = 1;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

// Token ids are dense in [0, size); 0 is PAD, 1 is UNK.
struct Vocabulary {
  std::unordered_map<std::string, int> token_to_index;
  std::vector<std::string> tokens;

  Vocabulary() {
    tokens = {kPadToken, kUnkToken};
    token_to_index = {{kPadToken, kPadIndex}, {kUnkToken, kUnkIndex}};
  }

  int size() const { return static_cast<int>(tokens.size()); }

  int add(const std::string& token) {
    auto it = token_to_index.find(token);
    if (it != token_to_index.end()) return it->second;
    int idx = size();
    tokens.push_back(token);
    token_to_index[token] = idx;
    return idx;
  }

  int lookup(const std::string& token) const {
    auto it = token_to_index.find(token);
    return it == token_to_index.end() ? kUnkIndex : it->second;
  }
};

struct EncodedSentence {
  std::vector<int> indices;  // length max_len, PAD-filled past live_length
  int live_length = 0;
};

struct ImageFeature {
  std::string id;
  std::vector<float> vector;
};

struct SentenceEntry {
  std::string image_id;
  EncodedSentence encoded;
  std::vector<std::string> tokens;  // raw tokens, kept for the reshuffle probe
};

struct SplitIds {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct PairDataset {
  std::vector<ImageFeature> images;
  std::unordered_map<std::string, int> image_index;  // id -> position in images
  std::vector<SentenceEntry> sentences;
  SplitIds splits;

  // Sentence indices grouped per split, resolved against image ids.
  std::vector<int> train_sentences;
  std::vector<int> val_sentences;
  std::vector<int> test_sentences;

  // Ground-truth sentence indices per image.
  std::unordered_map<std::string, std::vector<int>> image_to_sentences;
};

// --- text ------------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text);

EncodedSentence encode_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                int max_len = 30, Warnings* warnings = nullptr);

// --- embeddings ------------------------------------------------------------

struct EmbeddingLoadStats {
  int dim = 0;
  int file_vectors = 0;
  int covered = 0;
  int uncovered = 0;
};

// Plain float staging table; build_model copies it into the ParamSet at the
// model's scalar type. Row 0 (PAD) is always zero.
struct EmbeddingTable {
  int dim = 0;
  std::vector<float> table;  // vocab_size x dim

  const float* row(int idx) const { return table.data() + static_cast<std::size_t>(idx) * dim; }
  float* row(int idx) { return table.data() + static_cast<std::size_t>(idx) * dim; }
};

// Text format: optional "<count> <dim>" header, then "<token> <f1> ... <fdim>"
// per line. Vocab tokens missing from the file get a random init.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::uint64_t init_seed, EmbeddingLoadStats* stats = nullptr);

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed);

// --- image features --------------------------------------------------------

// manifest: "<name>.json" {"dim": d, "count": n, "ids": [...]}; blob:
// "<name>.bin" = n x d little-endian f32, row-major.
std::vector<ImageFeature> load_image_features(const std::filesystem::path& manifest_path);

void write_image_features(const std::filesystem::path& manifest_path,
                          const std::vector<ImageFeature>& features, int dim);

// --- captions & splits -----------------------------------------------------

struct RawCaption {
  std::string image_id;
  std::vector<std::string> tokens;
};

std::vector<RawCaption> load_captions_tsv(const std::filesystem::path& path);
void write_captions_tsv(const std::filesystem::path& path, const std::vector<RawCaption>& captions);

SplitIds load_splits(const std::filesystem::path& path);
void write_splits(const std::filesystem::path& path, const SplitIds& splits);

// Vocabulary comes from the training split only; val/test OOV falls to UNK.
Vocabulary build_vocabulary(const std::vector<RawCaption>& captions, const SplitIds& splits);

// Loads features + captions + splits from a directory laid out as written by
// make_toy_dataset (features.json/.bin, captions.tsv, splits.json).
PairDataset load_dataset(const std::filesystem::path& dir, const Vocabulary& vocab, int max_len,
                         Warnings* warnings = nullptr);

// --- synthetic data --------------------------------------------------------

struct ToyDatasetOptions {
  int n_images = 200;
  int concepts = 8;
  int feature_dim = 64;
  int vocab_size = 64;
  int captions_per_image = 1;
  std::uint64_t seed = 1;
  int train_pct = 70;  // remainder after train+val goes to test
  int val_pct = 15;
};

// Each image carries 1-3 latent concepts; its feature vector is the sum of
// per-concept Gaussian prototypes plus noise, and its captions are short
// templated token sequences over the per-concept word pools.
void make_toy_dataset(const ToyDatasetOptions& opts, const std::filesystem::path& out_dir);

std::uint64_t vocabulary_hash(const Vocabulary& vocab);

}  // namespace mcnn

#endif  // MCNN_DATA_HPP_
