#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "mcnn/data.hpp"

namespace mcnn {

namespace {

constexpr int kWordsPerConcept = 4;

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> kFillers = {"a",  "the", "with", "near",
                                                    "in", "on",  "and",  "by"};
  return kFillers;
}

const std::vector<std::string>& determiners() {
  static const std::vector<std::string> kDets = {"a", "the"};
  return kDets;
}

const std::vector<std::string>& connectors() {
  static const std::vector<std::string> kConn = {"with", "near", "in", "on", "and", "by"};
  return kConn;
}

std::string concept_word(int concept_id, int word) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "c%dw%d", concept_id, word);
  return buf;
}

}  // namespace

void make_toy_dataset(const ToyDatasetOptions& opts, const std::filesystem::path& out_dir) {
  if (opts.concepts < 2) throw UsageError("make_toy_dataset: need at least 2 concepts");
  if (opts.n_images < opts.concepts) {
    throw UsageError("make_toy_dataset: n_images must be >= concepts");
  }
  if (opts.captions_per_image < 1) {
    throw UsageError("make_toy_dataset: captions_per_image must be >= 1");
  }
  const int needed_vocab = opts.concepts * kWordsPerConcept + static_cast<int>(fillers().size());
  if (opts.vocab_size < needed_vocab) {
    throw UsageError("make_toy_dataset: vocab_size " + std::to_string(opts.vocab_size) +
                     " too small for concept pools (need " + std::to_string(needed_vocab) + ")");
  }

  std::filesystem::create_directories(out_dir);
  Rng rng(opts.seed);
  Rng proto_rng = rng.fork(1);
  Rng assign_rng = rng.fork(2);
  Rng caption_rng = rng.fork(3);
  Rng split_rng = rng.fork(4);

  // Concept prototypes in feature space.
  std::vector<std::vector<float>> prototypes(opts.concepts,
                                             std::vector<float>(opts.feature_dim));
  for (auto& proto : prototypes) {
    for (auto& v : proto) v = static_cast<float>(proto_rng.gaussian());
  }

  // Concept assignment: image i always carries concept i % concepts, plus up
  // to two extra distinct ones, so every concept occurs.
  std::vector<ImageFeature> features(opts.n_images);
  std::vector<std::vector<int>> image_concepts(opts.n_images);
  for (int i = 0; i < opts.n_images; ++i) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "img%04d", i);
    features[i].id = idbuf;

    std::vector<int>& cs = image_concepts[i];
    cs.push_back(i % opts.concepts);
    // 1-3 concepts per image, mostly 2-3: single-concept images make
    // near-duplicate pairs and carry little caption signal
    std::uint64_t roll = assign_rng.below(6);
    int extra = roll == 0 ? 0 : (roll <= 3 ? 1 : 2);
    while (static_cast<int>(cs.size()) < 1 + extra) {
      int c = static_cast<int>(assign_rng.below(opts.concepts));
      if (std::find(cs.begin(), cs.end(), c) == cs.end()) cs.push_back(c);
    }

    features[i].vector.assign(opts.feature_dim, 0.0f);
    for (int c : cs) {
      for (int d = 0; d < opts.feature_dim; ++d) features[i].vector[d] += prototypes[c][d];
    }
    for (int d = 0; d < opts.feature_dim; ++d) {
      features[i].vector[d] += static_cast<float>(0.1 * assign_rng.gaussian());
    }
  }

  // Captions: per concept a "det w_a w_b" segment with the two pool words in
  // ascending pool order, segments joined by connector words. The consistent
  // local order is what the reshuffle probe later measures.
  std::vector<RawCaption> captions;
  captions.reserve(static_cast<std::size_t>(opts.n_images) * opts.captions_per_image);
  for (int i = 0; i < opts.n_images; ++i) {
    for (int k = 0; k < opts.captions_per_image; ++k) {
      RawCaption cap;
      cap.image_id = features[i].id;
      const auto& cs = image_concepts[i];
      for (std::size_t ci = 0; ci < cs.size(); ++ci) {
        if (ci > 0) {
          cap.tokens.push_back(connectors()[caption_rng.below(connectors().size())]);
        }
        cap.tokens.push_back(determiners()[caption_rng.below(determiners().size())]);
        // three of the four pool words, in ascending pool order
        int skip = static_cast<int>(caption_rng.below(kWordsPerConcept));
        for (int w = 0; w < kWordsPerConcept; ++w) {
          if (w != skip) cap.tokens.push_back(concept_word(cs[ci], w));
        }
      }
      captions.push_back(std::move(cap));
    }
  }

  // Split over shuffled image ids (default 70/15/15).
  if (opts.train_pct < 0 || opts.val_pct < 0 || opts.train_pct + opts.val_pct > 100) {
    throw UsageError("make_toy_dataset: invalid split percentages");
  }
  std::vector<std::string> ids;
  ids.reserve(features.size());
  for (const auto& f : features) ids.push_back(f.id);
  split_rng.shuffle(ids);
  SplitIds splits;
  const int n_train = (opts.n_images * opts.train_pct) / 100;
  const int n_val = (opts.n_images * opts.val_pct) / 100;
  splits.train.assign(ids.begin(), ids.begin() + n_train);
  splits.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  splits.test.assign(ids.begin() + n_train + n_val, ids.end());

  write_image_features(out_dir / "features.json", features, opts.feature_dim);
  write_captions_tsv(out_dir / "captions.tsv", captions);
  write_splits(out_dir / "splits.json", splits);
}

}  // namespace mcnn
