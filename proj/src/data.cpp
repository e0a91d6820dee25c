#include "mcnn/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mcnn {

using nlohmann::json;

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

EncodedSentence encode_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                int max_len, Warnings* warnings) {
  if (tokens.empty()) throw DataError("empty sentence");
  EncodedSentence enc;
  enc.indices.assign(max_len, kPadIndex);
  if (static_cast<int>(tokens.size()) > max_len) {
    warn(warnings, "sentence of " + std::to_string(tokens.size()) + " tokens truncated to " +
                       std::to_string(max_len));
  }
  enc.live_length = std::min<int>(static_cast<int>(tokens.size()), max_len);
  for (int i = 0; i < enc.live_length; ++i) enc.indices[i] = vocab.lookup(tokens[i]);
  return enc;
}

namespace {

void glorot_row(float* row, int dim, int fan_in, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + dim));
  for (int i = 0; i < dim; ++i) row[i] = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = dim;
  table.table.assign(static_cast<std::size_t>(vocab.size()) * dim, 0.0f);
  Rng rng(seed);
  for (int i = 1; i < vocab.size(); ++i) glorot_row(table.row(i), dim, vocab.size(), rng);
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::uint64_t init_seed, EmbeddingLoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());

  EmbeddingTable table;
  std::vector<bool> covered(vocab.size(), false);
  EmbeddingLoadStats local;

  std::string line;
  int line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string field;
    while (ls >> field) fields.push_back(field);
    if (fields.empty()) continue;

    // Optional "<count> <dim>" header: exactly two integer fields up front.
    if (first_data_line && fields.size() == 2) {
      char* end1 = nullptr;
      char* end2 = nullptr;
      std::strtol(fields[0].c_str(), &end1, 10);
      long dim = std::strtol(fields[1].c_str(), &end2, 10);
      if (*end1 == '\0' && *end2 == '\0') {
        if (dim <= 0) throw DataError("embedding header declares dim " + fields[1]);
        table.dim = static_cast<int>(dim);
        first_data_line = false;
        continue;
      }
    }
    first_data_line = false;

    const std::string& token = fields[0];
    const int vec_dim = static_cast<int>(fields.size()) - 1;
    if (vec_dim <= 0) {
      throw DataError("embedding line " + std::to_string(line_no) + " has no vector values");
    }
    if (table.dim == 0) {
      table.dim = vec_dim;
    } else if (vec_dim != table.dim) {
      throw DataError("embedding line " + std::to_string(line_no) + " has " +
                      std::to_string(vec_dim) + " values, expected " + std::to_string(table.dim));
    }
    if (table.table.empty()) {
      table.table.assign(static_cast<std::size_t>(vocab.size()) * table.dim, 0.0f);
    }
    ++local.file_vectors;

    auto it = vocab.token_to_index.find(token);
    if (it == vocab.token_to_index.end()) continue;
    float* row = table.row(it->second);
    for (int i = 0; i < table.dim; ++i) {
      char* end = nullptr;
      double v = std::strtod(fields[i + 1].c_str(), &end);
      if (end == fields[i + 1].c_str() || *end != '\0') {
        throw DataError("embedding line " + std::to_string(line_no) + ": bad float '" +
                        fields[i + 1] + "'");
      }
      row[i] = static_cast<float>(v);
    }
    covered[it->second] = true;
  }
  if (table.dim == 0) throw DataError("embedding file " + path.string() + " is empty");
  if (table.table.empty()) {
    table.table.assign(static_cast<std::size_t>(vocab.size()) * table.dim, 0.0f);
  }

  Rng rng(init_seed);
  for (int i = 1; i < vocab.size(); ++i) {
    if (covered[i]) {
      ++local.covered;
    } else {
      glorot_row(table.row(i), table.dim, vocab.size(), rng);
      ++local.uncovered;
    }
  }
  // PAD row stays zero.
  std::fill(table.row(kPadIndex), table.row(kPadIndex) + table.dim, 0.0f);
  local.dim = table.dim;
  if (stats != nullptr) *stats = local;
  return table;
}

std::vector<ImageFeature> load_image_features(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("dim") || !manifest.contains("count") || !manifest.contains("ids")) {
    throw DataError("manifest " + manifest_path.string() + " missing dim/count/ids");
  }
  const int dim = manifest["dim"].get<int>();
  const int count = manifest["count"].get<int>();
  auto ids = manifest["ids"].get<std::vector<std::string>>();
  if (static_cast<int>(ids.size()) != count) {
    throw DataError("manifest declares count " + std::to_string(count) + " but lists " +
                    std::to_string(ids.size()) + " ids");
  }
  if (dim <= 0 || count < 0) throw DataError("manifest has non-positive dim or count");

  std::filesystem::path blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw DataError("cannot open feature blob " + blob_path.string());
  blob.seekg(0, std::ios::end);
  const std::streamoff size = blob.tellg();
  const std::streamoff expected =
      static_cast<std::streamoff>(count) * dim * static_cast<std::streamoff>(sizeof(float));
  if (size != expected) {
    throw DataError("feature blob " + blob_path.string() + " is " + std::to_string(size) +
                    " bytes, expected " + std::to_string(expected));
  }
  blob.seekg(0, std::ios::beg);

  std::vector<ImageFeature> features(count);
  for (int i = 0; i < count; ++i) {
    features[i].id = ids[i];
    features[i].vector.resize(dim);
    blob.read(reinterpret_cast<char*>(features[i].vector.data()),
              static_cast<std::streamsize>(dim) * sizeof(float));
    if (!blob) throw DataError("short read in feature blob " + blob_path.string());
    for (int d = 0; d < dim; ++d) {
      if (!std::isfinite(features[i].vector[d])) {
        throw DataError("non-finite feature value at row " + std::to_string(i));
      }
    }
  }
  return features;
}

void write_image_features(const std::filesystem::path& manifest_path,
                          const std::vector<ImageFeature>& features, int dim) {
  json manifest;
  manifest["dim"] = dim;
  manifest["count"] = static_cast<int>(features.size());
  std::vector<std::string> ids;
  ids.reserve(features.size());
  for (const auto& f : features) {
    if (static_cast<int>(f.vector.size()) != dim) {
      throw DataError("feature " + f.id + " has dim " + std::to_string(f.vector.size()) +
                      ", manifest declares " + std::to_string(dim));
    }
    ids.push_back(f.id);
  }
  manifest["ids"] = ids;

  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write manifest " + manifest_path.string());
  out << manifest.dump(2) << "\n";

  std::filesystem::path blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw DataError("cannot write feature blob " + blob_path.string());
  for (const auto& f : features) {
    blob.write(reinterpret_cast<const char*>(f.vector.data()),
               static_cast<std::streamsize>(dim) * sizeof(float));
  }
}

std::vector<RawCaption> load_captions_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open caption file " + path.string());
  std::vector<RawCaption> captions;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("caption line " + std::to_string(line_no) + " has no tab separator");
    }
    RawCaption c;
    c.image_id = line.substr(0, tab);
    c.tokens = tokenize(line.substr(tab + 1));
    if (c.image_id.empty()) {
      throw DataError("caption line " + std::to_string(line_no) + " has empty image id");
    }
    captions.push_back(std::move(c));
  }
  return captions;
}

void write_captions_tsv(const std::filesystem::path& path,
                        const std::vector<RawCaption>& captions) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write caption file " + path.string());
  for (const auto& c : captions) {
    out << c.image_id << '\t';
    for (std::size_t i = 0; i < c.tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << c.tokens[i];
    }
    out << '\n';
  }
}

SplitIds load_splits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open splits file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("splits file " + path.string() + ": " + e.what());
  }
  SplitIds splits;
  splits.train = j.value("train", std::vector<std::string>{});
  splits.val = j.value("val", std::vector<std::string>{});
  splits.test = j.value("test", std::vector<std::string>{});
  return splits;
}

void write_splits(const std::filesystem::path& path, const SplitIds& splits) {
  json j;
  j["train"] = splits.train;
  j["val"] = splits.val;
  j["test"] = splits.test;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write splits file " + path.string());
  out << j.dump(2) << "\n";
}

Vocabulary build_vocabulary(const std::vector<RawCaption>& captions, const SplitIds& splits) {
  std::set<std::string> train_ids(splits.train.begin(), splits.train.end());
  Vocabulary vocab;
  for (const auto& c : captions) {
    if (train_ids.count(c.image_id) == 0) continue;
    for (const auto& t : c.tokens) vocab.add(t);
  }
  return vocab;
}

PairDataset load_dataset(const std::filesystem::path& dir, const Vocabulary& vocab, int max_len,
                         Warnings* warnings) {
  PairDataset ds;
  ds.images = load_image_features(dir / "features.json");
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    ds.image_index[ds.images[i].id] = static_cast<int>(i);
  }
  auto captions = load_captions_tsv(dir / "captions.tsv");
  ds.splits = load_splits(dir / "splits.json");

  std::set<std::string> train_ids(ds.splits.train.begin(), ds.splits.train.end());
  std::set<std::string> val_ids(ds.splits.val.begin(), ds.splits.val.end());
  std::set<std::string> test_ids(ds.splits.test.begin(), ds.splits.test.end());
  for (const auto& id : val_ids) {
    if (train_ids.count(id)) throw DataError("split overlap: " + id + " in train and val");
  }
  for (const auto& id : test_ids) {
    if (train_ids.count(id)) throw DataError("split overlap: " + id + " in train and test");
    if (val_ids.count(id)) throw DataError("split overlap: " + id + " in val and test");
  }

  for (auto& c : captions) {
    if (ds.image_index.count(c.image_id) == 0) {
      throw DataError("caption references unknown image id " + c.image_id);
    }
    SentenceEntry entry;
    entry.image_id = c.image_id;
    entry.tokens = c.tokens;
    entry.encoded = encode_sentence(c.tokens, vocab, max_len, warnings);
    int sentence_idx = static_cast<int>(ds.sentences.size());
    ds.image_to_sentences[c.image_id].push_back(sentence_idx);
    if (train_ids.count(c.image_id)) {
      ds.train_sentences.push_back(sentence_idx);
    } else if (val_ids.count(c.image_id)) {
      ds.val_sentences.push_back(sentence_idx);
    } else if (test_ids.count(c.image_id)) {
      ds.test_sentences.push_back(sentence_idx);
    }
    ds.sentences.push_back(std::move(entry));
  }
  return ds;
}

std::uint64_t vocabulary_hash(const Vocabulary& vocab) {
  // FNV-1a over newline-joined tokens.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (const auto& token : vocab.tokens) {
    for (unsigned char ch : token) mix(ch);
    mix('\n');
  }
  return h;
}

}  // namespace mcnn
