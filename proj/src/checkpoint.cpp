#include "mcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "mcnn/data.hpp"

namespace mcnn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'C', 'N', 'N'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw DataError("truncated checkpoint");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

json architecture_to_json(const ArchitectureConfig& cfg) {
  return json{{"variant", variant_name(cfg.variant)},
              {"max_len", cfg.max_len},
              {"k_rp", cfg.k_rp},
              {"word_dim", cfg.word_dim},
              {"feature_dim", cfg.feature_dim},
              {"image_dim", cfg.image_dim},
              {"mlp_hidden", cfg.mlp_hidden},
              {"conv_channels", cfg.conv_channels}};
}

ArchitectureConfig architecture_from_json(const json& j) {
  ArchitectureConfig cfg;
  auto variant = parse_variant(j.at("variant").get<std::string>());
  if (!variant) throw DataError("checkpoint has unknown variant " + j.at("variant").dump());
  cfg.variant = *variant;
  cfg.max_len = j.at("max_len").get<int>();
  cfg.k_rp = j.at("k_rp").get<int>();
  cfg.word_dim = j.at("word_dim").get<int>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.image_dim = j.at("image_dim").get<int>();
  cfg.mlp_hidden = j.at("mlp_hidden").get<int>();
  auto channels = j.at("conv_channels").get<std::vector<int>>();
  if (channels.size() != 3) throw DataError("checkpoint conv_channels must have 3 entries");
  std::copy(channels.begin(), channels.end(), cfg.conv_channels.begin());
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"margin", cfg.margin},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"negatives_per_positive", cfg.negatives_per_positive},
              {"direction", direction_name(cfg.direction)},
              {"dropout", cfg.dropout_p},
              {"patience", cfg.patience},
              {"max_epochs", cfg.max_epochs},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.margin = j.at("margin").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.negatives_per_positive = j.at("negatives_per_positive").get<int>();
  auto direction = parse_direction(j.at("direction").get<std::string>());
  if (!direction) throw DataError("checkpoint has unknown direction " + j.at("direction").dump());
  cfg.direction = *direction;
  cfg.dropout_p = j.at("dropout").get<double>();
  cfg.patience = j.at("patience").get<int>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_checkpoint(const MatchModel<float>& model, const TrainConfig& train_config,
                     const CheckpointMeta& meta, const std::filesystem::path& path) {
  json header;
  header["architecture"] = architecture_to_json(model.config);
  header["train_config"] = train_config_to_json(train_config);
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(vocabulary_hash(model.vocab)));
  header["metadata"] = json{{"epoch", meta.epoch},
                            {"val_metric", meta.val_metric},
                            {"vocab", model.vocab.tokens},
                            {"vocab_hash", hash_hex}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  for (const auto& arr : model.params.arrays) {
    put_u32(out, static_cast<std::uint32_t>(arr->name.size()));
    out.write(arr->name.data(), static_cast<std::streamsize>(arr->name.size()));
    put_u32(out, static_cast<std::uint32_t>(arr->shape.size()));
    for (int d : arr->shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : arr->values) put_f32(out, v);
  }
  if (!out) throw DataError("write failure on checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("format error: bad checkpoint magic in " + path.string());
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_len = get_u32(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw DataError("truncated checkpoint header in " + path.string());

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  LoadedCheckpoint loaded{MatchModel<float>{}, TrainConfig{}, CheckpointMeta{}, 0};
  ArchitectureConfig arch = architecture_from_json(header.at("architecture"));
  loaded.train_config = train_config_from_json(header.at("train_config"));
  const json& meta = header.at("metadata");
  loaded.meta.epoch = meta.at("epoch").get<int>();
  loaded.meta.val_metric = meta.at("val_metric").get<double>();

  Vocabulary vocab;
  auto tokens = meta.at("vocab").get<std::vector<std::string>>();
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw DataError("checkpoint vocabulary is malformed");
  }
  for (std::size_t i = 2; i < tokens.size(); ++i) vocab.add(tokens[i]);
  loaded.vocab_hash = vocabulary_hash(vocab);

  loaded.model = build_model<float>(arch, vocab, /*seed=*/0);
  std::size_t filled = 0;
  while (filled < loaded.model.params.arrays.size()) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("truncated checkpoint record in " + path.string());
    if (!loaded.model.params.has(name)) {
      throw DataError("checkpoint contains unexpected parameter " + name);
    }
    auto& arr = loaded.model.params.get(name);
    const std::uint32_t rank = get_u32(in);
    if (rank != arr.shape.size()) {
      throw DataError("checkpoint parameter " + name + " has rank " + std::to_string(rank) +
                      ", expected " + std::to_string(arr.shape.size()));
    }
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t extent = get_u32(in);
      if (static_cast<int>(extent) != arr.shape[d]) {
        throw DataError("checkpoint parameter " + name + " has unexpected shape");
      }
      total *= extent;
    }
    for (std::size_t i = 0; i < total; ++i) arr.values[i] = get_f32(in);
    ++filled;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after the last parameter record in " + path.string());
  }
  return loaded;
}

}  // namespace mcnn
