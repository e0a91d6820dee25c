#include "mcnn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mcnn/common.hpp"

namespace mcnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double out = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::map<std::string, std::string> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + " is not 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw UsageError("config line " + std::to_string(line_no) + " has an empty key");
    }
    entries[key] = value;
  }
  return entries;
}

void apply_config_entries(RunConfig& config, const std::map<std::string, std::string>& entries) {
  for (const auto& [key, value] : entries) {
    if (key == "variant") config.variant = value;
    else if (key == "max_len") config.max_len = parse_int(key, value);
    else if (key == "k_rp") config.k_rp = parse_int(key, value);
    else if (key == "word_dim") config.word_dim = parse_int(key, value);
    else if (key == "image_dim") config.image_dim = parse_int(key, value);
    else if (key == "mlp_hidden") config.mlp_hidden = parse_int(key, value);
    else if (key == "channels") config.channels = parse_int_list(key, value);
    else if (key == "feature_dim") config.feature_dim = parse_int(key, value);
    else if (key == "margin") config.margin = parse_double(key, value);
    else if (key == "batch_size") config.batch_size = parse_int(key, value);
    else if (key == "learning_rate") config.learning_rate = parse_double(key, value);
    else if (key == "negatives") config.negatives = parse_int(key, value);
    else if (key == "direction") config.direction = value;
    else if (key == "dropout") config.dropout = parse_double(key, value);
    else if (key == "patience") config.patience = parse_int(key, value);
    else if (key == "max_epochs") config.max_epochs = parse_int(key, value);
    else if (key == "seed") config.seed = parse_u64(key, value);
    else if (key == "data") config.data_dir = value;
    else if (key == "out") config.out_path = value;
    else if (key == "embeddings") config.embeddings_path = value;
    else if (key == "log") config.log_path = value;
    else throw UsageError("unknown config key '" + key + "'");
  }
}

std::map<std::string, std::string> config_as_map(const RunConfig& config) {
  std::map<std::string, std::string> out;
  out["variant"] = config.variant;
  out["max_len"] = std::to_string(config.max_len);
  out["k_rp"] = std::to_string(config.k_rp);
  out["word_dim"] = std::to_string(config.word_dim);
  out["image_dim"] = std::to_string(config.image_dim);
  out["mlp_hidden"] = std::to_string(config.mlp_hidden);
  {
    std::string channels;
    for (std::size_t i = 0; i < config.channels.size(); ++i) {
      if (i > 0) channels += ',';
      channels += std::to_string(config.channels[i]);
    }
    out["channels"] = channels;
  }
  out["feature_dim"] = std::to_string(config.feature_dim);
  out["margin"] = std::to_string(config.margin);
  out["batch_size"] = std::to_string(config.batch_size);
  out["learning_rate"] = std::to_string(config.learning_rate);
  out["negatives"] = std::to_string(config.negatives);
  out["direction"] = config.direction;
  out["dropout"] = std::to_string(config.dropout);
  out["patience"] = std::to_string(config.patience);
  out["max_epochs"] = std::to_string(config.max_epochs);
  out["seed"] = std::to_string(config.seed);
  out["data"] = config.data_dir;
  out["out"] = config.out_path;
  out["embeddings"] = config.embeddings_path;
  out["log"] = config.log_path;
  return out;
}

}  // namespace mcnn
