#ifndef MCNN_CONFIG_HPP_
#define MCNN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mcnn {

// Flat run configuration: architecture dims, training knobs, and paths.
// Values come from a "key = value" config file and are overridden by
// command-line flags.
struct RunConfig {
  std::string variant = "wd";
  int max_len = 30;
  int k_rp = 3;
  int word_dim = 50;
  int image_dim = 256;
  int mlp_hidden = 400;
  std::vector<int> channels = {200, 300, 300};
  int feature_dim = 0;  // 0: take from the data manifest

  double margin = 0.5;
  int batch_size = 100;
  double learning_rate = 0.01;
  int negatives = 1;
  std::string direction = "both";
  double dropout = 0.1;
  int patience = 10;
  int max_epochs = 100;
  std::uint64_t seed = 1;

  std::string data_dir;
  std::string out_path;
  std::string embeddings_path;
  std::string log_path;
};

// Lines of "key = value"; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

// Applies entries onto the config. Unknown keys and unparsable values throw.
void apply_config_entries(RunConfig& config, const std::map<std::string, std::string>& entries);

// Fully resolved key -> value view, for run logging.
std::map<std::string, std::string> config_as_map(const RunConfig& config);

}  // namespace mcnn

#endif  // MCNN_CONFIG_HPP_
