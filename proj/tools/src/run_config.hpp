#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dec/autoencoder.hpp"
#include "dec/clustering.hpp"
#include "dec/errors.hpp"
#include "dec/kmeans.hpp"

namespace dec::cli {

/// Bad flag, bad config key or value, or inputs that do not fit together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Baseline { None, KMeans, AeKMeans };

struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;

  std::string data;
  std::string format = "auto";  ///< auto | csv | idx
  std::string labels;           ///< IDX label file
  std::optional<std::size_t> label_column;
  bool normalize = true;

  std::size_t k = 10;
  std::vector<std::size_t> k_range;
  double train_fraction = 0.9;
  std::string out = "run";
  std::string checkpoint;
  std::string assignments;
  bool freeze_encoder = false;
  Baseline baseline = Baseline::None;

  /// Layer widths after the input; the input width comes from the data.
  std::vector<std::size_t> hidden_dims;
  PretrainConfig pretrain;
  DecTrainConfig dec;
  KMeansConfig kmeans;

  /// Full pretraining schedule for data of width `input_dim`.
  PretrainConfig pretrain_for(std::size_t input_dim) const;
};

/// Values for "paper" or "desk"; anything else is a ConfigError.
RunConfig preset_config(std::string_view preset);

/// Sets one key from its textual form. Unknown keys and unparsable values
/// raise ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Every key `apply_setting` accepts, in the order `render_settings` writes them.
std::vector<std::pair<std::string, std::string>> render_settings(const RunConfig& config);

/// Flat `key = value` file. Keys before any section header or inside
/// [config] are returned; other sections are skipped, so a run manifest can
/// be fed back as a config file.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_config_text(std::string_view text, const std::string& source);

std::string to_string(Baseline baseline);
Baseline baseline_from_string(std::string_view text);

}  // namespace dec::cli
