#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace dec::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto s = trim(value);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, value, "a non-negative integer");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto s = trim(value);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out))
    bad_value(key, value, "a finite real");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto s = trim(value);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_count(key, item));
  if (out.empty()) bad_value(key, value, "a comma-separated list");
  return out;
}

// "2..6" or "2,3,5".
std::vector<std::size_t> parse_range(const std::string& key, const std::string& value) {
  const auto dots = value.find("..");
  if (dots == std::string::npos) return parse_list(key, value);
  const auto lo = parse_count(key, value.substr(0, dots));
  const auto hi = parse_count(key, value.substr(dots + 2));
  if (lo > hi) bad_value(key, value, "an ascending range lo..hi");
  std::vector<std::size_t> out;
  for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string real(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string boolean(bool b) { return b ? "true" : "false"; }

}  // namespace

PretrainConfig RunConfig::pretrain_for(std::size_t input_dim) const {
  PretrainConfig out = pretrain;
  out.layer_dims.assign(1, input_dim);
  out.layer_dims.insert(out.layer_dims.end(), hidden_dims.begin(), hidden_dims.end());
  return out;
}

RunConfig preset_config(std::string_view preset) {
  RunConfig c;
  if (preset == "paper") {
    c.pretrain = PretrainConfig::paper(1);
  } else if (preset == "desk") {
    c.pretrain = PretrainConfig::desk(1);
  } else {
    throw ConfigError("unknown preset '" + std::string(preset) + "' (expected paper or desk)");
  }
  c.preset = std::string(preset);
  c.hidden_dims.assign(c.pretrain.layer_dims.begin() + 1, c.pretrain.layer_dims.end());
  c.pretrain.layer_dims.clear();
  c.k_range = {2, 3, 4, 5, 6};
  return c;
}

std::string to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::KMeans: return "kmeans";
    case Baseline::AeKMeans: return "ae-kmeans";
    case Baseline::None: break;
  }
  return "none";
}

Baseline baseline_from_string(std::string_view text) {
  if (text == "none" || text.empty()) return Baseline::None;
  if (text == "kmeans") return Baseline::KMeans;
  if (text == "ae-kmeans") return Baseline::AeKMeans;
  throw ConfigError("unknown baseline '" + std::string(text) + "' (expected kmeans or ae-kmeans)");
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value(trim(raw));
  if (key == "preset") {
    if (value != "paper" && value != "desk") throw ConfigError("unknown preset '" + value + "'");
    c.preset = value;
  } else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "data") c.data = value;
  else if (key == "format") {
    if (value != "auto" && value != "csv" && value != "idx") bad_value(key, value, "auto, csv or idx");
    c.format = value;
  } else if (key == "labels") c.labels = value;
  else if (key == "label_column") {
    if (value.empty() || value == "none") c.label_column.reset();
    else c.label_column = parse_count(key, value);
  } else if (key == "normalize") c.normalize = parse_bool(key, value);
  else if (key == "k") c.k = parse_count(key, value);
  else if (key == "k_range") c.k_range = parse_range(key, value);
  else if (key == "train_fraction") c.train_fraction = parse_real(key, value);
  else if (key == "out") c.out = value;
  else if (key == "checkpoint") c.checkpoint = value;
  else if (key == "assignments") c.assignments = value;
  else if (key == "freeze_encoder") c.freeze_encoder = parse_bool(key, value);
  else if (key == "baseline") c.baseline = baseline_from_string(value);
  else if (key == "hidden_dims") c.hidden_dims = parse_list(key, value);
  else if (key == "dropout_rate") c.pretrain.dropout_rate = parse_real(key, value);
  else if (key == "iters_per_layer") c.pretrain.iters_per_layer = parse_count(key, value);
  else if (key == "finetune_iters") c.pretrain.finetune_iters = parse_count(key, value);
  else if (key == "batch_size") c.pretrain.batch_size = parse_count(key, value);
  else if (key == "lr_initial") c.pretrain.lr_initial = parse_real(key, value);
  else if (key == "lr_drop_every") c.pretrain.lr_drop_every = parse_count(key, value);
  else if (key == "lr_drop_factor") c.pretrain.lr_drop_factor = parse_real(key, value);
  else if (key == "momentum") c.pretrain.momentum = parse_real(key, value);
  else if (key == "weight_decay") c.pretrain.weight_decay = parse_real(key, value);
  else if (key == "init_stddev") c.pretrain.init_stddev = parse_real(key, value);
  else if (key == "dec_learning_rate") c.dec.learning_rate = parse_real(key, value);
  else if (key == "dec_momentum") c.dec.momentum = parse_real(key, value);
  else if (key == "dec_batch_size") c.dec.batch_size = parse_count(key, value);
  else if (key == "tol_percent") c.dec.tol_percent = parse_real(key, value);
  else if (key == "target_refresh_interval") c.dec.target_refresh_interval = parse_count(key, value);
  else if (key == "max_epochs") c.dec.max_epochs = parse_count(key, value);
  else if (key == "gradient_scaling") {
    if (value == "batch-mean") c.dec.scaling = GradientScaling::BatchMean;
    else if (value == "dataset-sum") c.dec.scaling = GradientScaling::DatasetSum;
    else bad_value(key, value, "batch-mean or dataset-sum");
  } else if (key == "dead_cluster_mass") c.dec.dead_cluster_mass = parse_real(key, value);
  else if (key == "kmeans_restarts") c.kmeans.restarts = parse_count(key, value);
  else if (key == "kmeans_max_iters") c.kmeans.max_iters = parse_count(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> render_settings(const RunConfig& c) {
  return {
      {"preset", c.preset},
      {"seed", std::to_string(c.seed)},
      {"data", c.data},
      {"format", c.format},
      {"labels", c.labels},
      {"label_column", c.label_column ? std::to_string(*c.label_column) : "none"},
      {"normalize", boolean(c.normalize)},
      {"k", std::to_string(c.k)},
      {"k_range", join(c.k_range)},
      {"train_fraction", real(c.train_fraction)},
      {"out", c.out},
      {"checkpoint", c.checkpoint},
      {"assignments", c.assignments},
      {"freeze_encoder", boolean(c.freeze_encoder)},
      {"baseline", to_string(c.baseline)},
      {"hidden_dims", join(c.hidden_dims)},
      {"dropout_rate", real(c.pretrain.dropout_rate)},
      {"iters_per_layer", std::to_string(c.pretrain.iters_per_layer)},
      {"finetune_iters", std::to_string(c.pretrain.finetune_iters)},
      {"batch_size", std::to_string(c.pretrain.batch_size)},
      {"lr_initial", real(c.pretrain.lr_initial)},
      {"lr_drop_every", std::to_string(c.pretrain.lr_drop_every)},
      {"lr_drop_factor", real(c.pretrain.lr_drop_factor)},
      {"momentum", real(c.pretrain.momentum)},
      {"weight_decay", real(c.pretrain.weight_decay)},
      {"init_stddev", real(c.pretrain.init_stddev)},
      {"dec_learning_rate", real(c.dec.learning_rate)},
      {"dec_momentum", real(c.dec.momentum)},
      {"dec_batch_size", std::to_string(c.dec.batch_size)},
      {"tol_percent", real(c.dec.tol_percent)},
      {"target_refresh_interval", std::to_string(c.dec.target_refresh_interval)},
      {"max_epochs", std::to_string(c.dec.max_epochs)},
      {"gradient_scaling", c.dec.scaling == GradientScaling::BatchMean ? "batch-mean" : "dataset-sum"},
      {"dead_cluster_mass", real(c.dec.dead_cluster_mass)},
      {"kmeans_restarts", std::to_string(c.kmeans.restarts)},
      {"kmeans_max_iters", std::to_string(c.kmeans.max_iters)},
  };
}

std::map<std::string, std::string> parse_config_text(std::string_view text, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string section = "config";
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source + ":" + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    if (section != "config") continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path.string());
}

}  // namespace dec::cli
