#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "snndelay/data.hpp"
#include "snndelay/network.hpp"
#include "snndelay/training.hpp"

namespace snndelay::cli {

/// Bad config text, unknown keys or unparsable values. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // network
  std::string model = "adlif";
  std::size_t h = 128;
  std::size_t l = 2;
  std::size_t cin = 140;
  std::size_t cout = 20;
  std::size_t nd = 5;
  std::string scheme = "uniform";
  bool trainable_asd = false;

  // optimisation
  double lr = 1e-2;
  double wd = 1e-5;
  double dropout = 0.4;
  std::size_t batch = 128;
  std::size_t epochs = 50;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  bool augment = true;
  double mask_time = 0.1;
  double mask_channels = 0.1;
  double mask_probability = 0.5;
  double cutmix_probability = 0.5;
  std::size_t threads = 1;

  // data
  std::string dataset = "shd";  // shd | files | synthetic
  std::string data_dir;
  std::string train_data = "shd_train.h5";
  std::string test_data = "shd_test.h5";
  std::size_t bin_factor = 5;
  std::uint32_t window_us = 10000;
  std::size_t t_max = 100;

  // synthetic delayed-pattern task
  std::size_t synth_classes = 2;
  std::size_t synth_channels = 4;
  std::size_t synth_seq_len = 40;
  std::vector<std::size_t> synth_lags = {2, 6};
  double synth_noise = 0.0;
  std::size_t synth_samples = 512;
  std::size_t synth_test_samples = 256;
  std::uint64_t synth_seed = 100;

  // gradient check
  std::size_t gc_time = 10;
  std::size_t gc_batch = 3;
  double gc_tolerance = 1e-4;

  // sweep grid
  std::vector<std::string> sweep_models = {"adlif"};
  std::vector<std::size_t> sweep_nd = {0, 5, 10};
  std::vector<std::string> sweep_schemes = {"uniform"};
  std::vector<std::size_t> sweep_h = {128};

  // outputs
  std::string report = "snndelay_report";
  std::string metrics;
  std::string metrics_format = "csv";
  std::string checkpoint;

  NetworkSpec network_spec() const;
  TrainConfig train_config(std::uint64_t seed) const;
  FramingConfig framing() const;
  SyntheticSpec synthetic_spec(bool test_split) const;
  /// Throws ConfigError on values outside their domain.
  void validate() const;
};

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool is_flag = false;
};

/// Every recognised key, in serialization order.
const std::vector<ConfigField>& config_fields();

/// Assigns one key; throws ConfigError naming the key on failure.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; `#` starts a comment. Errors name the line.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Canonical `key = value` text, one line per field; parse_config(serialize(c)) == c.
std::string serialize_config(const RunConfig& config);
std::map<std::string, std::string> config_map(const RunConfig& config);
/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Resolves a data path against data_dir when it is relative.
std::filesystem::path resolve_data_path(const RunConfig& config, const std::string& path);

}  // namespace snndelay::cli
