#include "snndelay_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace snndelay::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError("cannot parse '" + text + "' as a number");
  }
  return v;
}

double parse_real(const std::string& text) {
  const double v = parse_number<double>(text);
  if (!std::isfinite(v)) throw ConfigError("value '" + text + "' is not finite");
  return v;
}

bool parse_bool(const std::string& text) {
  const std::string t = lower(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("cannot parse '" + text + "' as a boolean");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty element in list '" + text + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(item));
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += v[i];
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

template <typename T>
ConfigField size_field(const std::string& key, T RunConfig::*member) {
  return {key, [member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(v); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

ConfigField real_field(const std::string& key, double RunConfig::*member) {
  return {key, [member](RunConfig& c, const std::string& v) { c.*member = parse_real(v); },
          [member](const RunConfig& c) { return fmt_real(c.*member); }};
}

ConfigField bool_field(const std::string& key, bool RunConfig::*member) {
  return {key, [member](RunConfig& c, const std::string& v) { c.*member = parse_bool(v); },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); },
          true};
}

ConfigField string_field(const std::string& key, std::string RunConfig::*member,
                         bool lowercase = false) {
  return {key,
          [member, lowercase](RunConfig& c, const std::string& v) {
            c.*member = lowercase ? lower(v) : v;
          },
          [member](const RunConfig& c) { return c.*member; }};
}

template <typename T>
ConfigField list_field(const std::string& key, std::vector<T> RunConfig::*member) {
  return {key,
          [member](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, std::string>) {
              auto items = split_list(v);
              for (auto& s : items) s = lower(s);
              c.*member = items;
            } else {
              c.*member = parse_number_list<T>(v);
            }
          },
          [member](const RunConfig& c) { return join(c.*member); }};
}

std::vector<ConfigField> make_fields() {
  using C = RunConfig;
  return {
      string_field("model", &C::model, true),
      size_field("h", &C::h),
      size_field("l", &C::l),
      size_field("cin", &C::cin),
      size_field("cout", &C::cout),
      size_field("nd", &C::nd),
      string_field("scheme", &C::scheme, true),
      bool_field("trainable_asd", &C::trainable_asd),
      real_field("lr", &C::lr),
      real_field("wd", &C::wd),
      real_field("dropout", &C::dropout),
      size_field("batch", &C::batch),
      size_field("epochs", &C::epochs),
      list_field("seeds", &C::seeds),
      bool_field("augment", &C::augment),
      real_field("mask_time", &C::mask_time),
      real_field("mask_channels", &C::mask_channels),
      real_field("mask_probability", &C::mask_probability),
      real_field("cutmix_probability", &C::cutmix_probability),
      size_field("threads", &C::threads),
      string_field("dataset", &C::dataset, true),
      string_field("data_dir", &C::data_dir),
      string_field("train_data", &C::train_data),
      string_field("test_data", &C::test_data),
      size_field("bin_factor", &C::bin_factor),
      size_field("window_us", &C::window_us),
      size_field("t_max", &C::t_max),
      size_field("synth_classes", &C::synth_classes),
      size_field("synth_channels", &C::synth_channels),
      size_field("synth_seq_len", &C::synth_seq_len),
      list_field("synth_lags", &C::synth_lags),
      real_field("synth_noise", &C::synth_noise),
      size_field("synth_samples", &C::synth_samples),
      size_field("synth_test_samples", &C::synth_test_samples),
      size_field("synth_seed", &C::synth_seed),
      size_field("gc_time", &C::gc_time),
      size_field("gc_batch", &C::gc_batch),
      real_field("gc_tolerance", &C::gc_tolerance),
      list_field("sweep_models", &C::sweep_models),
      list_field("sweep_nd", &C::sweep_nd),
      list_field("sweep_schemes", &C::sweep_schemes),
      list_field("sweep_h", &C::sweep_h),
      string_field("report", &C::report),
      string_field("metrics", &C::metrics),
      string_field("metrics_format", &C::metrics_format, true),
      string_field("checkpoint", &C::checkpoint),
  };
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = make_fields();
  return fields;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& fields = config_fields();
  const auto it = std::find_if(fields.begin(), fields.end(),
                               [&](const ConfigField& f) { return f.key == key; });
  if (it == fields.end()) throw ConfigError("unknown key '" + key + "'");
  try {
    it->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::map<std::string, std::string> config_map(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& f : config_fields()) out[f.key] = f.get(config);
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  try {
    parse_neuron_model(model);
    parse_delay_scheme(scheme);
    for (const auto& m : sweep_models) parse_neuron_model(m);
    for (const auto& s : sweep_schemes) parse_delay_scheme(s);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (h == 0 || l == 0 || cin == 0 || cout == 0) fail("h, l, cin and cout must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (wd < 0.0) fail("wd must be non-negative");
  if (batch == 0) fail("batch must be positive");
  if (seeds.empty()) fail("seeds must list at least one seed");
  if (threads == 0) fail("threads must be positive");
  for (double p : {mask_time, mask_channels, mask_probability, cutmix_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("mask and cutmix settings must lie in [0, 1]");
  }
  if (dataset != "shd" && dataset != "files" && dataset != "synthetic") {
    fail("dataset must be one of shd, files, synthetic");
  }
  if (bin_factor == 0 || window_us == 0 || t_max == 0) {
    fail("bin_factor, window_us and t_max must be positive");
  }
  if (metrics_format != "csv" && metrics_format != "jsonl") fail("metrics_format must be csv or jsonl");
  if (gc_time == 0 || gc_batch == 0) fail("gc_time and gc_batch must be positive");
  try {
    synthetic_spec(false).validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("synthetic task: ") + e.what());
  }
}

NetworkSpec RunConfig::network_spec() const {
  const DelayScheme s{parse_delay_scheme(scheme), trainable_asd};
  if (dataset == "synthetic") {
    return NetworkSpec::uniform(synth_channels, synth_classes, h, l, parse_neuron_model(model), nd,
                                s, dropout);
  }
  return NetworkSpec::uniform(cin, cout, h, l, parse_neuron_model(model), nd, s, dropout);
}

TrainConfig RunConfig::train_config(std::uint64_t seed) const {
  TrainConfig t;
  t.base_lr = lr;
  t.weight_decay = wd;
  t.dropout = dropout;
  t.batch_size = batch;
  t.epochs = epochs;
  t.seed = seed;
  t.augment = augment;
  t.mask.time_fraction = mask_time;
  t.mask.channel_fraction = mask_channels;
  t.mask.time_probability = mask_probability;
  t.mask.channel_probability = mask_probability;
  t.cutmix_probability = cutmix_probability;
  t.threads = threads;
  return t;
}

FramingConfig RunConfig::framing() const {
  if (dataset == "synthetic") {
    const auto s = synthetic_spec(false);
    return {1, s.window_us, s.seq_len};
  }
  return {bin_factor, window_us, t_max};
}

SyntheticSpec RunConfig::synthetic_spec(bool test_split) const {
  SyntheticSpec s;
  s.n_classes = synth_classes;
  s.channels = synth_channels;
  s.seq_len = synth_seq_len;
  s.lags = synth_lags;
  s.noise_rate = synth_noise;
  s.n_samples = test_split ? synth_test_samples : synth_samples;
  s.seed = test_split ? synth_seed + 0x9e3779b9ULL : synth_seed;
  return s;
}

std::filesystem::path resolve_data_path(const RunConfig& config, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || config.data_dir.empty()) return p;
  return std::filesystem::path(config.data_dir) / p;
}

}  // namespace snndelay::cli
