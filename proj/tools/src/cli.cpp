#include "snndelay_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "snndelay/checkpoint.hpp"
#include "snndelay/data.hpp"
#include "snndelay/training.hpp"
#include "snndelay_cli/config.hpp"
#include "snndelay_cli/report.hpp"

namespace snndelay::cli {

namespace {

/// Raw flag values captured by CLI11 before they are merged into a RunConfig.
struct FlagValues {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
  // convert / gen-synth
  std::string in;
  std::string out;
  std::size_t c_raw = 700;
  std::size_t classes = 20;
  std::string split = "train";
};

std::string flag_name(const std::string& key) {
  std::string name = key;
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

void add_config_options(CLI::App& sub, FlagValues& fv) {
  sub.add_option("--config", fv.config_path, "flat key = value config file");
  for (const auto& field : config_fields()) {
    std::string names = "--" + flag_name(field.key);
    if (field.key == "trainable_asd") names += ",--train-asd";
    if (field.key == "gc_time") names += ",--T";
    if (field.is_flag) {
      const std::string name = flag_name(field.key);
      if (field.key == "trainable_asd") {
        fv.options[field.key] =
            sub.add_flag("--trainable-asd,--train-asd,!--frozen-asd", fv.flags[field.key],
                         "train the delay rows");
      } else {
        fv.options[field.key] =
            sub.add_flag("--" + name + ",!--no-" + name, fv.flags[field.key], field.key);
      }
    } else {
      fv.options[field.key] = sub.add_option(names, fv.values[field.key], field.key);
    }
  }
}

RunConfig resolve_config(const FlagValues& fv) {
  RunConfig config;
  if (!fv.config_path.empty()) config = load_config_file(fv.config_path);
  if (const char* env = std::getenv("SNNDELAY_DATA_DIR"); env != nullptr && *env != '\0') {
    config.data_dir = env;
  }
  for (const auto& field : config_fields()) {
    const CLI::Option* opt = fv.options.at(field.key);
    if (opt->count() == 0) continue;
    if (field.is_flag) {
      set_config_value(config, field.key, fv.flags.at(field.key) ? "true" : "false");
    } else {
      set_config_value(config, field.key, fv.values.at(field.key));
    }
  }
  config.validate();
  return config;
}

struct Splits {
  FrameDataset train;
  FrameDataset test;
};

FrameDataset load_split(const RunConfig& c, bool test) {
  if (c.dataset == "synthetic") {
    return frame_dataset(gen_synthetic(c.synthetic_spec(test)), c.framing(), test ? "test" : "train");
  }
  const DatasetExpectation expect =
      c.dataset == "shd" ? DatasetExpectation::shd(test ? "test" : "train") : DatasetExpectation{};
  const auto path = resolve_data_path(c, test ? c.test_data : c.train_data);
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("dataset file not found: " + path.string() +
                             " (set data_dir or SNNDELAY_DATA_DIR)");
  }
  return load_dataset(path, c.framing(), expect);
}

void check_channels(const NetworkSpec& spec, const FrameDataset& data) {
  if (data.channels() != spec.c_in) {
    throw std::runtime_error("dataset has " + std::to_string(data.channels()) +
                             " channels but the network expects cin = " + std::to_string(spec.c_in));
  }
  for (auto label : data.labels) {
    if (label >= spec.c_out) {
      throw std::runtime_error("dataset label " + std::to_string(label) + " exceeds cout = " +
                               std::to_string(spec.c_out));
    }
  }
}

std::string with_seed(const std::string& path, std::uint64_t seed, std::size_t n_seeds) {
  return n_seeds > 1 ? path + ".seed" + std::to_string(seed) : path;
}

CellReport run_cell(const RunConfig& config, const Splits& data, std::ostream& out) {
  const NetworkSpec spec = config.network_spec();
  check_channels(spec, data.train);
  check_channels(spec, data.test);

  CellReport cell;
  cell.config = config;
  cell.hash = config_hash(config);
  cell.params = count_params(spec, config.trainable_asd);
  cell.state_memory = count_state_memory(spec);
  const auto start = std::chrono::steady_clock::now();
  const MetricsFormat format =
      config.metrics_format == "jsonl" ? MetricsFormat::JsonLines : MetricsFormat::Csv;

  std::vector<double> accs;
  for (std::uint64_t seed : config.seeds) {
    Network net(spec, seed);
    Trainer trainer(net, config.train_config(seed));
    std::unique_ptr<std::ofstream> file;
    std::ostream* metrics = nullptr;
    if (config.metrics == "-") {
      metrics = &out;
    } else if (!config.metrics.empty()) {
      file = std::make_unique<std::ofstream>(with_seed(config.metrics, seed, config.seeds.size()));
      if (!*file) throw std::runtime_error("cannot open metrics file " + config.metrics);
      metrics = file.get();
    }
    const auto records = trainer.fit(data.train, &data.test, metrics, format);

    SeedResult r;
    r.seed = seed;
    if (!records.empty()) {
      r.train_acc = records.back().train_acc;
      r.train_loss = records.back().train_loss;
      for (const auto& rec : records) r.seconds += rec.seconds;
      r.seconds_per_epoch = r.seconds / static_cast<double>(records.size());
    }
    r.test_acc = evaluate(net, data.test, config.batch, config.threads).accuracy;
    accs.push_back(r.test_acc);
    cell.seeds.push_back(r);
    if (!config.checkpoint.empty()) {
      save_checkpoint(with_seed(config.checkpoint, seed, config.seeds.size()), net);
    }
  }
  cell.test_acc = aggregate(accs);
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

void write_reports(const RunConfig& config, const std::string& command,
                   std::span<const CellReport> cells, bool per_seed) {
  std::ofstream csv(config.report + ".csv");
  std::ofstream json(config.report + ".json");
  if (!csv || !json) throw std::runtime_error("cannot write report files at " + config.report);
  if (per_seed) {
    write_seed_csv(csv, cells);
  } else {
    write_cell_csv(csv, cells);
  }
  write_summary_json(json, command, cells);
}

std::string percent(const Aggregate& a) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * a.mean << " +- " << 100.0 * a.std << " % (n="
    << a.n << ")";
  return s.str();
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  const Splits data{load_split(config, false), load_split(config, true)};
  const CellReport cell = run_cell(config, data, out);
  write_reports(config, "train", std::span(&cell, 1), true);
  out << "config_hash=" << cell.hash << "\n";
  for (const auto& s : cell.seeds) {
    out << "seed=" << s.seed << " test_acc=" << s.test_acc << " seconds=" << s.seconds << "\n";
  }
  out << "test_acc=" << percent(cell.test_acc) << "\n";
  out << "report=" << config.report << ".csv," << config.report << ".json\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& config, std::ostream& out) {
  const Splits data{load_split(config, false), load_split(config, true)};
  std::vector<CellReport> cells;
  for (const auto& model : config.sweep_models) {
    for (std::size_t nd : config.sweep_nd) {
      for (const auto& scheme : config.sweep_schemes) {
        for (std::size_t h : config.sweep_h) {
          RunConfig cell = config;
          cell.model = model;
          cell.nd = nd;
          cell.scheme = scheme;
          cell.h = h;
          cells.push_back(run_cell(cell, data, out));
          out << "cell " << cells.size() << ": model=" << model << " h=" << h << " nd=" << nd
              << " scheme=" << scheme << " test_acc=" << percent(cells.back().test_acc) << "\n";
        }
      }
    }
  }
  write_reports(config, "sweep", cells, false);
  out << "cells=" << cells.size() << " report=" << config.report << ".csv\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  if (config.checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  Network net = load_checkpoint(std::filesystem::path(config.checkpoint));
  const FrameDataset test = load_split(config, true);
  check_channels(net.spec(), test);
  const EpochMetrics m = evaluate(net, test, config.batch, config.threads);
  nlohmann::json j = {{"checkpoint", config.checkpoint},
                      {"samples", test.size()},
                      {"accuracy", m.accuracy},
                      {"loss", m.loss},
                      {"seconds", m.seconds}};
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  NetworkSpec spec = config.network_spec();
  for (auto& layer : spec.layers) layer.scheme.trainable = true;
  GradCheckOptions opts;
  opts.time = config.gc_time;
  opts.batch = config.gc_batch;
  const GradCheckReport report = gradient_check(spec, opts);
  out << std::scientific << std::setprecision(3);
  for (const auto& g : report.groups) {
    out << g.name << " entries=" << g.entries << " max_rel_error=" << g.max_rel_error << "\n";
  }
  out << "max_rel_error=" << report.max_rel_error << " worst=" << report.worst << "\n";
  const bool ok = report.max_rel_error <= config.gc_tolerance;
  out << (ok ? "PASS" : "FAIL") << " tolerance=" << config.gc_tolerance << "\n";
  return ok ? kExitOk : kExitFailure;
}

int cmd_params(const RunConfig& config, std::ostream& out) {
  const NetworkSpec spec = config.network_spec();
  const ParamCount c = count_params(spec, config.trainable_asd);
  Network net(spec, 0);
  out << "model=" << config.model << " h=" << config.h << " l=" << config.l
      << " cin=" << spec.c_in << " cout=" << spec.c_out << " nd=" << config.nd
      << " trainable_asd=" << (config.trainable_asd ? "true" : "false") << "\n";
  out << "feedforward=" << c.feedforward << "\n"
      << "recurrent=" << c.recurrent << "\n"
      << "neuron=" << c.neuron << "\n"
      << "norm=" << c.norm << "\n"
      << "delay=" << c.delay << "\n"
      << "total=" << c.total << "\n"
      << "runtime_total=" << net.trainable_count() << "\n"
      << "state_memory=" << count_state_memory(spec) << "\n";
  return net.trainable_count() == c.total ? kExitOk : kExitFailure;
}

bool is_hdf5(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char sig[8] = {};
  in.read(sig, 8);
  return in.gcount() == 8 && std::string(sig, 8) == "\x89HDF\r\n\x1a\n";
}

int cmd_convert(const FlagValues& fv, std::ostream& out) {
  if (fv.in.empty() || fv.out.empty()) throw ConfigError("convert requires --in and --out");
  if (!std::filesystem::exists(fv.in)) throw std::runtime_error("input not found: " + fv.in);
  const EventDataset data =
      is_hdf5(fv.in) ? read_hdf5_events(fv.in, fv.c_raw, fv.classes) : read_interchange(fv.in);
  write_interchange(std::filesystem::path(fv.out), data);
  std::size_t events = 0;
  for (const auto& s : data.samples) events += s.events.size();
  out << "wrote " << data.samples.size() << " samples, " << events << " events to " << fv.out
      << "\n";
  return kExitOk;
}

int cmd_gen_synth(const RunConfig& config, const FlagValues& fv, std::ostream& out) {
  if (fv.out.empty()) throw ConfigError("gen-synth requires --out");
  if (fv.split != "train" && fv.split != "test") throw ConfigError("--split must be train or test");
  const EventDataset data = gen_synthetic(config.synthetic_spec(fv.split == "test"));
  write_interchange(std::filesystem::path(fv.out), data);
  out << "wrote " << data.samples.size() << " samples (" << fv.split << ") to " << fv.out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking networks with state-space synaptic delays", "snndelay"};
  app.set_help_flag("--help", "print usage");
  app.require_subcommand(1);
  app.fallthrough(false);

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"train", "train over the configured seed list and write reports"},
      {"eval", "evaluate a checkpoint on the test split"},
      {"sweep", "train every cell of the sweep grid, one report row per cell"},
      {"gradcheck", "compare BPTT against finite differences on the smooth twin"},
      {"params", "print the trainable-parameter breakdown"},
      {"convert", "convert an HDF5 or interchange event file to the interchange format"},
      {"gen-synth", "write the synthetic delayed-pattern task as an interchange file"},
  };
  std::map<std::string, FlagValues> flag_values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->set_help_flag("--help", "print usage");
    auto& fv = flag_values[c.name];
    add_config_options(*sub, fv);
    if (std::string(c.name) == "convert" || std::string(c.name) == "gen-synth") {
      sub->add_option("--out", fv.out, "output interchange file");
    }
    if (std::string(c.name) == "convert") {
      sub->add_option("--in", fv.in, "input HDF5 or interchange file");
      sub->add_option("--c-raw", fv.c_raw, "raw channel count of the HDF5 input");
      sub->add_option("--classes", fv.classes, "class count of the HDF5 input");
    }
    if (std::string(c.name) == "gen-synth") {
      sub->add_option("--split", fv.split, "train or test");
    }
    subs[c.name] = sub;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }
  const FlagValues& fv = flag_values.at(name);

  try {
    const RunConfig config = resolve_config(fv);
    if (name == "train") return cmd_train(config, out);
    if (name == "sweep") return cmd_sweep(config, out);
    if (name == "eval") return cmd_eval(config, out);
    if (name == "gradcheck") return cmd_gradcheck(config, out);
    if (name == "params") return cmd_params(config, out);
    if (name == "convert") return cmd_convert(fv, out);
    return cmd_gen_synth(config, fv, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n\n" << subs.at(name)->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace snndelay::cli
