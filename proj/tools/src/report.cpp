#include "snndelay_cli/report.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include <json.hpp>

namespace snndelay::cli {

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(a.n);
  if (a.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

namespace {

void cell_prefix(std::ostream& out, const CellReport& c) {
  out << c.hash << ',' << c.config.model << ',' << c.config.h << ',' << c.config.l << ','
      << c.config.nd << ',' << c.config.scheme << ',' << (c.config.trainable_asd ? 1 : 0) << ',';
}

nlohmann::json params_json(const ParamCount& p) {
  return {{"feedforward", p.feedforward}, {"recurrent", p.recurrent}, {"neuron", p.neuron},
          {"norm", p.norm},               {"delay", p.delay},         {"total", p.total}};
}

}  // namespace

void write_seed_csv(std::ostream& out, std::span<const CellReport> cells) {
  out << std::setprecision(8);
  out << "config_hash,model,h,l,nd,scheme,trainable_asd,seed,test_acc,train_acc,train_loss,"
         "params,seconds_per_epoch,seconds\n";
  for (const auto& c : cells) {
    for (const auto& s : c.seeds) {
      cell_prefix(out, c);
      out << s.seed << ',' << s.test_acc << ',' << s.train_acc << ',' << s.train_loss << ','
          << c.params.total << ',' << s.seconds_per_epoch << ',' << s.seconds << '\n';
    }
  }
}

void write_cell_csv(std::ostream& out, std::span<const CellReport> cells) {
  out << std::setprecision(8);
  out << "config_hash,model,h,l,nd,scheme,trainable_asd,n_seeds,test_acc_mean,test_acc_std,"
         "params,state_memory,seconds\n";
  for (const auto& c : cells) {
    cell_prefix(out, c);
    out << c.test_acc.n << ',' << c.test_acc.mean << ',' << c.test_acc.std << ','
        << c.params.total << ',' << c.state_memory << ',' << c.seconds << '\n';
  }
}

void write_summary_json(std::ostream& out, const std::string& command,
                        std::span<const CellReport> cells) {
  nlohmann::json j;
  j["command"] = command;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cell;
    cell["config_hash"] = c.hash;
    cell["config"] = config_map(c.config);
    cell["params"] = params_json(c.params);
    cell["state_memory"] = c.state_memory;
    cell["seeds"] = nlohmann::json::array();
    for (const auto& s : c.seeds) {
      cell["seeds"].push_back({{"seed", s.seed},
                               {"test_acc", s.test_acc},
                               {"train_acc", s.train_acc},
                               {"train_loss", s.train_loss},
                               {"seconds_per_epoch", s.seconds_per_epoch},
                               {"seconds", s.seconds}});
    }
    cell["test_acc"] = {{"mean", c.test_acc.mean}, {"std", c.test_acc.std}, {"n", c.test_acc.n}};
    cell["seconds"] = c.seconds;
    j["cells"].push_back(cell);
  }
  out << j.dump(2) << '\n';
}

}  // namespace snndelay::cli
