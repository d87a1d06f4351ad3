#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "snndelay/network.hpp"
#include "snndelay_cli/config.hpp"

namespace snndelay::cli {

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> values);

struct SeedResult {
  std::uint64_t seed = 0;
  double test_acc = 0.0;
  double train_acc = 0.0;
  double train_loss = 0.0;
  double seconds = 0.0;
  double seconds_per_epoch = 0.0;
};

/// One trained configuration evaluated over its seed list.
struct CellReport {
  RunConfig config;
  std::string hash;
  ParamCount params;
  std::size_t state_memory = 0;
  std::vector<SeedResult> seeds;
  Aggregate test_acc;
  double seconds = 0.0;
};

/// Per-seed rows: config_hash, model, h, l, nd, scheme, trainable_asd, seed, ...
void write_seed_csv(std::ostream& out, std::span<const CellReport> cells);
/// One row per cell with mean and sample std over seeds.
void write_cell_csv(std::ostream& out, std::span<const CellReport> cells);
/// Summary with the full config text embedded for every cell.
void write_summary_json(std::ostream& out, const std::string& command,
                        std::span<const CellReport> cells);

}  // namespace snndelay::cli
