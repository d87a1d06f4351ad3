#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "snndelay/network.hpp"

namespace snndelay {

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

/// Binary layout: "SNNK", u32 version, u64 length + JSON network spec,
/// u32 tensor count, then per tensor: u32 name length, name, u64 rows,
/// u64 cols, rows*cols little-endian doubles. Parameters and batch-norm
/// running statistics are both stored.
void save_checkpoint(std::ostream& out, Network& net);
void save_checkpoint(const std::filesystem::path& path, Network& net);

/// Rebuilds the network from the stored spec and restores every tensor.
/// Missing, unknown or mis-shaped tensors are errors.
Network load_checkpoint(std::istream& in);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace snndelay
