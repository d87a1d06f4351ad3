#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snndelay/math.hpp"

namespace snndelay {

struct EventRecord {
  std::uint32_t time_us = 0;
  std::uint16_t channel = 0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct EventSample {
  std::uint16_t label = 0;
  std::vector<EventRecord> events;

  friend bool operator==(const EventSample&, const EventSample&) = default;
};

struct DatasetMeta {
  std::string split;
  std::size_t n_samples = 0;
  std::size_t c_raw = 0;
  std::size_t c_binned = 0;
  std::size_t n_classes = 0;
  std::uint32_t window_us = 0;
  std::size_t bin_factor = 1;
};

/// Raw event streams as stored on disk.
struct EventDataset {
  std::size_t c_raw = 0;
  std::size_t n_classes = 0;
  std::vector<EventSample> samples;
};

/// Event counts per [time frame, channel].
struct SpikeFrameTensor {
  Matrix counts;

  SpikeFrameTensor() = default;
  SpikeFrameTensor(std::size_t T, std::size_t C) : counts(T, C) {}

  std::size_t time() const { return counts.rows(); }
  std::size_t channels() const { return counts.cols(); }
  double total() const;

  friend bool operator==(const SpikeFrameTensor&, const SpikeFrameTensor&) = default;
};

/// Framed, labelled samples ready for batching.
struct FrameDataset {
  DatasetMeta meta;
  std::vector<SpikeFrameTensor> frames;
  std::vector<std::size_t> labels;

  std::size_t size() const { return frames.size(); }
  std::size_t channels() const { return meta.c_binned; }
  std::size_t time() const { return frames.empty() ? 0 : frames.front().time(); }
};

/// channel' = channel / factor. Throws std::out_of_range for channel >= c_raw
/// and std::invalid_argument when factor does not divide c_raw.
std::vector<EventRecord> bin_channels(std::span<const EventRecord> events, std::size_t factor,
                                      std::size_t c_raw);

/// frames[t, c] counts events with time_us / window_us == t. Events at or
/// beyond T_max windows are dropped (truncation); shorter streams are
/// zero-padded.
SpikeFrameTensor to_frames(std::span<const EventRecord> events, std::uint32_t window_us,
                           std::size_t T_max, std::size_t channels);

struct FramingConfig {
  std::size_t bin_factor = 5;
  std::uint32_t window_us = 10000;
  std::size_t t_max = 100;
};

/// Values a loaded dataset must match; unset fields are not checked.
struct DatasetExpectation {
  std::string split;
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> n_classes;
  std::optional<std::size_t> c_raw;

  /// SHD train (8156) or test (2264): 20 classes, 700 raw channels.
  static DatasetExpectation shd(const std::string& split);
};

FrameDataset frame_dataset(const EventDataset& events, const FramingConfig& framing,
                           const std::string& split = "");

// Flat interchange format, all fields little-endian:
//   header  magic "SNNE" | version u32 | n_samples u32 | c_raw u32 | n_classes u32
//   sample  label u16 | n_events u32 | n_events x (time_us u32, channel u16)
inline constexpr std::uint32_t kInterchangeVersion = 1;

void write_interchange(std::ostream& out, const EventDataset& data);
void write_interchange(const std::filesystem::path& path, const EventDataset& data);
EventDataset read_interchange(std::istream& in);
EventDataset read_interchange(const std::filesystem::path& path);

/// True when the build can decode the published HDF5 container.
bool hdf5_supported();
/// Reads spikes/times (seconds), spikes/units and labels from an SHD-style
/// HDF5 file. Throws std::runtime_error when HDF5 support is not compiled in.
EventDataset read_hdf5_events(const std::filesystem::path& path, std::size_t c_raw = 700,
                              std::size_t n_classes = 20);

/// Reads either format (detected from the file signature), validates it
/// against `expect`, then bins and frames every sample.
FrameDataset load_dataset(const std::filesystem::path& path, const FramingConfig& framing,
                          const DatasetExpectation& expect = {});

struct SyntheticSpec {
  std::size_t n_classes = 2;
  std::size_t channels = 4;
  std::size_t seq_len = 40;
  std::vector<std::size_t> lags = {2, 6};
  double noise_rate = 0.0;  // background spike probability per (frame, channel)
  std::size_t n_samples = 512;
  std::uint64_t seed = 0;
  std::uint32_t window_us = 1000;
  std::uint16_t reference_channel = 0;
  std::uint16_t probe_channel = 1;

  void validate() const;
};

/// Delayed-pattern task: a marker spike on the reference channel at a random
/// onset, and a probe spike lag(class) frames later. The onset range is shared
/// by all classes, so only the inter-spike interval carries the label.
EventDataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace snndelay
