#include "snndelay/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "snndelay/rng.hpp"

namespace snndelay {

double SpikeFrameTensor::total() const {
  double sum = 0.0;
  for (double v : counts.data()) sum += v;
  return sum;
}

std::vector<EventRecord> bin_channels(std::span<const EventRecord> events, std::size_t factor,
                                      std::size_t c_raw) {
  if (factor == 0 || c_raw % factor != 0) {
    throw std::invalid_argument("bin_channels: factor " + std::to_string(factor) +
                                " does not divide " + std::to_string(c_raw) + " channels");
  }
  std::vector<EventRecord> out;
  out.reserve(events.size());
  for (const auto& ev : events) {
    if (ev.channel >= c_raw) {
      throw std::out_of_range("bin_channels: channel " + std::to_string(ev.channel) +
                              " outside [0, " + std::to_string(c_raw) + ")");
    }
    out.push_back({ev.time_us, static_cast<std::uint16_t>(ev.channel / factor)});
  }
  return out;
}

SpikeFrameTensor to_frames(std::span<const EventRecord> events, std::uint32_t window_us,
                           std::size_t T_max, std::size_t channels) {
  if (window_us == 0) throw std::invalid_argument("to_frames: window must be positive");
  SpikeFrameTensor frames(T_max, channels);
  for (const auto& ev : events) {
    const std::size_t t = ev.time_us / window_us;
    if (t >= T_max) continue;
    if (ev.channel >= channels) {
      throw std::out_of_range("to_frames: channel " + std::to_string(ev.channel) +
                              " outside [0, " + std::to_string(channels) + ")");
    }
    frames.counts(t, ev.channel) += 1.0;
  }
  return frames;
}

DatasetExpectation DatasetExpectation::shd(const std::string& split) {
  DatasetExpectation e;
  e.split = split;
  e.n_classes = 20;
  e.c_raw = 700;
  if (split == "train") {
    e.n_samples = 8156;
  } else if (split == "test") {
    e.n_samples = 2264;
  } else {
    throw std::invalid_argument("DatasetExpectation::shd: split must be train or test");
  }
  return e;
}

FrameDataset frame_dataset(const EventDataset& events, const FramingConfig& framing,
                           const std::string& split) {
  if (framing.bin_factor == 0 || events.c_raw % framing.bin_factor != 0) {
    throw std::invalid_argument("frame_dataset: bin factor must divide the channel count");
  }
  FrameDataset out;
  out.meta.split = split;
  out.meta.n_samples = events.samples.size();
  out.meta.c_raw = events.c_raw;
  out.meta.c_binned = events.c_raw / framing.bin_factor;
  out.meta.n_classes = events.n_classes;
  out.meta.window_us = framing.window_us;
  out.meta.bin_factor = framing.bin_factor;
  out.frames.reserve(events.samples.size());
  out.labels.reserve(events.samples.size());
  for (const auto& sample : events.samples) {
    if (sample.label >= events.n_classes) {
      throw std::invalid_argument("frame_dataset: unknown class label " +
                                  std::to_string(sample.label));
    }
    const auto binned = bin_channels(sample.events, framing.bin_factor, events.c_raw);
    out.frames.push_back(to_frames(binned, framing.window_us, framing.t_max, out.meta.c_binned));
    out.labels.push_back(sample.label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interchange format

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'N', 'N', 'E'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw std::runtime_error(std::string("interchange: truncated file reading ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void write_interchange(std::ostream& out, const EventDataset& data) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kInterchangeVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.samples.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.c_raw));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.n_classes));
  for (const auto& sample : data.samples) {
    put<std::uint16_t>(out, sample.label);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(sample.events.size()));
    for (const auto& ev : sample.events) {
      put<std::uint32_t>(out, ev.time_us);
      put<std::uint16_t>(out, ev.channel);
    }
  }
  if (!out) throw std::runtime_error("interchange: write failed");
}

void write_interchange(const std::filesystem::path& path, const EventDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("interchange: cannot open " + path.string() + " for writing");
  write_interchange(out, data);
}

EventDataset read_interchange(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("interchange: bad magic (expected SNNE)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kInterchangeVersion) {
    throw std::runtime_error("interchange: unsupported version " + std::to_string(version));
  }
  EventDataset data;
  const auto n_samples = get<std::uint32_t>(in, "sample count");
  data.c_raw = get<std::uint32_t>(in, "channel count");
  data.n_classes = get<std::uint32_t>(in, "class count");
  data.samples.resize(n_samples);
  for (std::uint32_t i = 0; i < n_samples; ++i) {
    auto& sample = data.samples[i];
    sample.label = get<std::uint16_t>(in, "label");
    if (sample.label >= data.n_classes) {
      throw std::runtime_error("interchange: sample " + std::to_string(i) +
                               " has unknown class label " + std::to_string(sample.label));
    }
    const auto n_events = get<std::uint32_t>(in, "event count");
    sample.events.resize(n_events);
    for (auto& ev : sample.events) {
      ev.time_us = get<std::uint32_t>(in, "event time");
      ev.channel = get<std::uint16_t>(in, "event channel");
      if (ev.channel >= data.c_raw) {
        throw std::runtime_error("interchange: sample " + std::to_string(i) + " has channel " +
                                 std::to_string(ev.channel) + " >= " + std::to_string(data.c_raw));
      }
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("interchange: trailing bytes after last sample");
  }
  return data;
}

EventDataset read_interchange(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("interchange: cannot open " + path.string());
  return read_interchange(in);
}

namespace {

bool has_hdf5_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<char, 8> sig{};
  in.read(sig.data(), sig.size());
  static constexpr std::array<char, 8> kHdf5 = {'\x89', 'H', 'D', 'F', '\r', '\n', '\x1a', '\n'};
  return in && sig == kHdf5;
}

void check_expectation(const EventDataset& data, const DatasetExpectation& expect) {
  auto fail = [&](const std::string& what, std::size_t want, std::size_t got) {
    throw std::runtime_error("load_dataset: " + (expect.split.empty() ? "" : expect.split + " ") +
                             what + " mismatch: expected " + std::to_string(want) + ", found " +
                             std::to_string(got));
  };
  if (expect.n_samples && *expect.n_samples != data.samples.size()) {
    fail("sample count", *expect.n_samples, data.samples.size());
  }
  if (expect.n_classes && *expect.n_classes != data.n_classes) {
    fail("class count", *expect.n_classes, data.n_classes);
  }
  if (expect.c_raw && *expect.c_raw != data.c_raw) fail("channel count", *expect.c_raw, data.c_raw);
}

}  // namespace

FrameDataset load_dataset(const std::filesystem::path& path, const FramingConfig& framing,
                          const DatasetExpectation& expect) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("load_dataset: no such file " + path.string());
  }
  EventDataset events = has_hdf5_signature(path)
                            ? read_hdf5_events(path, expect.c_raw.value_or(700),
                                               expect.n_classes.value_or(20))
                            : read_interchange(path);
  check_expectation(events, expect);
  return frame_dataset(events, framing, expect.split);
}

// ---------------------------------------------------------------------------
// Synthetic delayed-pattern task

void SyntheticSpec::validate() const {
  if (n_classes == 0 || lags.size() != n_classes) {
    throw std::invalid_argument("SyntheticSpec: need exactly one lag per class");
  }
  auto sorted = lags;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("SyntheticSpec: lags must be distinct");
  }
  if (sorted.back() >= seq_len) throw std::invalid_argument("SyntheticSpec: lag must be < seq_len");
  if (reference_channel >= channels || probe_channel >= channels) {
    throw std::invalid_argument("SyntheticSpec: marker channels outside channel range");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw std::invalid_argument("SyntheticSpec: noise rate must lie in [0, 1]");
  }
  if (window_us == 0) throw std::invalid_argument("SyntheticSpec: window must be positive");
}

EventDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed);
  const std::size_t max_lag = *std::max_element(spec.lags.begin(), spec.lags.end());
  const std::size_t onsets = spec.seq_len - max_lag;

  EventDataset data;
  data.c_raw = spec.channels;
  data.n_classes = spec.n_classes;
  data.samples.resize(spec.n_samples);
  for (auto& sample : data.samples) {
    const auto label = static_cast<std::uint16_t>(rng.uniform_int(spec.n_classes));
    const std::size_t onset = rng.uniform_int(onsets);
    sample.label = label;
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      const auto time = static_cast<std::uint32_t>(t * spec.window_us);
      if (t == onset) sample.events.push_back({time, spec.reference_channel});
      if (t == onset + spec.lags[label]) sample.events.push_back({time, spec.probe_channel});
      if (spec.noise_rate > 0.0) {
        for (std::size_t c = 0; c < spec.channels; ++c) {
          if (rng.bernoulli(spec.noise_rate)) {
            sample.events.push_back({time, static_cast<std::uint16_t>(c)});
          }
        }
      }
    }
  }
  return data;
}

}  // namespace snndelay
