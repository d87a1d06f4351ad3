#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snndelay/data.hpp"
#include "snndelay/rng.hpp"

using namespace snndelay;
namespace fs = std::filesystem;

namespace {

EventDataset random_events(std::size_t n, std::size_t c_raw, std::size_t classes, std::uint64_t seed) {
  RngStream rng(seed);
  EventDataset d;
  d.c_raw = c_raw;
  d.n_classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    EventSample s;
    s.label = static_cast<std::uint16_t>(rng.uniform_int(classes));
    const std::size_t k = rng.uniform_int(200);
    for (std::size_t e = 0; e < k; ++e) {
      s.events.push_back({static_cast<std::uint32_t>(rng.uniform_int(1'000'000)),
                          static_cast<std::uint16_t>(rng.uniform_int(c_raw))});
    }
    std::sort(s.events.begin(), s.events.end(),
              [](const EventRecord& a, const EventRecord& b) { return a.time_us < b.time_us; });
    d.samples.push_back(std::move(s));
  }
  return d;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("snndelay_test_" + name);
}

std::string bytes_of(const EventDataset& d) {
  std::ostringstream out(std::ios::binary);
  write_interchange(out, d);
  return out.str();
}

EventDataset parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_interchange(in);
}

}  // namespace

TEST_CASE("bin_channels examples") {
  const std::vector<EventRecord> ev = {{7, 12}, {9, 699}, {3, 0}};
  const auto b = bin_channels(ev, 5, 700);
  CHECK(b[0] == EventRecord{7, 2});
  CHECK(b[1] == EventRecord{9, 139});
  CHECK(b[2] == EventRecord{3, 0});
  CHECK(bin_channels(ev, 1, 700) == ev);
  const std::vector<EventRecord> bad = {{0, 700}};
  CHECK_THROWS_AS(bin_channels(bad, 5, 700), std::out_of_range);
  CHECK_THROWS_AS(bin_channels(ev, 3, 700), std::invalid_argument);
  CHECK_THROWS_AS(bin_channels(ev, 0, 700), std::invalid_argument);
}

TEST_CASE("binning preserves counts") {
  const auto d = random_events(50, 700, 20, 3);
  for (const auto& s : d.samples) {
    const auto b = bin_channels(s.events, 5, 700);
    CHECK(b.size() == s.events.size());
    std::vector<std::size_t> raw(140, 0), binned(140, 0);
    for (const auto& e : s.events) ++raw[e.channel / 5];
    for (const auto& e : b) ++binned[e.channel];
    CHECK(raw == binned);
  }
}

TEST_CASE("to_frames examples") {
  const std::vector<EventRecord> ev = {{25'000, 1}, {25'500, 1}, {0, 0}, {999'999, 2}, {1'000'000, 2}};
  const auto f = to_frames(ev, 10'000, 100, 3);
  CHECK(f.time() == 100);
  CHECK(f.channels() == 3);
  CHECK(f.counts(2, 1) == 2.0);
  CHECK(f.counts(0, 0) == 1.0);
  CHECK(f.counts(99, 2) == 1.0);
  CHECK(f.total() == 4.0);

  const auto empty = to_frames({}, 10'000, 100, 3);
  CHECK(empty.total() == 0.0);
  CHECK(empty.time() == 100);

  CHECK_THROWS_AS(to_frames(ev, 0, 10, 3), std::invalid_argument);
  const std::vector<EventRecord> wide = {{0, 5}};
  CHECK_THROWS_AS(to_frames(wide, 10, 10, 3), std::out_of_range);
}

TEST_CASE("framing preserves counts inside the window") {
  const auto d = random_events(50, 140, 20, 4);
  for (const auto& s : d.samples) {
    const auto f = to_frames(s.events, 10'000, 100, 140);
    CHECK(f.total() == static_cast<double>(s.events.size()));
    const auto half = to_frames(s.events, 10'000, 50, 140);
    const auto inside = std::count_if(s.events.begin(), s.events.end(),
                                      [](const EventRecord& e) { return e.time_us < 500'000; });
    CHECK(half.total() == static_cast<double>(inside));
  }
}

TEST_CASE("frame_dataset bins and frames every sample") {
  const auto d = random_events(20, 700, 20, 5);
  const auto f = frame_dataset(d, {}, "test");
  CHECK(f.size() == 20);
  CHECK(f.channels() == 140);
  CHECK(f.time() == 100);
  CHECK(f.meta.c_raw == 700);
  CHECK(f.meta.split == "test");
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f.labels[i] == d.samples[i].label);
    CHECK(f.frames[i].total() == static_cast<double>(d.samples[i].events.size()));
  }
  auto bad = d;
  bad.samples[3].label = 20;
  CHECK_THROWS_AS(frame_dataset(bad, {}), std::invalid_argument);
  FramingConfig odd;
  odd.bin_factor = 3;
  CHECK_THROWS_AS(frame_dataset(d, odd), std::invalid_argument);
}

TEST_CASE("interchange byte layout") {
  EventDataset d;
  d.c_raw = 3;
  d.n_classes = 2;
  d.samples.push_back({1, {{0x01020304u, 2}}});
  const std::string b = bytes_of(d);
  const std::string expect = std::string("SNNE") + std::string("\x01\x00\x00\x00", 4) +
                             std::string("\x01\x00\x00\x00", 4) + std::string("\x03\x00\x00\x00", 4) +
                             std::string("\x02\x00\x00\x00", 4) + std::string("\x01\x00", 2) +
                             std::string("\x01\x00\x00\x00", 4) + std::string("\x04\x03\x02\x01", 4) +
                             std::string("\x02\x00", 2);
  CHECK(b == expect);
}

TEST_CASE("interchange round trip is bit exact") {
  const auto d = random_events(30, 700, 20, 6);
  auto with_empty = d;
  with_empty.samples.push_back({7, {}});
  const auto back = parse(bytes_of(with_empty));
  CHECK(back.c_raw == 700);
  CHECK(back.n_classes == 20);
  CHECK(back.samples == with_empty.samples);
  CHECK(bytes_of(back) == bytes_of(with_empty));

  const auto path = temp_file("roundtrip.snne");
  write_interchange(path, with_empty);
  const auto a = load_dataset(path, {});
  write_interchange(path, read_interchange(path));
  const auto b = load_dataset(path, {});
  CHECK(a.frames == b.frames);
  CHECK(a.labels == b.labels);
  CHECK(a.frames.back().total() == 0.0);
  fs::remove(path);
}

TEST_CASE("interchange error paths") {
  EventDataset d;
  d.c_raw = 4;
  d.n_classes = 2;
  d.samples.push_back({1, {{10, 3}, {20, 1}}});
  const std::string good = bytes_of(d);

  std::string magic = good;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(parse(magic), doctest::Contains("bad magic"), std::runtime_error);

  std::string version = good;
  version[4] = 9;
  CHECK_THROWS_WITH_AS(parse(version), doctest::Contains("version"), std::runtime_error);

  CHECK_THROWS_WITH_AS(parse(good.substr(0, good.size() - 1)), doctest::Contains("truncated"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse(good + "x"), doctest::Contains("trailing"), std::runtime_error);

  std::string label = good;
  label[20] = 2;
  CHECK_THROWS_AS(parse(label), std::runtime_error);

  std::string channel = good;
  channel[good.size() - 2] = 4;
  CHECK_THROWS_WITH_AS(parse(channel), doctest::Contains("channel"), std::runtime_error);

  CHECK_THROWS_AS(read_interchange(temp_file("does_not_exist")), std::runtime_error);
  CHECK_THROWS_AS(load_dataset(temp_file("does_not_exist"), {}), std::runtime_error);
}

TEST_CASE("load_dataset validates expectations") {
  const auto path = temp_file("expect.snne");
  write_interchange(path, random_events(10, 700, 20, 7));
  DatasetExpectation ok;
  ok.n_samples = 10;
  ok.n_classes = 20;
  ok.c_raw = 700;
  CHECK(load_dataset(path, {}, ok).size() == 10);
  CHECK_THROWS_WITH_AS(load_dataset(path, {}, DatasetExpectation::shd("test")),
                       doctest::Contains("sample count"), std::runtime_error);
  DatasetExpectation classes;
  classes.n_classes = 35;
  CHECK_THROWS_AS(load_dataset(path, {}, classes), std::runtime_error);
  fs::remove(path);

  const auto shd = DatasetExpectation::shd("test");
  CHECK(shd.n_samples == 2264u);
  CHECK(shd.n_classes == 20u);
  CHECK(shd.c_raw == 700u);
  CHECK(DatasetExpectation::shd("train").n_samples == 8156u);
  CHECK_THROWS_AS(DatasetExpectation::shd("valid"), std::invalid_argument);
}

TEST_CASE("published container fixture") {
  const fs::path fixture = fs::path(SNNDELAY_FIXTURE_DIR) / "tiny_shd.h5";
  if (!hdf5_supported()) {
    CHECK_THROWS_AS(read_hdf5_events(fixture), std::runtime_error);
    return;
  }
  const auto ev = read_hdf5_events(fixture);
  REQUIRE(ev.samples.size() == 3);
  CHECK(ev.c_raw == 700);
  CHECK(ev.samples[0].label == 3);
  CHECK(ev.samples[1].label == 19);
  CHECK(ev.samples[1].events.empty());
  const std::vector<EventRecord> first = {{0, 0}, {12'300, 4}, {25'000, 12}, {999'900, 699}, {1'200'000, 5}};
  CHECK(ev.samples[0].events == first);

  const auto f = load_dataset(fixture, {});
  CHECK(f.channels() == 140);
  CHECK(f.time() == 100);
  CHECK(f.frames[0].counts(0, 0) == 1.0);
  CHECK(f.frames[0].counts(1, 0) == 1.0);
  CHECK(f.frames[0].counts(2, 2) == 1.0);
  CHECK(f.frames[0].counts(99, 139) == 1.0);
  CHECK(f.frames[0].total() == 4.0);
  CHECK(f.frames[1].total() == 0.0);
  CHECK(f.frames[2].counts(50, 20) == 2.0);

  const auto path = temp_file("converted.snne");
  write_interchange(path, ev);
  const auto g = load_dataset(path, {});
  CHECK(g.frames == f.frames);
  CHECK(g.labels == f.labels);
  fs::remove(path);
}

TEST_CASE("synthetic task basics") {
  SyntheticSpec spec;
  spec.seed = 3;
  const auto d = gen_synthetic(spec);
  CHECK(d.samples.size() == 512);
  CHECK(d.c_raw == 4);
  std::map<std::size_t, std::size_t> per_class;
  for (const auto& s : d.samples) {
    REQUIRE(s.events.size() == 2);
    CHECK(s.events[0].channel == spec.reference_channel);
    CHECK(s.events[1].channel == spec.probe_channel);
    const auto lag = (s.events[1].time_us - s.events[0].time_us) / spec.window_us;
    CHECK(lag == spec.lags[s.label]);
    CHECK(s.events[1].time_us / spec.window_us < spec.seq_len);
    ++per_class[s.label];
  }
  CHECK(per_class.size() == 2);
  CHECK(per_class[0] > 200);
  CHECK(per_class[1] > 200);

  CHECK(gen_synthetic(spec).samples == d.samples);
  spec.seed = 4;
  CHECK(!(gen_synthetic(spec).samples == d.samples));
}

TEST_CASE("synthetic noise adds background events") {
  SyntheticSpec spec;
  spec.noise_rate = 0.05;
  spec.n_samples = 200;
  const auto d = gen_synthetic(spec);
  double extra = 0.0;
  for (const auto& s : d.samples) extra += static_cast<double>(s.events.size()) - 2.0;
  CHECK(extra / 200.0 == doctest::Approx(0.05 * 40 * 4).epsilon(0.1));
}

TEST_CASE("count-only classifier stays at chance on the synthetic task") {
  SyntheticSpec train_spec, test_spec;
  train_spec.seed = 1;
  test_spec.seed = 2;
  test_spec.n_samples = 1000;
  FramingConfig framing{1, 1000, 40};
  const auto train = frame_dataset(gen_synthetic(train_spec), framing);
  const auto test = frame_dataset(gen_synthetic(test_spec), framing);

  auto signature = [](const SpikeFrameTensor& f) {
    std::vector<double> counts(f.channels(), 0.0);
    for (std::size_t t = 0; t < f.time(); ++t) {
      for (std::size_t c = 0; c < f.channels(); ++c) counts[c] += f.counts(t, c);
    }
    return counts;
  };
  std::map<std::vector<double>, std::vector<std::size_t>> votes;
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto& v = votes[signature(train.frames[i])];
    v.resize(2, 0);
    ++v[train.labels[i]];
  }
  CHECK(votes.size() == 1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto it = votes.find(signature(test.frames[i]));
    const std::size_t guess = it == votes.end() ? 0 : (it->second[1] > it->second[0] ? 1 : 0);
    correct += guess == test.labels[i] ? 1 : 0;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(test.size());
  CHECK(acc > 0.44);
  CHECK(acc < 0.56);

  std::size_t timing_correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    long onset = -1, probe = -1;
    for (std::size_t t = 0; t < 40; ++t) {
      if (test.frames[i].counts(t, 0) > 0) onset = static_cast<long>(t);
      if (test.frames[i].counts(t, 1) > 0) probe = static_cast<long>(t);
    }
    const std::size_t guess = probe - onset == 2 ? 0 : 1;
    timing_correct += guess == test.labels[i] ? 1 : 0;
  }
  CHECK(timing_correct == test.size());
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec s;
  s.lags = {2, 2};
  CHECK_THROWS_AS(gen_synthetic(s), std::invalid_argument);
  s.lags = {2};
  CHECK_THROWS_AS(gen_synthetic(s), std::invalid_argument);
  s.lags = {2, 40};
  CHECK_THROWS_AS(gen_synthetic(s), std::invalid_argument);
  s.lags = {2, 6};
  s.probe_channel = 4;
  CHECK_THROWS_AS(gen_synthetic(s), std::invalid_argument);
  s.probe_channel = 1;
  s.noise_rate = 1.5;
  CHECK_THROWS_AS(gen_synthetic(s), std::invalid_argument);
}
