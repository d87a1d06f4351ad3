#include "snndelay/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace snndelay {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  }
  return v;
}

std::string get_string(std::istream& in, std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  }
  return s;
}

DelayTiming parse_timing(const std::string& s) {
  for (auto t : {DelayTiming::Current, DelayTiming::Next}) {
    if (to_string(t) == s) return t;
  }
  throw std::runtime_error("checkpoint: unknown delay timing '" + s + "'");
}

std::map<std::string, Matrix*> named_tensors(Network& net) {
  std::map<std::string, Matrix*> out;
  for (auto* p : net.parameters()) out.emplace(p->name, &p->value);
  for (auto& [name, m] : net.buffers()) out.emplace(name, m);
  return out;
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["c_in"] = spec.c_in;
  j["c_out"] = spec.c_out;
  j["dropout_rate"] = spec.dropout_rate;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    j["layers"].push_back({{"h", l.h},
                           {"model", std::string(to_string(l.model))},
                           {"n_d", l.n_d},
                           {"scheme", std::string(to_string(l.scheme.kind))},
                           {"trainable", l.scheme.trainable},
                           {"recurrent", l.recurrent},
                           {"timing", std::string(to_string(l.timing))}});
  }
  return j.dump();
}

NetworkSpec spec_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetworkSpec spec;
    spec.c_in = j.at("c_in").get<std::size_t>();
    spec.c_out = j.at("c_out").get<std::size_t>();
    spec.dropout_rate = j.at("dropout_rate").get<double>();
    for (const auto& l : j.at("layers")) {
      LayerSpec layer;
      layer.h = l.at("h").get<std::size_t>();
      layer.model = parse_neuron_model(l.at("model").get<std::string>());
      layer.n_d = l.at("n_d").get<std::size_t>();
      layer.scheme.kind = parse_delay_scheme(l.at("scheme").get<std::string>());
      layer.scheme.trainable = l.at("trainable").get<bool>();
      layer.recurrent = l.at("recurrent").get<bool>();
      layer.timing = parse_timing(l.at("timing").get<std::string>());
      spec.layers.push_back(layer);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed spec: ") + e.what());
  }
}

void save_checkpoint(std::ostream& out, Network& net) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  const std::string spec = spec_to_json(net.spec());
  put<std::uint64_t>(out, spec.size());
  out.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  const auto tensors = named_tensors(net);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, m->rows());
    put<std::uint64_t>(out, m->cols());
    out.write(reinterpret_cast<const char*>(m->data().data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  save_checkpoint(out, net);
}

Network load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto spec_len = get<std::uint64_t>(in, "spec length");
  if (spec_len > (1u << 24)) throw std::runtime_error("checkpoint: implausible spec length");
  Network net(spec_from_json(get_string(in, spec_len, "spec")), 0);

  auto tensors = named_tensors(net);
  const auto count = get<std::uint32_t>(in, "tensor count");
  if (count != tensors.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(tensors.size()) +
                             " tensors, found " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, "name length");
    if (name_len > 4096) throw std::runtime_error("checkpoint: implausible tensor name length");
    const std::string name = get_string(in, name_len, "tensor name");
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
    Matrix& m = *it->second;
    const auto rows = get<std::uint64_t>(in, "rows");
    const auto cols = get<std::uint64_t>(in, "cols");
    if (rows != m.rows() || cols != m.cols()) {
      throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                               std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                               std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!in.read(reinterpret_cast<char*>(m.data().data()),
                 static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw std::runtime_error("checkpoint: truncated in tensor '" + name + "'");
    }
    tensors.erase(it);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint: trailing bytes after last tensor");
  }
  return net;
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace snndelay
