#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>

#include "snndelay/checkpoint.hpp"
#include "snndelay/training.hpp"

using namespace snndelay;

namespace {

std::string save_bytes(Network& net) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, net);
  return out.str();
}

Network load_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_checkpoint(in);
}

Tensor3 inputs(std::size_t C, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor3 x(4, 12, C);
  for (auto& v : x.data) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  return x;
}

}  // namespace

TEST_CASE("spec json round trip") {
  auto spec = NetworkSpec::uniform(7, 3, 5, 2, NeuronModel::RadLIF, 4,
                                   {DelaySchemeKind::ExpDecay, true}, 0.25);
  spec.layers[1].h = 6;
  const auto back = spec_from_json(spec_to_json(spec));
  CHECK(back.c_in == 7);
  CHECK(back.c_out == 3);
  CHECK(back.dropout_rate == 0.25);
  REQUIRE(back.layers.size() == 2);
  CHECK(back.layers[1].h == 6);
  CHECK(back.layers[0].model == NeuronModel::RadLIF);
  CHECK(back.layers[0].scheme.kind == DelaySchemeKind::ExpDecay);
  CHECK(back.layers[0].scheme.trainable);
  CHECK(back.layers[0].recurrent);
  CHECK(back.layers[0].timing == spec.layers[0].timing);
  CHECK(spec_to_json(back) == spec_to_json(spec));
  CHECK_THROWS(spec_from_json("{not json"));
}

TEST_CASE("checkpoint round trip is bit exact") {
  for (auto model : {NeuronModel::LIF, NeuronModel::RLIF, NeuronModel::AdLIF, NeuronModel::RadLIF}) {
    CAPTURE(to_string(model));
    Network net(NetworkSpec::uniform(5, 3, 6, 2, model, 3, {DelaySchemeKind::Uniform, true}), 12);
    ForwardOptions train;
    train.training = true;
    RngStream drop(3);
    train.dropout_rng = &drop;
    net.forward(inputs(5, 1), train);

    const std::string bytes = save_bytes(net);
    Network back = load_bytes(bytes);
    const auto pa = net.parameters(), pb = back.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->name == pb[i]->name);
      CHECK(pa[i]->value == pb[i]->value);
      CHECK(pa[i]->trainable == pb[i]->trainable);
    }
    const auto ba = net.buffers(), bb = back.buffers();
    for (std::size_t i = 0; i < ba.size(); ++i) CHECK(*ba[i].second == *bb[i].second);

    const auto x = inputs(5, 2);
    CHECK(net.forward(x, ForwardOptions{}) == back.forward(x, ForwardOptions{}));
    CHECK(save_bytes(back) == bytes);
  }
}

TEST_CASE("checkpoint file round trip") {
  Network net(NetworkSpec::uniform(4, 2, 3, 1, NeuronModel::AdLIF, 2, {}), 1);
  const auto path = std::filesystem::temp_directory_path() / "snndelay_test_ckpt.snnk";
  save_checkpoint(path, net);
  Network back = load_checkpoint(path);
  CHECK(save_bytes(back) == save_bytes(net));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}

TEST_CASE("corrupt checkpoints are rejected") {
  Network net(NetworkSpec::uniform(4, 2, 3, 1, NeuronModel::LIF, 2, {}), 1);
  const std::string good = save_bytes(net);

  std::string magic = good;
  magic[1] = 'X';
  CHECK_THROWS_AS(load_bytes(magic), std::runtime_error);

  std::string version = good;
  version[4] = 7;
  CHECK_THROWS_AS(load_bytes(version), std::runtime_error);

  CHECK_THROWS_AS(load_bytes(good.substr(0, good.size() - 3)), std::runtime_error);
  CHECK_THROWS_AS(load_bytes(good.substr(0, 10)), std::runtime_error);
  CHECK_THROWS_AS(load_bytes(good + "junk"), std::runtime_error);

  std::string renamed = good;
  const auto pos = renamed.find("layer0.W");
  REQUIRE(pos != std::string::npos);
  renamed[pos + 7] = 'Q';
  CHECK_THROWS_AS(load_bytes(renamed), std::runtime_error);
}
