#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "snndelay/neuron.hpp"
#include "snndelay/rng.hpp"

using namespace snndelay;

namespace {

DelayState feed(DelayState st, std::initializer_list<double> xs, const ShiftCoeffs& c) {
  for (double x : xs) st = delay_step(st, c, x);
  return st;
}

}  // namespace

TEST_CASE("delay_step examples") {
  const auto ones = ShiftCoeffs::ones(3);
  CHECK(feed(DelayState::zeros(3), {3, 7, 2}, ones).buf == std::vector<double>{2, 7, 3});
  CHECK(feed(DelayState::zeros(3), {0, 0, 0, 0}, ones).buf == std::vector<double>{0, 0, 0});

  const ShiftCoeffs a{{2, 3}};
  auto st = delay_step(DelayState::zeros(3), a, 1);
  CHECK(st.buf == std::vector<double>{1, 0, 0});
  st = delay_step(st, a, 0);
  CHECK(st.buf == std::vector<double>{0, 2, 0});
  st = delay_step(st, a, 0);
  CHECK(st.buf == std::vector<double>{0, 0, 6});
}

TEST_CASE("delay_step degenerate and malformed cases") {
  CHECK(delay_step(DelayState::zeros(0), ShiftCoeffs{}, 5.0).buf.empty());
  CHECK_THROWS_AS(delay_step(DelayState::zeros(3), ShiftCoeffs{{1}}, 1.0), std::invalid_argument);
}

TEST_CASE("delay buffer equals a ring-buffer history") {
  RngStream rng(17);
  for (std::size_t nd : {1u, 5u, 10u, 100u}) {
    const auto ones = ShiftCoeffs::ones(nd);
    for (int stream = 0; stream < 20; ++stream) {
      DelayState st = DelayState::zeros(nd);
      std::deque<double> history;
      const std::size_t steps = 1 + rng.uniform_int(2 * nd + 5);
      for (std::size_t t = 0; t < steps; ++t) {
        const double x = rng.uniform(-5.0, 5.0);
        st = delay_step(st, ones, x);
        history.push_front(x);
        if (history.size() > nd) history.pop_back();
      }
      for (std::size_t j = 0; j < nd; ++j) {
        const double expect = j < history.size() ? history[j] : 0.0;
        REQUIRE(st.buf[j] == expect);
      }
    }
  }
}

TEST_CASE("shift coefficients give the product form") {
  const ShiftCoeffs c{{0.5, 2.0, -1.5, 3.0}};
  const Matrix A = c.transition();
  CHECK(A(1, 0) == 0.5);
  CHECK(A(4, 3) == 3.0);
  CHECK(A(0, 0) == 0.0);
  RngStream rng(4);
  DelayState st = DelayState::zeros(5);
  std::vector<double> inputs;
  for (int t = 0; t < 12; ++t) {
    inputs.push_back(rng.uniform(-1.0, 1.0));
    st = delay_step(st, c, inputs.back());
  }
  double prod = 1.0;
  for (std::size_t j = 0; j < 5; ++j) {
    if (j > 0) prod *= c.a[j - 1];
    CHECK(std::abs(st.buf[j] - prod * inputs[inputs.size() - 1 - j]) <= 1e-12);
  }
}

TEST_CASE("build_asd schemes") {
  RngStream rng(1);
  const auto lin = build_asd({DelaySchemeKind::LinearDecay, false}, 5, rng);
  const std::vector<double> lin_expect{1.0, 0.8, 0.6, 0.4, 0.2};
  for (std::size_t j = 0; j < 5; ++j) CHECK(lin[j] == doctest::Approx(lin_expect[j]).epsilon(1e-15));

  CHECK(build_asd({DelaySchemeKind::Ones, false}, 3, rng) == std::vector<double>{1, 1, 1});

  const auto ex = build_asd({DelaySchemeKind::ExpDecay, false}, 5, rng);
  const std::vector<double> ex_expect{1.0, 0.6065, 0.3679, 0.2231, 0.1353};
  for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(ex[j] - ex_expect[j]) < 5e-5);

  const auto uni = build_asd({DelaySchemeKind::Uniform, false}, 1000, rng);
  for (double v : uni) CHECK((v > 0.0 && v <= 1.0));

  CHECK_THROWS_AS(build_asd({DelaySchemeKind::Ones, false}, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(parse_delay_scheme("gaussian"), std::invalid_argument);
}

TEST_CASE("uniform rows are reproducible from the seed") {
  RngStream a(99), b(99);
  CHECK(build_asd({DelaySchemeKind::Uniform, true}, 10, a) ==
        build_asd({DelaySchemeKind::Uniform, true}, 10, b));
}

TEST_CASE("surrogate_spike examples") {
  auto r = surrogate_spike(1.2, 1.0);
  CHECK(r.spike);
  CHECK(r.dgrad == 0.5);
  r = surrogate_spike(0.2, 1.0);
  CHECK_FALSE(r.spike);
  CHECK(r.dgrad == 0.0);
  r = surrogate_spike(1.0, 1.0);
  CHECK(r.spike);
  CHECK(r.dgrad == 0.5);
  CHECK(surrogate_spike(0.5, 1.0).dgrad == 0.5);
  CHECK(surrogate_spike(0.49, 1.0).dgrad == 0.0);
}

TEST_CASE("sigmoid twin derivative matches its value") {
  const auto f = SpikeFunction::sigmoid(0.2);
  for (double u : {-0.5, 0.3, 0.9, 1.0, 1.4, 2.0}) {
    const double h = 1e-6;
    const double numeric = (f.value(u + h, 1.0) - f.value(u - h, 1.0)) / (2 * h);
    CHECK(f.derivative(u, 1.0) == doctest::Approx(numeric).epsilon(1e-7));
  }
  CHECK(f.value(1.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("lif_step examples") {
  NeuronParams p;
  p.alpha = 0.5;
  p.theta = 1.0;
  NeuronState st;
  st.u = 0.8;
  auto r = lif_step(st, DelayState::zeros(0), p, {}, 1.0, 1.0);
  CHECK_FALSE(r.spike);
  CHECK(r.state.u == doctest::Approx(0.9));

  st.u = 1.2;
  r = lif_step(st, DelayState::zeros(0), p, {}, 1.0, 1.0);
  CHECK(r.spike);
  CHECK(r.state.u == doctest::Approx(0.6));
}

TEST_CASE("lif_step without delay is the plain LIF update") {
  RngStream rng(8);
  NeuronParams p;
  p.alpha = 0.7;
  NeuronState st;
  double u_ref = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double x = rng.uniform(-1.0, 3.0);
    const bool s_ref = u_ref >= p.theta;
    const double next_ref = p.alpha * u_ref + (1 - p.alpha) * x - p.alpha * p.theta * (s_ref ? 1 : 0);
    const auto r = lif_step(st, DelayState::zeros(0), p, {}, x, x);
    REQUIRE(r.spike == s_ref);
    REQUIRE(r.state.u == next_ref);
    st = r.state;
    u_ref = next_ref;
  }
}

TEST_CASE("lif_step uses the pre-update delay buffer") {
  NeuronParams p;
  p.alpha = 0.5;
  const std::vector<double> asd{1.0, 1.0};
  DelayState dl{{2.0, 3.0}};
  const auto r = lif_step(NeuronState{}, dl, p, asd, 0.0, 10.0);
  CHECK(r.state.u == doctest::Approx(5.0));
  CHECK(r.delay.buf == std::vector<double>{10.0, 2.0});
}

TEST_CASE("adlif_step examples") {
  NeuronParams p;
  p.alpha = 0.9;
  p.beta = 0.97;
  p.a_adapt = 0.5;
  p.b_adapt = 1.0;
  auto st = NeuronState::zero(NeuronModel::AdLIF);
  auto r = adlif_step(st, DelayState::zeros(0), p, {}, 1.0, 1.0);
  CHECK_FALSE(r.spike);
  CHECK(r.state.u == doctest::Approx(0.1));
  CHECK(*r.state.w == doctest::Approx(0.0));

  st.u = 1.5;
  r = adlif_step(st, DelayState::zeros(0), p, {}, 0.0, 0.0);
  CHECK(r.spike);
  CHECK(*r.state.w == doctest::Approx(0.5 * 1.5 + 1.0));

  st = NeuronState::zero(NeuronModel::AdLIF);
  DelayState dl = DelayState::zeros(3);
  const std::vector<double> asd{1, 1, 1};
  for (int t = 0; t < 50; ++t) {
    r = adlif_step(st, dl, p, asd, 0.0, 0.0);
    REQUIRE_FALSE(r.spike);
    st = r.state;
    dl = r.delay;
  }
  CHECK(st.u == 0.0);
  CHECK(*st.w == 0.0);
}

TEST_CASE("adlif_step uses the post-update delay buffer") {
  NeuronParams p;
  const std::vector<double> asd{1.0, 0.0};
  const auto r = adlif_step(NeuronState::zero(NeuronModel::AdLIF), DelayState::zeros(2), p, asd,
                            0.0, 4.0);
  CHECK(r.state.u == doctest::Approx(4.0));
}

TEST_CASE("steps reject non-finite inputs and mismatched rows") {
  NeuronParams p;
  CHECK_THROWS(lif_step(NeuronState{}, DelayState::zeros(0), p, {}, std::nan(""), 0.0));
  const std::vector<double> asd{1.0};
  CHECK_THROWS_AS(lif_step(NeuronState{}, DelayState::zeros(2), p, asd, 0.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("ones row sums the last n_d inputs") {
  RngStream rng(12);
  const std::size_t nd = 6;
  const std::vector<double> ones(nd, 1.0);
  DelayState dl = DelayState::zeros(nd);
  std::deque<double> last;
  for (int t = 0; t < 40; ++t) {
    double dotv = 0.0;
    for (std::size_t j = 0; j < nd; ++j) dotv += ones[j] * dl.buf[j];
    double sum = 0.0;
    for (double v : last) sum += v;
    CHECK(dotv == doctest::Approx(sum).epsilon(1e-14));
    const double x = static_cast<double>(rng.uniform_int(4));
    dl = delay_step(dl, ShiftCoeffs::ones(nd), x);
    last.push_front(x);
    if (last.size() > nd) last.pop_back();
  }
}

TEST_CASE("generic_step with all-zero matrices never spikes") {
  GenericNeuronSpec spec;
  spec.A_s = Matrix(2, 2);
  spec.B_s = Matrix(2, 1);
  spec.C_s = Matrix(1, 2);
  spec.R = Matrix(2, 1);
  spec.A_d = Matrix(3, 3);
  spec.B_d = Matrix(3, 1);
  spec.C_d = Matrix(1, 3);
  spec.A_sd = Matrix(2, 3);
  std::vector<double> vs(2, 0.0), vd(3, 0.0);
  RngStream rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto r = generic_step(spec, vs, vd, rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0));
    REQUIRE_FALSE(r.spike);
    REQUIRE(r.v_s == std::vector<double>{0, 0});
    vs = r.v_s;
    vd = r.v_d;
  }
}

TEST_CASE("generic_step rejects inconsistent dimensions") {
  NeuronParams p;
  const std::vector<double> asd{1.0, 1.0};
  auto spec = make_lif_spec(p, asd);
  spec.A_sd = Matrix(1, 3);
  std::vector<double> vs(1, 0.0), vd(2, 0.0);
  CHECK_THROWS_AS(generic_step(spec, vs, vd, 0.0, 0.0), std::invalid_argument);
}

namespace {

template <typename StepFn>
void co_simulate(NeuronModel model, StepFn step, std::uint64_t seed, std::size_t nd) {
  RngStream rng(seed);
  NeuronParams p;
  p.alpha = rng.uniform(0.36, 0.96);
  p.beta = rng.uniform(0.96, 0.99);
  p.a_adapt = rng.uniform(0.0, 1.0);
  p.b_adapt = rng.uniform(0.0, 2.0);
  const auto asd =
      nd > 0 ? build_asd({DelaySchemeKind::Uniform, false}, nd, rng) : std::vector<double>{};
  const bool adaptive = is_adaptive(model);
  const auto spec = adaptive ? make_adlif_spec(p, asd) : make_lif_spec(p, asd);

  NeuronState st = NeuronState::zero(model);
  DelayState dl = DelayState::zeros(nd);
  std::vector<double> vs(adaptive ? 2 : 1, 0.0), vd(nd, 0.0);
  std::size_t spikes = 0;
  for (int t = 0; t < 1000; ++t) {
    const double i_s = rng.uniform(-1.0, 3.0);
    const double i_d = rng.uniform(-1.0, 3.0);
    const auto a = step(st, dl, p, asd, i_s, i_d);
    const auto g = generic_step(spec, vs, vd, i_s, i_d);
    REQUIRE(a.spike == g.spike);
    REQUIRE(a.state.u == g.v_s[0]);
    if (adaptive) REQUIRE(*a.state.w == g.v_s[1]);
    REQUIRE(a.delay.buf == g.v_d);
    spikes += a.spike ? 1 : 0;
    st = a.state;
    dl = a.delay;
    vs = g.v_s;
    vd = g.v_d;
  }
  CHECK(spikes > 0);
}

}  // namespace

TEST_CASE("generic_step reproduces lif_step and adlif_step bit for bit") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::size_t nd : {0u, 1u, 5u}) {
      co_simulate(NeuronModel::LIF, lif_step, seed, nd);
      co_simulate(NeuronModel::AdLIF, adlif_step, seed, nd);
    }
  }
}

TEST_CASE("model helpers") {
  CHECK(is_recurrent(NeuronModel::RLIF));
  CHECK_FALSE(is_recurrent(NeuronModel::AdLIF));
  CHECK(is_adaptive(NeuronModel::RadLIF));
  CHECK(intrinsic_state_size(NeuronModel::LIF) == 1);
  CHECK(intrinsic_state_size(NeuronModel::AdLIF) == 2);
  CHECK(default_delay_timing(NeuronModel::LIF) == DelayTiming::Current);
  CHECK(default_delay_timing(NeuronModel::AdLIF) == DelayTiming::Next);
  CHECK(parse_neuron_model("radlif") == NeuronModel::RadLIF);
  CHECK_THROWS_AS(parse_neuron_model("izhikevich"), std::invalid_argument);
}
