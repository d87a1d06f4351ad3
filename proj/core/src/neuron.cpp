#include "snndelay/neuron.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace snndelay {

bool is_adaptive(NeuronModel model) {
  return model == NeuronModel::AdLIF || model == NeuronModel::RadLIF;
}

bool is_recurrent(NeuronModel model) {
  return model == NeuronModel::RLIF || model == NeuronModel::RadLIF;
}

std::size_t intrinsic_state_size(NeuronModel model) { return is_adaptive(model) ? 2 : 1; }

std::string_view to_string(NeuronModel model) {
  switch (model) {
    case NeuronModel::LIF: return "lif";
    case NeuronModel::RLIF: return "rlif";
    case NeuronModel::AdLIF: return "adlif";
    case NeuronModel::RadLIF: return "radlif";
  }
  return "?";
}

NeuronModel parse_neuron_model(std::string_view text) {
  if (text == "lif") return NeuronModel::LIF;
  if (text == "rlif") return NeuronModel::RLIF;
  if (text == "adlif") return NeuronModel::AdLIF;
  if (text == "radlif") return NeuronModel::RadLIF;
  throw std::invalid_argument("unknown neuron model '" + std::string(text) + "'");
}

DelayTiming default_delay_timing(NeuronModel model) {
  return is_adaptive(model) ? DelayTiming::Next : DelayTiming::Current;
}

std::string_view to_string(DelayTiming timing) {
  return timing == DelayTiming::Current ? "current" : "next";
}

std::string_view to_string(DelaySchemeKind kind) {
  switch (kind) {
    case DelaySchemeKind::Ones: return "ones";
    case DelaySchemeKind::LinearDecay: return "lineardecay";
    case DelaySchemeKind::ExpDecay: return "expdecay";
    case DelaySchemeKind::Uniform: return "uniform";
  }
  return "?";
}

DelaySchemeKind parse_delay_scheme(std::string_view text) {
  if (text == "ones") return DelaySchemeKind::Ones;
  if (text == "lineardecay" || text == "linear") return DelaySchemeKind::LinearDecay;
  if (text == "expdecay" || text == "exp") return DelaySchemeKind::ExpDecay;
  if (text == "uniform") return DelaySchemeKind::Uniform;
  throw std::invalid_argument("unknown delay scheme '" + std::string(text) + "'");
}

ShiftCoeffs ShiftCoeffs::ones(std::size_t order) {
  return {std::vector<double>(order > 0 ? order - 1 : 0, 1.0)};
}

Matrix ShiftCoeffs::transition() const {
  const std::size_t n = a.size() + 1;
  Matrix m(n, n);
  for (std::size_t j = 1; j < n; ++j) m(j, j - 1) = a[j - 1];
  return m;
}

DelayState delay_step(const DelayState& st, const ShiftCoeffs& coeffs, double i_d) {
  const std::size_t n = st.order();
  if (n == 0) return {};
  if (coeffs.a.size() != n - 1) {
    throw std::invalid_argument("delay_step: expected " + std::to_string(n - 1) +
                                " shift coefficients, got " + std::to_string(coeffs.a.size()));
  }
  DelayState next{std::vector<double>(n)};
  next.buf[0] = i_d;
  for (std::size_t j = 1; j < n; ++j) next.buf[j] = coeffs.a[j - 1] * st.buf[j - 1];
  return next;
}

NeuronState NeuronState::zero(NeuronModel model) {
  NeuronState st;
  if (is_adaptive(model)) st.w = 0.0;
  return st;
}

std::vector<double> build_asd(const DelayScheme& scheme, std::size_t n_d, RngStream& rng) {
  if (n_d == 0) throw std::invalid_argument("build_asd: delay order must be at least 1");
  std::vector<double> row(n_d);
  const double n = static_cast<double>(n_d);
  for (std::size_t j = 0; j < n_d; ++j) {
    const double jj = static_cast<double>(j);
    switch (scheme.kind) {
      case DelaySchemeKind::Ones: row[j] = 1.0; break;
      case DelaySchemeKind::LinearDecay: row[j] = (n - jj) / n; break;
      case DelaySchemeKind::ExpDecay: row[j] = std::exp(-0.5 * jj); break;
      case DelaySchemeKind::Uniform: row[j] = rng.uniform(0.0, 1.0); break;
      default: throw std::invalid_argument("build_asd: unknown delay scheme");
    }
  }
  return row;
}

SpikeOutput surrogate_spike(double u, double theta) {
  const bool fired = u >= theta;
  const double dgrad = std::abs(u - theta) <= kBoxcarHalfWidth ? kBoxcarHeight : 0.0;
  return {fired, dgrad};
}

double SpikeFunction::value(double u, double theta) const {
  if (kind == Kind::Heaviside) return u >= theta ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-(u - theta) / temperature));
}

double SpikeFunction::derivative(double u, double theta) const {
  if (kind == Kind::Heaviside) return surrogate_spike(u, theta).dgrad;
  const double s = value(u, theta);
  return s * (1.0 - s) / temperature;
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::domain_error(std::string("neuron step: non-finite ") + what);
}

void check_step_inputs(const NeuronState& st, const DelayState& dl, std::span<const double> asd,
                       double i_s, double i_d) {
  if (asd.size() != dl.order()) {
    throw std::invalid_argument("neuron step: A_sd row length " + std::to_string(asd.size()) +
                                " does not match delay order " + std::to_string(dl.order()));
  }
  require_finite(st.u, "membrane potential");
  if (st.w) require_finite(*st.w, "adaptation");
  require_finite(i_s, "i_s");
  require_finite(i_d, "i_d");
}

}  // namespace

// Sums are grouped as in generic_step (A_s v_s, + B_s i_s, + A_sd v_d, - R s)
// so the two routes round identically.
StepResult lif_step(const NeuronState& st, const DelayState& dl, const NeuronParams& p,
                    std::span<const double> asd, double i_s, double i_d) {
  check_step_inputs(st, dl, asd, i_s, i_d);
  const bool s = st.u >= p.theta;
  const double spk = s ? 1.0 : 0.0;
  double u = p.alpha * st.u;
  u += (1.0 - p.alpha) * i_s;
  u += dot(asd, dl.buf);
  u -= (p.alpha * p.theta) * spk;
  StepResult out;
  out.state.u = u;
  out.delay = delay_step(dl, ShiftCoeffs::ones(dl.order()), i_d);
  out.spike = s;
  return out;
}

StepResult adlif_step(const NeuronState& st, const DelayState& dl, const NeuronParams& p,
                      std::span<const double> asd, double i_s, double i_d) {
  if (!st.w) throw std::invalid_argument("adlif_step: state has no adaptation variable");
  check_step_inputs(st, dl, asd, i_s, i_d);
  const double w = *st.w;
  const bool s = st.u >= p.theta;
  const double spk = s ? 1.0 : 0.0;

  StepResult out;
  out.delay = delay_step(dl, ShiftCoeffs::ones(dl.order()), i_d);
  double u = p.alpha * st.u;
  u += -(1.0 - p.alpha) * w;
  u += (1.0 - p.alpha) * i_s;
  u += dot(asd, out.delay.buf);
  u -= (p.alpha * p.theta) * spk;
  double w_next = p.a_adapt * st.u;
  w_next += p.beta * w;
  w_next += p.b_adapt * spk;
  out.state.u = u;
  out.state.w = w_next;
  out.spike = s;
  return out;
}

void GenericNeuronSpec::validate() const {
  const std::size_t ns = A_s.rows();
  const std::size_t nd = A_d.rows();
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw std::invalid_argument(std::string("GenericNeuronSpec: ") + name + " must be " +
                                  std::to_string(r) + "x" + std::to_string(c) + ", got " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
  };
  expect(A_s, ns, ns, "A_s");
  expect(B_s, ns, 1, "B_s");
  expect(C_s, 1, ns, "C_s");
  expect(R, ns, 1, "R");
  expect(A_d, nd, nd, "A_d");
  expect(B_d, nd, 1, "B_d");
  expect(C_d, 1, nd, "C_d");
  expect(A_sd, ns, nd, "A_sd");
}

GenericStepResult generic_step(const GenericNeuronSpec& spec, std::span<const double> v_s,
                               std::span<const double> v_d, double i_s, double i_d) {
  spec.validate();
  const std::size_t ns = spec.state_size();
  const std::size_t nd = spec.delay_order();
  if (v_s.size() != ns || v_d.size() != nd) {
    throw std::invalid_argument("generic_step: state dimensions do not match spec");
  }
  const double readout = dot(spec.C_s.row(0), v_s) + dot(spec.C_d.row(0), v_d);
  const bool s = readout >= spec.theta;
  const double spk = s ? 1.0 : 0.0;

  GenericStepResult out;
  out.v_d = matvec(spec.A_d, v_d);
  for (std::size_t j = 0; j < nd; ++j) out.v_d[j] += spec.B_d(j, 0) * i_d;

  std::span<const double> delay_in = spec.timing == DelayTiming::Current
                                         ? v_d
                                         : std::span<const double>(out.v_d);
  out.v_s = matvec(spec.A_s, v_s);
  for (std::size_t i = 0; i < ns; ++i) {
    out.v_s[i] += spec.B_s(i, 0) * i_s;
    if (nd > 0) out.v_s[i] += dot(spec.A_sd.row(i), delay_in);
    out.v_s[i] -= spec.R(i, 0) * spk;
  }
  out.spike = s;
  return out;
}

namespace {

void fill_shift(GenericNeuronSpec& spec, std::size_t nd) {
  spec.A_d = ShiftCoeffs::ones(nd).transition();
  if (nd == 0) spec.A_d = Matrix(0, 0);
  spec.B_d = Matrix(nd, 1);
  if (nd > 0) spec.B_d(0, 0) = 1.0;
  spec.C_d = Matrix(1, nd);
}

}  // namespace

GenericNeuronSpec make_lif_spec(const NeuronParams& p, std::span<const double> asd) {
  GenericNeuronSpec spec;
  spec.A_s = Matrix(1, 1, p.alpha);
  spec.B_s = Matrix(1, 1, 1.0 - p.alpha);
  spec.C_s = Matrix(1, 1, 1.0);
  spec.R = Matrix(1, 1, p.alpha * p.theta);
  fill_shift(spec, asd.size());
  spec.A_sd = Matrix(1, asd.size(), std::vector<double>(asd.begin(), asd.end()));
  spec.theta = p.theta;
  spec.timing = DelayTiming::Current;
  return spec;
}

GenericNeuronSpec make_adlif_spec(const NeuronParams& p, std::span<const double> asd) {
  GenericNeuronSpec spec;
  spec.A_s = Matrix(2, 2, {p.alpha, -(1.0 - p.alpha), p.a_adapt, p.beta});
  spec.B_s = Matrix(2, 1, {1.0 - p.alpha, 0.0});
  spec.C_s = Matrix(1, 2, {1.0, 0.0});
  spec.R = Matrix(2, 1, {p.alpha * p.theta, -p.b_adapt});
  fill_shift(spec, asd.size());
  spec.A_sd = Matrix(2, asd.size());
  for (std::size_t j = 0; j < asd.size(); ++j) spec.A_sd(0, j) = asd[j];
  spec.theta = p.theta;
  spec.timing = DelayTiming::Next;
  return spec;
}

}  // namespace snndelay
