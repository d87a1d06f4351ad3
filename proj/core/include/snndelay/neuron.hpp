#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "snndelay/math.hpp"
#include "snndelay/rng.hpp"

namespace snndelay {

enum class NeuronModel { LIF, RLIF, AdLIF, RadLIF };

bool is_adaptive(NeuronModel model);
bool is_recurrent(NeuronModel model);
/// n_s: 1 for the LIF family (u), 2 for the adLIF family (u, w).
std::size_t intrinsic_state_size(NeuronModel model);
std::string_view to_string(NeuronModel model);
NeuronModel parse_neuron_model(std::string_view text);

/// Which delay buffer feeds the membrane update at step t. The LIF equations
/// read the buffer before it is advanced (v_d[t]); the adLIF equations read
/// it after (v_d[t+1]), so the current i_d already contributes.
enum class DelayTiming { Current, Next };

DelayTiming default_delay_timing(NeuronModel model);
std::string_view to_string(DelayTiming timing);

/// Shift-register delay state. buf[0] holds the most recent input.
struct DelayState {
  std::vector<double> buf;

  static DelayState zeros(std::size_t order) { return {std::vector<double>(order, 0.0)}; }
  std::size_t order() const { return buf.size(); }
};

/// Subdiagonal of the lower-shift transition matrix.
struct ShiftCoeffs {
  std::vector<double> a;

  static ShiftCoeffs ones(std::size_t order);
  /// Dense n_d x n_d transition matrix with `a` on the subdiagonal.
  Matrix transition() const;
};

/// v_d' = A_d v_d + B_d i_d with A_d the lower shift and B_d = e_0.
DelayState delay_step(const DelayState& st, const ShiftCoeffs& coeffs, double i_d);

struct NeuronState {
  double u = 0.0;
  std::optional<double> w;  // adaptation; present only for the adLIF family

  static NeuronState zero(NeuronModel model);
};

struct NeuronParams {
  double alpha = 0.9;
  double beta = 0.97;
  double a_adapt = 0.5;
  double b_adapt = 1.0;
  double theta = 1.0;
};

/// Closed clip intervals enforced after every optimizer step.
struct ClipRange {
  double lo;
  double hi;
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

inline constexpr ClipRange kAlphaRange{0.36, 0.96};
inline constexpr ClipRange kBetaRange{0.96, 0.99};
inline constexpr ClipRange kAdaptARange{0.0, 1.0};
inline constexpr ClipRange kAdaptBRange{0.0, 2.0};

enum class DelaySchemeKind { Ones, LinearDecay, ExpDecay, Uniform };

std::string_view to_string(DelaySchemeKind kind);
DelaySchemeKind parse_delay_scheme(std::string_view text);

struct DelayScheme {
  DelaySchemeKind kind = DelaySchemeKind::Uniform;
  bool trainable = false;
};

/// One neuron's A_sd row of length n_d.
///   Ones        1
///   LinearDecay (n_d - j) / n_d
///   ExpDecay    exp(-0.5 j)
///   Uniform     iid U(0, 1]
std::vector<double> build_asd(const DelayScheme& scheme, std::size_t n_d, RngStream& rng);

struct SpikeOutput {
  bool spike;
  double dgrad;  // boxcar surrogate derivative
};

/// Hard threshold (u >= theta fires) with a boxcar surrogate of height 0.5
/// on |u - theta| <= 0.5.
SpikeOutput surrogate_spike(double u, double theta);

inline constexpr double kBoxcarHalfWidth = 0.5;
inline constexpr double kBoxcarHeight = 0.5;

/// Spike nonlinearity used by the network. Heaviside is the real model;
/// Sigmoid is the smooth twin used for finite-difference gradient checks,
/// whose backward pass uses the exact sigmoid derivative.
struct SpikeFunction {
  enum class Kind { Heaviside, Sigmoid };
  Kind kind = Kind::Heaviside;
  double temperature = 0.2;

  static SpikeFunction heaviside() { return {Kind::Heaviside, 0.2}; }
  static SpikeFunction sigmoid(double temperature) { return {Kind::Sigmoid, temperature}; }

  double value(double u, double theta) const;
  /// d value / d u: boxcar surrogate for Heaviside, true derivative for Sigmoid.
  double derivative(double u, double theta) const;
};

struct StepResult {
  NeuronState state;
  DelayState delay;
  bool spike;
};

/// u' = alpha u + (1 - alpha) i_s - alpha theta s + asd . v_d[t];  v_d advanced with ones.
StepResult lif_step(const NeuronState& st, const DelayState& dl, const NeuronParams& p,
                    std::span<const double> asd, double i_s, double i_d);

/// u' = alpha u + (1 - alpha)(i_s - w) - alpha theta s + asd . v_d[t+1]
/// w' = a u + beta w + b s
StepResult adlif_step(const NeuronState& st, const DelayState& dl, const NeuronParams& p,
                      std::span<const double> asd, double i_s, double i_d);

/// General state-space neuron with a delay state:
///   s      = [C_s v_s + C_d v_d >= theta]
///   v_d'   = A_d v_d + B_d i_d
///   v_s'   = A_s v_s + B_s i_s + A_sd v_d(*) - R s
/// where v_d(*) is v_d or v_d' according to `timing`.
struct GenericNeuronSpec {
  Matrix A_s;   // n_s x n_s
  Matrix B_s;   // n_s x 1
  Matrix C_s;   // 1 x n_s
  Matrix R;     // n_s x 1
  Matrix A_d;   // n_d x n_d
  Matrix B_d;   // n_d x 1
  Matrix C_d;   // 1 x n_d
  Matrix A_sd;  // n_s x n_d
  double theta = 1.0;
  DelayTiming timing = DelayTiming::Current;

  std::size_t state_size() const { return A_s.rows(); }
  std::size_t delay_order() const { return A_d.rows(); }
  void validate() const;
};

struct GenericStepResult {
  std::vector<double> v_s;
  std::vector<double> v_d;
  bool spike;
};

GenericStepResult generic_step(const GenericNeuronSpec& spec, std::span<const double> v_s,
                               std::span<const double> v_d, double i_s, double i_d);

/// The generic matrices that reproduce lif_step / adlif_step.
GenericNeuronSpec make_lif_spec(const NeuronParams& p, std::span<const double> asd);
GenericNeuronSpec make_adlif_spec(const NeuronParams& p, std::span<const double> asd);

}  // namespace snndelay
