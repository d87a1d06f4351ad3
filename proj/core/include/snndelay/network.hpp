#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snndelay/math.hpp"
#include "snndelay/neuron.hpp"
#include "snndelay/rng.hpp"

namespace snndelay {

/// Dense [batch, time, width] tensor, row-major with width fastest.
struct Tensor3 {
  std::size_t batch = 0;
  std::size_t time = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t b, std::size_t t, std::size_t w, double fill = 0.0)
      : batch(b), time(t), width(w), data(b * t * w, fill) {}

  double& at(std::size_t b, std::size_t t, std::size_t n) { return data[(b * time + t) * width + n]; }
  double at(std::size_t b, std::size_t t, std::size_t n) const {
    return data[(b * time + t) * width + n];
  }
  std::span<double> row(std::size_t b, std::size_t t) {
    return {data.data() + (b * time + t) * width, width};
  }
  std::span<const double> row(std::size_t b, std::size_t t) const {
    return {data.data() + (b * time + t) * width, width};
  }
};

struct LayerSpec {
  std::size_t h = 128;
  NeuronModel model = NeuronModel::AdLIF;
  std::size_t n_d = 0;
  DelayScheme scheme;
  bool recurrent = false;
  DelayTiming timing = DelayTiming::Next;

  /// Fills `recurrent` and `timing` from the model.
  static LayerSpec make(std::size_t h, NeuronModel model, std::size_t n_d, DelayScheme scheme);
  void validate() const;
};

struct NetworkSpec {
  std::size_t c_in = 140;
  std::size_t c_out = 20;
  std::vector<LayerSpec> layers;
  double dropout_rate = 0.4;

  /// l identical hidden layers.
  static NetworkSpec uniform(std::size_t c_in, std::size_t c_out, std::size_t h, std::size_t l,
                             NeuronModel model, std::size_t n_d, DelayScheme scheme,
                             double dropout_rate = 0.4);
  void validate() const;
  /// True when every hidden layer shares h, model, n_d and scheme.
  bool homogeneous() const;
};

struct ParamCount {
  std::size_t feedforward = 0;
  std::size_t recurrent = 0;
  std::size_t neuron = 0;
  std::size_t norm = 0;
  std::size_t delay = 0;
  std::size_t total = 0;
};

/// Closed-form trainable-parameter count for an l x h network:
///   feedforward c_in h + h^2 (l - 1) + h c_out
///   recurrent   l (h^2 - h)            (R-variants only)
///   neuron      l h  or  4 l h         (LIF / adLIF family)
///   norm        2 (h l + c_out)
///   delay       n_d h l                (trainable A_sd only)
/// Requires a homogeneous spec.
ParamCount count_params(const NetworkSpec& spec, bool asd_trainable);

/// Stored state variables: sum over layers of (n_s + n_d) h.
std::size_t count_state_memory(const NetworkSpec& spec);

/// A named tensor plus its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
  bool zero_diagonal = false;  // recurrent V: diagonal is fixed at zero

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool train, bool zero_diag = false);

  /// Entries an optimizer may change.
  std::size_t trainable_size() const;
  void zero_grad() { grad.fill(0.0); }
  /// Re-imposes structural constraints on value (and grad).
  void enforce_structure();
};

/// Batch normalization over a feature axis, statistics pooled over all rows
/// (batch x time) in training mode.
struct BatchNorm {
  Parameter gamma;
  Parameter bias;
  Matrix running_mean;
  Matrix running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm() = default;
  BatchNorm(std::size_t features, const std::string& prefix);
  std::size_t features() const { return gamma.value.cols(); }
};

struct BatchNormCache {
  bool training = false;
  std::vector<double> inv_std;
  Tensor3 xhat;
};

/// Applies batch norm to `x` in place, recording what the backward pass needs.
void batch_norm_forward(BatchNorm& bn, Tensor3& x, bool training, bool update_running,
                        BatchNormCache& cache);
/// Turns dL/dy into dL/dx in place and accumulates gamma/bias gradients.
void batch_norm_backward(BatchNorm& bn, const BatchNormCache& cache, Tensor3& grad);

struct ForwardOptions {
  bool training = false;
  bool update_running_stats = true;
  SpikeFunction spike = SpikeFunction::heaviside();
  RngStream* dropout_rng = nullptr;  // required when training with dropout > 0
  std::size_t threads = 1;
};

/// Everything a hidden layer's backward pass needs from its forward pass.
struct LayerTape {
  Tensor3 input;    // [B, T, fan_in]
  BatchNormCache bn;
  Tensor3 drive;    // normalized feedforward drive; the delay input i_d
  Tensor3 i_s;      // drive plus recurrent input
  Tensor3 u;        // membrane potential u[t] before the step
  Tensor3 w;        // adaptation w[t] (adaptive models)
  Tensor3 spikes;   // s[t]
  Tensor3 mask;     // inverted-dropout multipliers, empty if unused
  Tensor3 output;   // spikes after dropout
};

struct ReadoutTape {
  Tensor3 input;
  BatchNormCache bn;
};

struct GradTape {
  ForwardOptions options;
  std::vector<LayerTape> layers;
  ReadoutTape readout;
};

class HiddenLayer {
 public:
  HiddenLayer(const LayerSpec& spec, std::size_t fan_in, RngStream& rng, const std::string& prefix);

  const LayerSpec& spec() const { return spec_; }
  std::size_t fan_in() const { return W_.value.cols(); }

  /// Runs the layer over a full batch of sequences. Input and output are
  /// [B, T, fan_in] and [B, T, h]; the tape receives every intermediate.
  void forward(const Tensor3& input, const ForwardOptions& opts, bool apply_dropout,
               double dropout_rate, LayerTape& tape);

  /// Accumulates parameter gradients and returns dL/d input when requested.
  void backward(const LayerTape& tape, const ForwardOptions& opts, const Tensor3& grad_output,
                Tensor3* grad_input);

  void collect(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<std::pair<std::string, Matrix*>>& out);

  Parameter& W() { return W_; }
  Parameter& V() { return V_; }
  Parameter& alpha() { return alpha_; }
  Parameter& beta() { return beta_; }
  Parameter& a_adapt() { return a_; }
  Parameter& b_adapt() { return b_; }
  Parameter& asd() { return asd_; }
  BatchNorm& bn() { return bn_; }
  const Parameter& asd() const { return asd_; }

  NeuronParams neuron_params(std::size_t n) const;
  void clip_neuron_params();
  bool neuron_params_in_range() const;

 private:
  LayerSpec spec_;
  Parameter W_;
  Parameter V_;
  BatchNorm bn_;
  Parameter alpha_;
  Parameter beta_;
  Parameter a_;
  Parameter b_;
  Parameter asd_;
  double theta_ = 1.0;
};

/// Hidden spiking layers followed by a non-spiking accumulative readout:
/// logits = (1/T) sum_t BN(W_out s[t]).
class Network {
 public:
  Network(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  void set_dropout_rate(double rate);

  /// logits is [B, c_out]. Pass a tape to enable backward().
  Matrix forward(const Tensor3& input, const ForwardOptions& opts, GradTape* tape = nullptr);

  /// Accumulates gradients from dL/dlogits into every parameter's grad.
  void backward(const GradTape& tape, const Matrix& dlogits);

  std::vector<Parameter*> parameters();
  std::vector<std::pair<std::string, Matrix*>> buffers();
  void zero_grad();

  std::vector<HiddenLayer>& layers() { return layers_; }
  const std::vector<HiddenLayer>& layers() const { return layers_; }
  Parameter& readout_weight() { return W_out_; }
  BatchNorm& readout_bn() { return bn_out_; }

  /// Trainable entries actually registered (runtime counterpart of count_params).
  std::size_t trainable_count();

  void clip_neuron_params();
  bool neuron_params_in_range() const;

 private:
  NetworkSpec spec_;
  std::vector<HiddenLayer> layers_;
  Parameter W_out_;
  BatchNorm bn_out_;
};

/// Uniform in +-1/sqrt(fan_in).
Matrix fan_in_uniform(std::size_t rows, std::size_t cols, RngStream& rng);

}  // namespace snndelay
