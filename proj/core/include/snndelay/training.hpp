#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snndelay/data.hpp"
#include "snndelay/network.hpp"
#include "snndelay/rng.hpp"

namespace snndelay {

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double loss = 0.0;
  std::vector<double> dlogits;
};

/// -log softmax(logits)[label], max-subtracted. dlogits = softmax - onehot.
LossResult cross_entropy(std::span<const double> logits, std::size_t label);

/// Same with a soft target distribution (CutMix labels).
LossResult soft_cross_entropy(std::span<const double> logits, std::span<const double> target);

// ---------------------------------------------------------------------------
// Optimizer and schedule

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct OptimState {
  AdamWConfig config;
  std::size_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

OptimState make_optim_state(std::span<Parameter* const> params, const AdamWConfig& config);

/// Decoupled weight decay, applied to trainable entries only:
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
/// Frozen parameters are left untouched bit for bit.
void adamw_update(OptimState& opt, std::span<Parameter* const> params, double lr);

/// 0.5 base (1 + cos(pi epoch / total)), floored at 0.
double cosine_lr(std::size_t epoch, std::size_t total, double base);

NeuronParams clip_neuron_params(const NeuronParams& p);

// ---------------------------------------------------------------------------
// Augmentation

struct MaskAugmentConfig {
  double time_fraction = 0.1;
  double channel_fraction = 0.1;
  double time_probability = 0.5;
  double channel_probability = 0.5;
};

/// With time_probability, zeroes round(time_fraction T) distinct frames; with
/// channel_probability, zeroes round(channel_fraction C) distinct channels.
SpikeFrameTensor augment_mask(const SpikeFrameTensor& frames, const MaskAugmentConfig& config,
                              RngStream& rng);

struct MixedSample {
  SpikeFrameTensor frames;
  std::vector<double> target;
  double lambda = 0.0;  // fraction of frames taken from b
};

/// Replaces frames [start, start + round(lambda T)) of a with those of b.
/// The soft label uses the realized fraction of replaced frames.
MixedSample cutmix(const SpikeFrameTensor& a, std::size_t label_a, const SpikeFrameTensor& b,
                   std::size_t label_b, std::size_t n_classes, double lambda, std::size_t start);

/// lambda ~ U[0, 1), segment start uniform over valid positions.
MixedSample augment_cutmix(const SpikeFrameTensor& a, std::size_t label_a,
                           const SpikeFrameTensor& b, std::size_t label_b, std::size_t n_classes,
                           RngStream& rng);

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  double base_lr = 1e-2;
  double weight_decay = 1e-5;
  double dropout = 0.4;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  bool augment = true;
  MaskAugmentConfig mask;
  double cutmix_probability = 0.5;
  std::size_t threads = 1;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
  double seconds = 0.0;
};

/// One line of the per-epoch metrics stream.
struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double seconds = 0.0;
};

enum class MetricsFormat { Csv, JsonLines };

void write_metrics_header(std::ostream& out, MetricsFormat format);
void write_metrics_line(std::ostream& out, MetricsFormat format, const EpochRecord& record);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stacks samples [indices] into a [B, T, C] batch.
Tensor3 make_batch(const FrameDataset& data, std::span<const std::size_t> indices);

class Trainer {
 public:
  Trainer(Network& net, const TrainConfig& config);

  /// Shuffles (seeded), augments, runs forward/BPTT/AdamW/clip per batch.
  EpochMetrics train_epoch(const FrameDataset& data, std::size_t epoch);
  /// Inference mode: no dropout or augmentation, BN running statistics.
  EpochMetrics evaluate(const FrameDataset& data) const;

  /// Runs config.epochs epochs with the cosine schedule, writing one metrics
  /// line per epoch when `metrics` is non-null.
  std::vector<EpochRecord> fit(const FrameDataset& train, const FrameDataset* test,
                               std::ostream* metrics = nullptr,
                               MetricsFormat format = MetricsFormat::Csv);

  /// Called after every optimizer step (after clipping).
  std::function<void(const Network&)> on_step;

  const TrainConfig& config() const { return config_; }
  const OptimState& optimizer() const { return opt_; }

 private:
  Network& net_;
  TrainConfig config_;
  OptimState opt_;
  RngStream rng_;
};

EpochMetrics evaluate(Network& net, const FrameDataset& data, std::size_t batch_size = 128,
                      std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Gradient check on the smooth twin

struct GradCheckOptions {
  std::size_t time = 10;
  std::size_t batch = 3;
  std::uint64_t seed = 7;
  double temperature = 0.2;
  double eps = 1e-4;
  double floor = 1e-6;
  bool richardson = true;  // fourth-order differences; plain central otherwise
};

struct GradCheckGroup {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::vector<GradCheckGroup> groups;
};

/// Compares BPTT gradients against central finite differences for every
/// trainable entry of a network built from `spec`, using a sigmoid spike in
/// both passes, train-mode batch norm and no dropout.
GradCheckReport gradient_check(const NetworkSpec& spec, const GradCheckOptions& options);

}  // namespace snndelay
