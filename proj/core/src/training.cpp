#include "snndelay/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace snndelay {

// ---------------------------------------------------------------------------
// Loss

LossResult soft_cross_entropy(std::span<const double> logits, std::span<const double> target) {
  if (logits.empty() || logits.size() != target.size()) {
    throw std::invalid_argument("cross_entropy: logits and target differ in length");
  }
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double log_sum = std::log(sum);
  LossResult out;
  out.dlogits.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double log_p = logits[k] - max - log_sum;
    if (target[k] != 0.0) out.loss -= target[k] * log_p;
    out.dlogits[k] = std::exp(log_p) - target[k];
  }
  return out;
}

LossResult cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
  }
  std::vector<double> onehot(logits.size(), 0.0);
  onehot[label] = 1.0;
  return soft_cross_entropy(logits, onehot);
}

// ---------------------------------------------------------------------------
// Optimizer

OptimState make_optim_state(std::span<Parameter* const> params, const AdamWConfig& config) {
  OptimState st;
  st.config = config;
  for (const auto* p : params) {
    st.m.emplace_back(p->value.rows(), p->value.cols());
    st.v.emplace_back(p->value.rows(), p->value.cols());
  }
  return st;
}

void adamw_update(OptimState& opt, std::span<Parameter* const> params, double lr) {
  if (opt.m.size() != params.size()) {
    throw std::invalid_argument("adamw_update: optimizer state does not match parameters");
  }
  ++opt.step;
  const auto& c = opt.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    if (p.grad.size() != p.value.size() || opt.m[i].size() != p.value.size()) {
      throw std::invalid_argument("adamw_update: shape mismatch for " + p.name);
    }
    auto& m = opt.m[i].data();
    auto& v = opt.v[i].data();
    auto& value = p.value.data();
    const auto& grad = p.grad.data();
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      value[k] -= lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * value[k]);
    }
    p.enforce_structure();
  }
}

double cosine_lr(std::size_t epoch, std::size_t total, double base) {
  if (total == 0) return base;
  const double x = static_cast<double>(epoch) / static_cast<double>(total);
  return std::max(0.0, 0.5 * base * (1.0 + std::cos(std::numbers::pi * x)));
}

NeuronParams clip_neuron_params(const NeuronParams& p) {
  NeuronParams out = p;
  out.alpha = kAlphaRange.clamp(p.alpha);
  out.beta = kBetaRange.clamp(p.beta);
  out.a_adapt = kAdaptARange.clamp(p.a_adapt);
  out.b_adapt = kAdaptBRange.clamp(p.b_adapt);
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

namespace {

/// k distinct indices from [0, n) by partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

SpikeFrameTensor augment_mask(const SpikeFrameTensor& frames, const MaskAugmentConfig& config,
                              RngStream& rng) {
  SpikeFrameTensor out = frames;
  const std::size_t T = frames.time(), C = frames.channels();
  if (rng.bernoulli(config.time_probability)) {
    for (std::size_t t : sample_without_replacement(T, rounded_count(config.time_fraction, T), rng)) {
      for (std::size_t c = 0; c < C; ++c) out.counts(t, c) = 0.0;
    }
  }
  if (rng.bernoulli(config.channel_probability)) {
    for (std::size_t c :
         sample_without_replacement(C, rounded_count(config.channel_fraction, C), rng)) {
      for (std::size_t t = 0; t < T; ++t) out.counts(t, c) = 0.0;
    }
  }
  return out;
}

MixedSample cutmix(const SpikeFrameTensor& a, std::size_t label_a, const SpikeFrameTensor& b,
                   std::size_t label_b, std::size_t n_classes, double lambda, std::size_t start) {
  if (a.time() != b.time() || a.channels() != b.channels()) {
    throw std::invalid_argument("cutmix: frame shapes differ");
  }
  if (label_a >= n_classes || label_b >= n_classes) {
    throw std::out_of_range("cutmix: label out of range");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("cutmix: lambda outside [0, 1]");
  const std::size_t T = a.time();
  const std::size_t len = rounded_count(lambda, T);
  if (start + len > T) throw std::out_of_range("cutmix: segment exceeds sequence");
  MixedSample out;
  out.frames = a;
  for (std::size_t t = start; t < start + len; ++t) {
    for (std::size_t c = 0; c < a.channels(); ++c) out.frames.counts(t, c) = b.counts(t, c);
  }
  out.lambda = T > 0 ? static_cast<double>(len) / static_cast<double>(T) : 0.0;
  out.target.assign(n_classes, 0.0);
  out.target[label_a] += 1.0 - out.lambda;
  out.target[label_b] += out.lambda;
  return out;
}

MixedSample augment_cutmix(const SpikeFrameTensor& a, std::size_t label_a,
                           const SpikeFrameTensor& b, std::size_t label_b, std::size_t n_classes,
                           RngStream& rng) {
  const double lambda = rng.uniform01();
  const std::size_t len = rounded_count(lambda, a.time());
  const std::size_t start = static_cast<std::size_t>(rng.uniform_int(a.time() - len + 1));
  return cutmix(a, label_a, b, label_b, n_classes, lambda, start);
}

// ---------------------------------------------------------------------------
// Metrics stream

void write_metrics_header(std::ostream& out, MetricsFormat format) {
  if (format == MetricsFormat::Csv) out << "epoch,lr,train_loss,train_acc,test_acc,seconds\n";
}

void write_metrics_line(std::ostream& out, MetricsFormat format, const EpochRecord& r) {
  std::ostringstream line;
  line << std::setprecision(10);
  if (format == MetricsFormat::Csv) {
    line << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.train_acc << ','
         << r.test_acc << ',' << r.seconds << '\n';
  } else {
    line << "{\"epoch\":" << r.epoch << ",\"lr\":" << r.lr << ",\"train_loss\":" << r.train_loss
         << ",\"train_acc\":" << r.train_acc << ",\"test_acc\":" << r.test_acc
         << ",\"seconds\":" << r.seconds << "}\n";
  }
  out << line.str();
  out.flush();
}

// ---------------------------------------------------------------------------
// Training loop

Tensor3 make_batch(const FrameDataset& data, std::span<const std::size_t> indices) {
  const std::size_t T = data.time(), C = data.channels();
  Tensor3 batch(indices.size(), T, C);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& f = data.frames.at(indices[i]);
    if (f.time() != T || f.channels() != C) {
      throw std::invalid_argument("make_batch: sample " + std::to_string(indices[i]) +
                                  " has a different frame shape");
    }
    std::copy(f.counts.data().begin(), f.counts.data().end(), batch.row(i, 0).begin());
  }
  return batch;
}

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Trainer::Trainer(Network& net, const TrainConfig& config)
    : net_(net), config_(config), rng_(RngStream::derive(config.seed, 1)) {
  if (config_.batch_size == 0) throw std::invalid_argument("Trainer: batch size must be positive");
  net_.set_dropout_rate(config_.dropout);
  AdamWConfig adam;
  adam.weight_decay = config_.weight_decay;
  const auto params = net_.parameters();
  opt_ = make_optim_state(params, adam);
}

EpochMetrics Trainer::train_epoch(const FrameDataset& data, std::size_t epoch) {
  if (data.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  const auto start = std::chrono::steady_clock::now();
  const double lr = cosine_lr(epoch, config_.epochs, config_.base_lr);
  const std::size_t n_classes = net_.spec().c_out;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng_.shuffle(std::span<std::size_t>(order));

  const auto params = net_.parameters();
  ForwardOptions opts;
  opts.training = true;
  opts.dropout_rng = &rng_;
  opts.threads = config_.threads;

  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0, batch_no = 0; begin < order.size();
       begin += config_.batch_size, ++batch_no) {
    const std::size_t end = std::min(order.size(), begin + config_.batch_size);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    const std::size_t B = idx.size();

    Tensor3 batch = make_batch(data, idx);
    std::vector<std::vector<double>> targets(B, std::vector<double>(n_classes, 0.0));
    for (std::size_t i = 0; i < B; ++i) targets[i][data.labels[idx[i]]] = 1.0;
    if (config_.augment) {
      for (std::size_t i = 0; i < B; ++i) {
        SpikeFrameTensor frames = augment_mask(data.frames[idx[i]], config_.mask, rng_);
        if (B > 1 && rng_.bernoulli(config_.cutmix_probability)) {
          const std::size_t partner = idx[(i + 1 + rng_.uniform_int(B - 1)) % B];
          auto mixed = augment_cutmix(frames, data.labels[idx[i]], data.frames[partner],
                                      data.labels[partner], n_classes, rng_);
          frames = std::move(mixed.frames);
          targets[i] = std::move(mixed.target);
        }
        std::copy(frames.counts.data().begin(), frames.counts.data().end(),
                  batch.row(i, 0).begin());
      }
    }

    GradTape tape;
    const Matrix logits = net_.forward(batch, opts, &tape);
    Matrix dlogits(B, n_classes);
    for (std::size_t i = 0; i < B; ++i) {
      const auto res = soft_cross_entropy(logits.row(i), targets[i]);
      if (!std::isfinite(res.loss)) {
        throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(batch_no) +
                               ", sample " + std::to_string(idx[i]));
      }
      loss_sum += res.loss;
      if (argmax(logits.row(i)) == data.labels[idx[i]]) ++correct;
      for (std::size_t k = 0; k < n_classes; ++k) dlogits(i, k) = res.dlogits[k] / static_cast<double>(B);
    }

    net_.zero_grad();
    net_.backward(tape, dlogits);
    for (const auto* p : params) {
      if (p->trainable && !p->grad.all_finite()) {
        throw TrainingDiverged("training diverged: non-finite gradient in " + p->name +
                               " at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_no));
      }
    }
    adamw_update(opt_, params, lr);
    net_.clip_neuron_params();
#ifndef NDEBUG
    if (!net_.neuron_params_in_range()) throw std::logic_error("clip invariant violated");
#endif
    if (on_step) on_step(net_);
  }

  EpochMetrics m;
  m.epoch = epoch;
  m.lr = lr;
  m.loss = loss_sum / static_cast<double>(data.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  m.seconds = seconds_since(start);
  return m;
}

EpochMetrics evaluate(Network& net, const FrameDataset& data, std::size_t batch_size,
                      std::size_t threads) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const auto start = std::chrono::steady_clock::now();
  ForwardOptions opts;
  opts.training = false;
  opts.threads = threads;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t end = std::min(data.size(), begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Matrix logits = net.forward(make_batch(data, idx), opts);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      loss_sum += cross_entropy(logits.row(i), data.labels[idx[i]]).loss;
      if (argmax(logits.row(i)) == data.labels[idx[i]]) ++correct;
    }
  }
  EpochMetrics m;
  m.loss = loss_sum / static_cast<double>(data.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  m.seconds = seconds_since(start);
  return m;
}

EpochMetrics Trainer::evaluate(const FrameDataset& data) const {
  return snndelay::evaluate(net_, data, config_.batch_size, config_.threads);
}

std::vector<EpochRecord> Trainer::fit(const FrameDataset& train, const FrameDataset* test,
                                      std::ostream* metrics, MetricsFormat format) {
  std::vector<EpochRecord> records;
  if (metrics != nullptr) write_metrics_header(*metrics, format);
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    const EpochMetrics tr = train_epoch(train, epoch);
    EpochRecord r;
    r.epoch = epoch;
    r.lr = tr.lr;
    r.train_loss = tr.loss;
    r.train_acc = tr.accuracy;
    r.seconds = tr.seconds;
    if (test != nullptr) r.test_acc = evaluate(*test).accuracy;
    if (metrics != nullptr) write_metrics_line(*metrics, format, r);
    records.push_back(r);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

struct Coordinate {
  Parameter* param;
  std::size_t index;
};

}  // namespace

GradCheckReport gradient_check(const NetworkSpec& spec_in, const GradCheckOptions& options) {
  NetworkSpec spec = spec_in;
  spec.dropout_rate = 0.0;
  Network net(spec, options.seed);

  RngStream rng(options.seed + 1);
  const std::size_t B = options.batch, T = options.time;
  Tensor3 input(B, T, spec.c_in);
  for (auto& v : input.data) v = static_cast<double>(rng.uniform_int(3));
  std::vector<std::size_t> labels(B);
  for (auto& l : labels) l = rng.uniform_int(spec.c_out);

  ForwardOptions opts;
  opts.training = true;
  opts.update_running_stats = false;
  opts.spike = SpikeFunction::sigmoid(options.temperature);

  auto loss_of = [&](const Matrix& logits, Matrix* dlogits) {
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      const auto res = cross_entropy(logits.row(i), labels[i]);
      loss += res.loss / static_cast<double>(B);
      if (dlogits != nullptr) {
        for (std::size_t k = 0; k < spec.c_out; ++k) (*dlogits)(i, k) = res.dlogits[k] / static_cast<double>(B);
      }
    }
    return loss;
  };

  GradTape tape;
  const Matrix logits = net.forward(input, opts, &tape);
  Matrix dlogits(B, spec.c_out);
  loss_of(logits, &dlogits);
  net.zero_grad();
  net.backward(tape, dlogits);

  std::vector<Coordinate> coords;
  for (auto* p : net.parameters()) {
    if (!p->trainable) continue;
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      if (p->zero_diagonal && k / p->value.cols() == k % p->value.cols()) continue;
      coords.push_back({p, k});
    }
  }
  std::vector<double> x(coords.size());
  std::vector<double> analytic(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    x[i] = coords[i].param->value.data()[coords[i].index];
    analytic[i] = coords[i].param->grad.data()[coords[i].index];
  }
  const ScalarFunction f = [&](std::span<const double> probe) {
    for (std::size_t i = 0; i < coords.size(); ++i) {
      coords[i].param->value.data()[coords[i].index] = probe[i];
    }
    return loss_of(net.forward(input, opts), nullptr);
  };
  const auto numeric = options.richardson ? richardson_diff_grad(f, x, options.eps)
                                           : finite_diff_grad(f, x, options.eps);
  f(x);

  GradCheckReport report;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double err = relative_error(analytic[i], numeric[i], options.floor);
    const std::string& name = coords[i].param->name;
    if (report.groups.empty() || report.groups.back().name != name) {
      report.groups.push_back({name, 0, 0.0});
    }
    auto& group = report.groups.back();
    ++group.entries;
    group.max_rel_error = std::max(group.max_rel_error, err);
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst = name + "[" + std::to_string(coords[i].index) + "]";
    }
  }
  return report;
}

}  // namespace snndelay
