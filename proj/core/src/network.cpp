#include "snndelay/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "snndelay/parallel.hpp"

namespace snndelay {

// ---------------------------------------------------------------------------
// Specs and accounting

LayerSpec LayerSpec::make(std::size_t h, NeuronModel model, std::size_t n_d, DelayScheme scheme) {
  LayerSpec spec;
  spec.h = h;
  spec.model = model;
  spec.n_d = n_d;
  spec.scheme = scheme;
  spec.recurrent = is_recurrent(model);
  spec.timing = default_delay_timing(model);
  return spec;
}

void LayerSpec::validate() const {
  if (h == 0) throw std::invalid_argument("LayerSpec: h must be positive");
  if (recurrent != is_recurrent(model)) {
    throw std::invalid_argument("LayerSpec: recurrent flag must match model " +
                                std::string(to_string(model)));
  }
}

NetworkSpec NetworkSpec::uniform(std::size_t c_in, std::size_t c_out, std::size_t h,
                                 std::size_t l, NeuronModel model, std::size_t n_d,
                                 DelayScheme scheme, double dropout_rate) {
  NetworkSpec spec;
  spec.c_in = c_in;
  spec.c_out = c_out;
  spec.dropout_rate = dropout_rate;
  spec.layers.assign(l, LayerSpec::make(h, model, n_d, scheme));
  return spec;
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("NetworkSpec: at least one hidden layer required");
  if (c_in == 0 || c_out == 0) throw std::invalid_argument("NetworkSpec: c_in and c_out must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("NetworkSpec: dropout rate must lie in [0, 1)");
  }
  for (const auto& layer : layers) layer.validate();
}

bool NetworkSpec::homogeneous() const {
  for (const auto& layer : layers) {
    const auto& first = layers.front();
    if (layer.h != first.h || layer.model != first.model || layer.n_d != first.n_d ||
        layer.scheme.kind != first.scheme.kind || layer.scheme.trainable != first.scheme.trainable) {
      return false;
    }
  }
  return true;
}

ParamCount count_params(const NetworkSpec& spec, bool asd_trainable) {
  spec.validate();
  if (!spec.homogeneous()) {
    throw std::invalid_argument("count_params: closed form requires identical hidden layers");
  }
  const auto& layer = spec.layers.front();
  const std::size_t h = layer.h;
  const std::size_t l = spec.layers.size();
  ParamCount c;
  c.feedforward = spec.c_in * h + h * h * (l - 1) + h * spec.c_out;
  c.recurrent = layer.recurrent ? l * (h * h - h) : 0;
  c.neuron = (is_adaptive(layer.model) ? 4 : 1) * l * h;
  c.norm = 2 * (h * l + spec.c_out);
  c.delay = asd_trainable ? layer.n_d * h * l : 0;
  c.total = c.feedforward + c.recurrent + c.neuron + c.norm + c.delay;
  return c;
}

std::size_t count_state_memory(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const auto& layer : spec.layers) {
    total += (intrinsic_state_size(layer.model) + layer.n_d) * layer.h;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Parameters

Parameter::Parameter(std::string n, Matrix v, bool train, bool zero_diag)
    : name(std::move(n)), value(std::move(v)), trainable(train), zero_diagonal(zero_diag) {
  grad = Matrix(value.rows(), value.cols());
  enforce_structure();
}

std::size_t Parameter::trainable_size() const {
  if (!trainable) return 0;
  return value.size() - (zero_diagonal ? std::min(value.rows(), value.cols()) : 0);
}

void Parameter::enforce_structure() {
  if (!zero_diagonal) return;
  const std::size_t n = std::min(value.rows(), value.cols());
  for (std::size_t i = 0; i < n; ++i) {
    value(i, i) = 0.0;
    if (!grad.empty()) grad(i, i) = 0.0;
  }
}

Matrix fan_in_uniform(std::size_t rows, std::size_t cols, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = -bound + 2.0 * bound * rng.uniform01();
  return m;
}

// ---------------------------------------------------------------------------
// Batch normalization

BatchNorm::BatchNorm(std::size_t features, const std::string& prefix)
    : gamma(prefix + ".gamma", Matrix(1, features, 1.0), true),
      bias(prefix + ".bias", Matrix(1, features, 0.0), true),
      running_mean(1, features, 0.0),
      running_var(1, features, 1.0) {}

void batch_norm_forward(BatchNorm& bn, Tensor3& x, bool training, bool update_running,
                        BatchNormCache& cache) {
  const std::size_t F = bn.features();
  if (x.width != F) throw std::invalid_argument("batch_norm_forward: feature mismatch");
  const std::size_t rows = x.batch * x.time;
  cache.training = training;
  cache.inv_std.assign(F, 0.0);
  cache.xhat = Tensor3(x.batch, x.time, F);
  std::vector<double> mean(F, 0.0);
  if (training) {
    if (rows == 0) throw std::invalid_argument("batch_norm_forward: empty batch");
    std::vector<double> var(F, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < F; ++f) mean[f] += x.data[r * F + f];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < F; ++f) {
        const double d = x.data[r * F + f] - mean[f];
        var[f] += d * d;
      }
    }
    for (std::size_t f = 0; f < F; ++f) {
      var[f] /= static_cast<double>(rows);
      cache.inv_std[f] = 1.0 / std::sqrt(var[f] + bn.eps);
      if (update_running) {
        const double unbiased =
            rows > 1 ? var[f] * static_cast<double>(rows) / static_cast<double>(rows - 1) : var[f];
        bn.running_mean(0, f) = (1.0 - bn.momentum) * bn.running_mean(0, f) + bn.momentum * mean[f];
        bn.running_var(0, f) = (1.0 - bn.momentum) * bn.running_var(0, f) + bn.momentum * unbiased;
      }
    }
  } else {
    for (std::size_t f = 0; f < F; ++f) {
      mean[f] = bn.running_mean(0, f);
      cache.inv_std[f] = 1.0 / std::sqrt(bn.running_var(0, f) + bn.eps);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < F; ++f) {
      const double xhat = (x.data[r * F + f] - mean[f]) * cache.inv_std[f];
      cache.xhat.data[r * F + f] = xhat;
      x.data[r * F + f] = bn.gamma.value(0, f) * xhat + bn.bias.value(0, f);
    }
  }
}

void batch_norm_backward(BatchNorm& bn, const BatchNormCache& cache, Tensor3& grad) {
  const std::size_t F = bn.features();
  const std::size_t rows = grad.batch * grad.time;
  std::vector<double> sum_dy(F, 0.0);
  std::vector<double> sum_dy_xhat(F, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < F; ++f) {
      const double dy = grad.data[r * F + f];
      sum_dy[f] += dy;
      sum_dy_xhat[f] += dy * cache.xhat.data[r * F + f];
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    bn.gamma.grad(0, f) += sum_dy_xhat[f];
    bn.bias.grad(0, f) += sum_dy[f];
  }
  const double n = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < F; ++f) {
      const double scale = bn.gamma.value(0, f) * cache.inv_std[f];
      double& g = grad.data[r * F + f];
      if (cache.training) {
        // d xhat summed over the pooled rows: dxhat = gamma dy.
        const double dxhat_sum = bn.gamma.value(0, f) * sum_dy[f];
        const double dxhat_xhat_sum = bn.gamma.value(0, f) * sum_dy_xhat[f];
        const double dxhat = bn.gamma.value(0, f) * g;
        g = cache.inv_std[f] / n *
            (n * dxhat - dxhat_sum - cache.xhat.data[r * F + f] * dxhat_xhat_sum);
      } else {
        g *= scale;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Hidden layer

namespace {

/// z = W x, skipping zero inputs (spike trains are sparse).
void affine(const Matrix& W, std::span<const double> x, std::span<double> z,
            std::vector<std::size_t>& nz) {
  nz.clear();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] != 0.0) nz.push_back(k);
  }
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const auto row = W.row(i);
    double acc = 0.0;
    for (std::size_t k : nz) acc += row[k] * x[k];
    z[i] = acc;
  }
}

/// Per-worker gradient partials for one hidden layer.
struct LayerGrads {
  Matrix dW, dV, dalpha, dbeta, da, db, dasd;
};

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

std::size_t delay_offset(DelayTiming timing) { return timing == DelayTiming::Current ? 1 : 0; }

}  // namespace

HiddenLayer::HiddenLayer(const LayerSpec& spec, std::size_t fan_in, RngStream& rng,
                         const std::string& prefix)
    : spec_(spec) {
  spec_.validate();
  const std::size_t h = spec_.h;
  W_ = Parameter(prefix + ".W", fan_in_uniform(h, fan_in, rng), true);
  if (spec_.recurrent) V_ = Parameter(prefix + ".V", fan_in_uniform(h, h, rng), true, true);
  bn_ = BatchNorm(h, prefix + ".bn");

  Matrix alpha(1, h);
  for (auto& v : alpha.data()) {
    v = kAlphaRange.clamp(rng.uniform(std::exp(-1.0 / 5.0), std::exp(-1.0 / 25.0)));
  }
  alpha_ = Parameter(prefix + ".alpha", std::move(alpha), true);
  if (is_adaptive(spec_.model)) {
    Matrix beta(1, h), a(1, h), b(1, h);
    for (auto& v : beta.data()) {
      v = kBetaRange.clamp(rng.uniform(std::exp(-1.0 / 30.0), std::exp(-1.0 / 120.0)));
    }
    for (auto& v : a.data()) v = rng.uniform(0.0, 1.0);
    for (auto& v : b.data()) v = rng.uniform(0.0, 2.0);
    beta_ = Parameter(prefix + ".beta", std::move(beta), true);
    a_ = Parameter(prefix + ".a", std::move(a), true);
    b_ = Parameter(prefix + ".b", std::move(b), true);
  }
  Matrix asd(h, spec_.n_d);
  if (spec_.n_d > 0) {
    for (std::size_t n = 0; n < h; ++n) {
      const auto row = build_asd(spec_.scheme, spec_.n_d, rng);
      std::copy(row.begin(), row.end(), asd.row(n).begin());
    }
  }
  asd_ = Parameter(prefix + ".asd", std::move(asd), spec_.scheme.trainable);
}

NeuronParams HiddenLayer::neuron_params(std::size_t n) const {
  NeuronParams p;
  p.alpha = alpha_.value(0, n);
  if (is_adaptive(spec_.model)) {
    p.beta = beta_.value(0, n);
    p.a_adapt = a_.value(0, n);
    p.b_adapt = b_.value(0, n);
  }
  p.theta = theta_;
  return p;
}

void HiddenLayer::clip_neuron_params() {
  for (auto& v : alpha_.value.data()) v = kAlphaRange.clamp(v);
  if (!is_adaptive(spec_.model)) return;
  for (auto& v : beta_.value.data()) v = kBetaRange.clamp(v);
  for (auto& v : a_.value.data()) v = kAdaptARange.clamp(v);
  for (auto& v : b_.value.data()) v = kAdaptBRange.clamp(v);
}

bool HiddenLayer::neuron_params_in_range() const {
  auto all_in = [](const Parameter& p, ClipRange r) {
    for (double v : p.value.data()) {
      if (!r.contains(v)) return false;
    }
    return true;
  };
  if (!all_in(alpha_, kAlphaRange)) return false;
  if (!is_adaptive(spec_.model)) return true;
  return all_in(beta_, kBetaRange) && all_in(a_, kAdaptARange) && all_in(b_, kAdaptBRange);
}

void HiddenLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&W_);
  if (spec_.recurrent) out.push_back(&V_);
  out.push_back(&bn_.gamma);
  out.push_back(&bn_.bias);
  out.push_back(&alpha_);
  if (is_adaptive(spec_.model)) {
    out.push_back(&beta_);
    out.push_back(&a_);
    out.push_back(&b_);
  }
  if (spec_.n_d > 0) out.push_back(&asd_);
}

void HiddenLayer::collect_buffers(std::vector<std::pair<std::string, Matrix*>>& out) {
  const std::string prefix = bn_.gamma.name.substr(0, bn_.gamma.name.size() - 6);
  out.emplace_back(prefix + ".running_mean", &bn_.running_mean);
  out.emplace_back(prefix + ".running_var", &bn_.running_var);
}

void HiddenLayer::forward(const Tensor3& input, const ForwardOptions& opts, bool apply_dropout,
                          double dropout_rate, LayerTape& tape) {
  const std::size_t B = input.batch, T = input.time, H = spec_.h;
  if (input.width != fan_in()) {
    throw std::invalid_argument("HiddenLayer::forward: input width " +
                                std::to_string(input.width) + " but layer expects " +
                                std::to_string(fan_in()));
  }
  if (spec_.recurrent) {
    for (std::size_t n = 0; n < H; ++n) {
      if (V_.value(n, n) != 0.0) {
        throw std::invalid_argument("HiddenLayer::forward: recurrent V has a nonzero diagonal at " +
                                    std::to_string(n));
      }
    }
  }
  const bool adaptive = is_adaptive(spec_.model);
  const std::size_t nd = spec_.n_d;
  const std::size_t off = delay_offset(spec_.timing);

  tape.input = input;
  Tensor3 drive(B, T, H);
  parallel_for(B, opts.threads, [&](std::size_t, std::size_t b0, std::size_t b1) {
    std::vector<std::size_t> nz;
    for (std::size_t b = b0; b < b1; ++b) {
      for (std::size_t t = 0; t < T; ++t) affine(W_.value, input.row(b, t), drive.row(b, t), nz);
    }
  });
  batch_norm_forward(bn_, drive, opts.training, opts.training && opts.update_running_stats,
                     tape.bn);
  tape.drive = std::move(drive);
  tape.i_s = Tensor3(B, T, H);
  tape.u = Tensor3(B, T, H);
  tape.w = adaptive ? Tensor3(B, T, H) : Tensor3();
  tape.spikes = Tensor3(B, T, H);

  const Matrix asd_t = transpose(asd_.value);
  parallel_for(B, opts.threads, [&](std::size_t, std::size_t b0, std::size_t b1) {
    std::vector<double> u(H), w(H), s(H), delayed(H);
    std::vector<std::size_t> active;
    for (std::size_t b = b0; b < b1; ++b) {
      std::fill(u.begin(), u.end(), 0.0);
      std::fill(w.begin(), w.end(), 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        active.clear();
        for (std::size_t n = 0; n < H; ++n) {
          tape.u.at(b, t, n) = u[n];
          if (adaptive) tape.w.at(b, t, n) = w[n];
          s[n] = opts.spike.value(u[n], theta_);
          tape.spikes.at(b, t, n) = s[n];
          if (s[n] != 0.0) active.push_back(n);
        }
        std::fill(delayed.begin(), delayed.end(), 0.0);
        for (std::size_t j = 0; j < nd && j + off <= t; ++j) {
          const auto src = tape.drive.row(b, t - j - off);
          const auto a = asd_t.row(j);
          for (std::size_t n = 0; n < H; ++n) delayed[n] += a[n] * src[n];
        }
        for (std::size_t n = 0; n < H; ++n) {
          double is = tape.drive.at(b, t, n);
          if (spec_.recurrent) {
            double rec = 0.0;
            const auto vrow = V_.value.row(n);
            for (std::size_t k : active) rec += vrow[k] * s[k];
            is += rec;
          }
          tape.i_s.at(b, t, n) = is;

          const double alpha = alpha_.value(0, n);
          double un = alpha * u[n];
          if (adaptive) un += -(1.0 - alpha) * w[n];
          un += (1.0 - alpha) * is;
          un += delayed[n];
          un -= (alpha * theta_) * s[n];
          if (adaptive) {
            double wn = a_.value(0, n) * u[n];
            wn += beta_.value(0, n) * w[n];
            wn += b_.value(0, n) * s[n];
            w[n] = wn;
          }
          u[n] = un;
        }
      }
    }
  });

  if (apply_dropout && dropout_rate > 0.0) {
    if (opts.dropout_rng == nullptr) {
      throw std::invalid_argument("HiddenLayer::forward: dropout requires an RNG");
    }
    const double keep = 1.0 - dropout_rate;
    tape.mask = Tensor3(B, T, H);
    for (auto& m : tape.mask.data) m = opts.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    tape.output = tape.spikes;
    for (std::size_t i = 0; i < tape.output.data.size(); ++i) tape.output.data[i] *= tape.mask.data[i];
  } else {
    tape.mask = Tensor3();
    tape.output = tape.spikes;
  }
}

void HiddenLayer::backward(const LayerTape& tape, const ForwardOptions& opts,
                           const Tensor3& grad_output, Tensor3* grad_input) {
  const std::size_t B = tape.spikes.batch, T = tape.spikes.time, H = spec_.h;
  const std::size_t F = fan_in();
  if (grad_output.batch != B || grad_output.time != T || grad_output.width != H) {
    throw std::invalid_argument("HiddenLayer::backward: gradient shape does not match tape");
  }
  const bool adaptive = is_adaptive(spec_.model);
  const std::size_t nd = spec_.n_d;
  const std::size_t off = delay_offset(spec_.timing);
  const bool want_asd = asd_.trainable && nd > 0;

  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.threads, B));
  std::vector<LayerGrads> partial(workers);
  for (auto& g : partial) {
    g.dW = Matrix(H, F);
    if (spec_.recurrent) g.dV = Matrix(H, H);
    g.dalpha = Matrix(1, H);
    if (adaptive) g.dbeta = g.da = g.db = Matrix(1, H);
    if (want_asd) g.dasd = Matrix(H, nd);
  }

  Tensor3 g_drive(B, T, H);
  const Matrix asd_t = transpose(asd_.value);
  parallel_for(B, workers, [&](std::size_t worker, std::size_t b0, std::size_t b1) {
    LayerGrads& acc = partial[worker];
    std::vector<double> gU(H), gW(H), gis(H), rec(H), gD(T * H), gdl(H);
    Matrix gasd(want_asd ? nd : 0, H);
    for (std::size_t b = b0; b < b1; ++b) {
      std::fill(gU.begin(), gU.end(), 0.0);
      std::fill(gW.begin(), gW.end(), 0.0);
      for (std::size_t tt = T; tt-- > 0;) {
        // gU / gW hold dL/du[t+1], dL/dw[t+1].
        for (std::size_t n = 0; n < H; ++n) {
          const double alpha = alpha_.value(0, n);
          const double u = tape.u.at(b, tt, n);
          const double s = tape.spikes.at(b, tt, n);
          const double is = tape.i_s.at(b, tt, n);
          gis[n] = (1.0 - alpha) * gU[n];
          gD[tt * H + n] = gU[n];
          g_drive.at(b, tt, n) += gis[n];
          if (adaptive) {
            const double w = tape.w.at(b, tt, n);
            acc.dalpha(0, n) += gU[n] * (u + w - is - theta_ * s);
            acc.dbeta(0, n) += gW[n] * w;
            acc.da(0, n) += gW[n] * u;
            acc.db(0, n) += gW[n] * s;
          } else {
            acc.dalpha(0, n) += gU[n] * (u - is - theta_ * s);
          }
        }
        if (spec_.recurrent) {
          std::fill(rec.begin(), rec.end(), 0.0);
          const auto srow = tape.spikes.row(b, tt);
          for (std::size_t m = 0; m < H; ++m) {
            if (gis[m] == 0.0) continue;
            const auto vrow = V_.value.row(m);
            auto dvrow = acc.dV.row(m);
            for (std::size_t k = 0; k < H; ++k) {
              dvrow[k] += gis[m] * srow[k];
              rec[k] += vrow[k] * gis[m];
            }
          }
        }
        for (std::size_t n = 0; n < H; ++n) {
          const double alpha = alpha_.value(0, n);
          const double u = tape.u.at(b, tt, n);
          double gs = grad_output.at(b, tt, n);
          if (!tape.mask.data.empty()) gs *= tape.mask.at(b, tt, n);
          gs -= alpha * theta_ * gU[n];
          if (adaptive) gs += b_.value(0, n) * gW[n];
          if (spec_.recurrent) gs += rec[n];
          double gu = alpha * gU[n] + opts.spike.derivative(u, theta_) * gs;
          if (adaptive) {
            gu += a_.value(0, n) * gW[n];
            gW[n] = -(1.0 - alpha) * gU[n] + beta_.value(0, n) * gW[n];
          }
          gU[n] = gu;
        }
      }
      // Delay line transpose: d[t] = sum_j asd[j] drive[t - j - off].
      if (nd > 0) {
        for (std::size_t t = 0; t < T; ++t) {
          std::fill(gdl.begin(), gdl.end(), 0.0);
          for (std::size_t j = 0; j < nd && t + j + off < T; ++j) {
            const double* g = gD.data() + (t + j + off) * H;
            const auto a = asd_t.row(j);
            for (std::size_t n = 0; n < H; ++n) gdl[n] += a[n] * g[n];
          }
          auto dst = g_drive.row(b, t);
          for (std::size_t n = 0; n < H; ++n) dst[n] += gdl[n];
        }
        if (want_asd) {
          gasd.fill(0.0);
          for (std::size_t j = 0; j < nd; ++j) {
            auto row = gasd.row(j);
            for (std::size_t t = j + off; t < T; ++t) {
              const double* g = gD.data() + t * H;
              const auto src = tape.drive.row(b, t - j - off);
              for (std::size_t n = 0; n < H; ++n) row[n] += g[n] * src[n];
            }
          }
          for (std::size_t n = 0; n < H; ++n) {
            for (std::size_t j = 0; j < nd; ++j) acc.dasd(n, j) += gasd(j, n);
          }
        }
      }
    }
  });

  batch_norm_backward(bn_, tape.bn, g_drive);

  if (grad_input != nullptr) *grad_input = Tensor3(B, T, F);
  parallel_for(B, workers, [&](std::size_t worker, std::size_t b0, std::size_t b1) {
    LayerGrads& acc = partial[worker];
    for (std::size_t b = b0; b < b1; ++b) {
      for (std::size_t t = 0; t < T; ++t) {
        const auto x = tape.input.row(b, t);
        const auto gz = g_drive.row(b, t);
        for (std::size_t i = 0; i < H; ++i) {
          if (gz[i] == 0.0) continue;
          auto dwrow = acc.dW.row(i);
          for (std::size_t k = 0; k < F; ++k) {
            if (x[k] != 0.0) dwrow[k] += gz[i] * x[k];
          }
        }
        if (grad_input != nullptr) {
          auto gx = grad_input->row(b, t);
          for (std::size_t i = 0; i < H; ++i) {
            if (gz[i] == 0.0) continue;
            const auto wrow = W_.value.row(i);
            for (std::size_t k = 0; k < F; ++k) gx[k] += wrow[k] * gz[i];
          }
        }
      }
    }
  });

  for (const auto& g : partial) {
    add_into(W_.grad, g.dW);
    if (spec_.recurrent) add_into(V_.grad, g.dV);
    add_into(alpha_.grad, g.dalpha);
    if (adaptive) {
      add_into(beta_.grad, g.dbeta);
      add_into(a_.grad, g.da);
      add_into(b_.grad, g.db);
    }
    if (want_asd) add_into(asd_.grad, g.dasd);
  }
  if (spec_.recurrent) V_.enforce_structure();
}

// ---------------------------------------------------------------------------
// Network

Network::Network(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  RngStream rng(seed);
  std::size_t fan_in = spec_.c_in;
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    layers_.emplace_back(spec_.layers[l], fan_in, rng, "layer" + std::to_string(l));
    fan_in = spec_.layers[l].h;
  }
  W_out_ = Parameter("readout.W", fan_in_uniform(spec_.c_out, fan_in, rng), true);
  bn_out_ = BatchNorm(spec_.c_out, "readout.bn");
}

void Network::set_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  spec_.dropout_rate = rate;
}

Matrix Network::forward(const Tensor3& input, const ForwardOptions& opts, GradTape* tape) {
  if (input.time == 0) throw std::invalid_argument("Network::forward: sequence length is zero");
  if (input.width != spec_.c_in) {
    throw std::invalid_argument("Network::forward: expected " + std::to_string(spec_.c_in) +
                                " input channels, got " + std::to_string(input.width));
  }
  GradTape local;
  GradTape& tp = tape != nullptr ? *tape : local;
  tp.options = opts;
  tp.layers.resize(layers_.size());

  const Tensor3* x = &input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool dropout = opts.training && l + 1 < layers_.size();
    layers_[l].forward(*x, opts, dropout, spec_.dropout_rate, tp.layers[l]);
    x = &tp.layers[l].output;
  }

  const std::size_t B = x->batch, T = x->time, C = spec_.c_out;
  tp.readout.input = *x;
  Tensor3 z(B, T, C);
  parallel_for(B, opts.threads, [&](std::size_t, std::size_t b0, std::size_t b1) {
    std::vector<std::size_t> nz;
    for (std::size_t b = b0; b < b1; ++b) {
      for (std::size_t t = 0; t < T; ++t) affine(W_out_.value, x->row(b, t), z.row(b, t), nz);
    }
  });
  batch_norm_forward(bn_out_, z, opts.training, opts.training && opts.update_running_stats,
                     tp.readout.bn);
  Matrix logits(B, C);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < C; ++c) logits(b, c) += z.at(b, t, c);
    }
    for (std::size_t c = 0; c < C; ++c) logits(b, c) /= static_cast<double>(T);
  }
  return logits;
}

void Network::backward(const GradTape& tape, const Matrix& dlogits) {
  if (tape.layers.size() != layers_.size()) {
    throw std::invalid_argument("Network::backward: tape does not belong to this network");
  }
  const Tensor3& s_last = tape.readout.input;
  const std::size_t B = s_last.batch, T = s_last.time, C = spec_.c_out, H = s_last.width;
  if (dlogits.rows() != B || dlogits.cols() != C) {
    throw std::invalid_argument("Network::backward: dlogits shape mismatch");
  }
  Tensor3 gz(B, T, C);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < C; ++c) gz.at(b, t, c) = dlogits(b, c) / static_cast<double>(T);
    }
  }
  batch_norm_backward(bn_out_, tape.readout.bn, gz);

  Tensor3 grad(B, T, H);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto x = s_last.row(b, t);
      const auto g = gz.row(b, t);
      auto gx = grad.row(b, t);
      for (std::size_t c = 0; c < C; ++c) {
        auto dw = W_out_.grad.row(c);
        const auto wrow = W_out_.value.row(c);
        for (std::size_t k = 0; k < H; ++k) {
          dw[k] += g[c] * x[k];
          gx[k] += wrow[k] * g[c];
        }
      }
    }
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    Tensor3 grad_in;
    layers_[l].backward(tape.layers[l], tape.options, grad, l > 0 ? &grad_in : nullptr);
    grad = std::move(grad_in);
  }
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) layer.collect(out);
  out.push_back(&W_out_);
  out.push_back(&bn_out_.gamma);
  out.push_back(&bn_out_.bias);
  return out;
}

std::vector<std::pair<std::string, Matrix*>> Network::buffers() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (auto& layer : layers_) layer.collect_buffers(out);
  out.emplace_back("readout.bn.running_mean", &bn_out_.running_mean);
  out.emplace_back("readout.bn.running_var", &bn_out_.running_var);
  return out;
}

void Network::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::size_t Network::trainable_count() {
  std::size_t total = 0;
  for (auto* p : parameters()) total += p->trainable_size();
  return total;
}

void Network::clip_neuron_params() {
  for (auto& layer : layers_) layer.clip_neuron_params();
}

bool Network::neuron_params_in_range() const {
  for (const auto& layer : layers_) {
    if (!layer.neuron_params_in_range()) return false;
  }
  return true;
}

}  // namespace snndelay
