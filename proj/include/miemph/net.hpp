#pragma once

// The decoding network: four valid convolutions (temporal stem, spatial
// collapse, temporal block), two 1x5 max poolings, one dropout layer, and
// a dense softmax head. Shapes follow the architecture table exactly;
// backprop is written by hand against the same kernels as the forward
// pass. Everything is templated on float/double.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "miemph/eeg.hpp"
#include "miemph/errors.hpp"
#include "miemph/kernels.hpp"
#include "miemph/parallel.hpp"
#include "miemph/rng.hpp"

namespace miemph::net {

template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    v.assign(n, T{});
  }

  std::size_t numel() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
};

struct ModelSpec {
  std::size_t n_channels{60};
  std::size_t in_samples{500};
  std::size_t conv1_out{20};
  std::size_t conv2_out{40};
  std::size_t conv3_out{40};
  std::size_t conv4_out{80};
  std::size_t temporal_kernel{32};
  std::size_t pool{5};
  std::size_t n_classes{3};
  double dropout_p{0.5};

  void validate() const;
};

struct LayerShape {
  std::string type;
  std::vector<std::size_t> dims;  // empty for the dropout row
};

// Output shape of every layer; throws ConfigError when any intermediate
// dimension collapses to zero (valid convs, floor-divided pooling).
std::vector<LayerShape> infer_shapes(const ModelSpec& spec);

// Derived widths along the sample axis.
struct Dims {
  std::size_t s1, s2, p1, s4, p2, flat;
};
Dims derive_dims(const ModelSpec& spec);

struct ParamView {
  const char* name;
  std::size_t offset;
  std::size_t count;
  std::vector<std::size_t> shape;
};

template <typename T>
class Network;

// Per-sample activation workspace, reusable across calls. One instance
// per worker thread.
template <typename T>
struct Cache {
  std::vector<T> a1, a2, a3, p1v, drop, a4, p2v;
  std::vector<std::uint32_t> p1idx, p2idx;
  std::vector<T> logits, probs;
  std::vector<T> da1, da2, da3, dd, dp1, da4, dp2;
  const T* x{nullptr};  // input the cache was filled from

  void resize(const ModelSpec& spec);
};

template <typename T>
class Network {
 public:
  Network() = default;
  Network(const ModelSpec& spec, std::uint64_t init_seed);

  const ModelSpec& spec() const { return spec_; }
  const Dims& dims() const { return dims_; }
  const std::vector<ParamView>& param_views() const { return views_; }
  std::vector<T>& flat_params() { return params_; }
  const std::vector<T>& flat_params() const { return params_; }
  std::size_t n_params() const { return params_.size(); }

  // Forward one sample x of shape [n_channels x in_samples]. In training
  // mode, dropout_mask holds conv3_out * p1 multipliers (0 or 1/(1-p));
  // pass nullptr at inference.
  void forward(const T* x, Cache<T>& c, const T* dropout_mask) const;

  // Cross-entropy backward for the sample cached in c. Gradients are
  // accumulated into the flat buffer grad (same layout as flat_params);
  // the caller zeroes it. Returns the sample loss.
  T backward(Cache<T>& c, std::uint8_t label, T* grad,
             const T* dropout_mask) const;

 private:
  void init_params(std::uint64_t seed);

  ModelSpec spec_;
  Dims dims_{};
  std::vector<ParamView> views_;
  std::vector<T> params_;

  // Flat offsets, fixed declaration order.
  std::size_t w1_, b1_, w2_, b2_, w3_, b3_, w4_, b4_, w5_, b5_;

  template <typename U>
  friend Network<U> make_network_from_params(const ModelSpec&, std::vector<U>);
};

template <typename T>
Network<T> make_network_from_params(const ModelSpec& spec,
                                    std::vector<T> params) {
  Network<T> net(spec, 0);
  if (params.size() != net.params_.size())
    throw DataError("parameter count mismatch");
  net.params_ = std::move(params);
  return net;
}

enum class Optimizer { adam };
enum class Precision { f32, f64 };

struct TrainConfig {
  std::size_t epochs{100};
  std::size_t batch_size{32};
  double learning_rate{1e-3};
  Optimizer optimizer{Optimizer::adam};
  std::uint64_t seed{0};
  double dropout_p{0.5};
  Precision precision{Precision::f32};
  std::size_t threads{0};  // 0 = hardware concurrency

  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  std::int64_t t{0};

  explicit AdamState(std::size_t n) : m(n, T{}), v(n, T{}) {}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam step over a flat parameter block.
template <typename T>
void adam_step(std::vector<T>& params, const std::vector<T>& grads,
               AdamState<T>& state, double learning_rate) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DataError("adam: shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 / (1.0 - std::pow(kAdamBeta1, double(state.t)));
  const double bc2 = 1.0 / (1.0 - std::pow(kAdamBeta2, double(state.t)));
  const auto& k = kernels::ops<T>();
  k.adam_update(params.data(), grads.data(), state.m.data(), state.v.data(),
                params.size(), T(learning_rate), T(kAdamBeta1), T(kAdamBeta2),
                T(kAdamEps), T(bc1), T(bc2));
}

// Labeled, trial-tagged window collection in network precision.
template <typename T>
struct WindowSet {
  std::size_t n_channels{0};
  std::size_t win_samples{0};
  std::vector<T> data;  // [n][n_channels][win_samples]
  std::vector<std::uint8_t> labels;
  std::vector<std::int64_t> trial_ids;

  std::size_t size() const { return labels.size(); }
  const T* window(std::size_t i) const {
    return data.data() + i * n_channels * win_samples;
  }
  void append(const Matrix& m, std::uint8_t label, std::int64_t trial_id) {
    if (n_channels == 0) {
      n_channels = m.rows;
      win_samples = m.cols;
    }
    if (m.rows != n_channels || m.cols != win_samples)
      throw DataError("window shape mismatch");
    data.reserve(data.size() + m.v.size());
    for (double v : m.v) data.push_back(static_cast<T>(v));
    labels.push_back(label);
    trial_ids.push_back(trial_id);
  }
};

struct EpochStats {
  double train_loss{0.0};
  double train_acc{0.0};
  double val_acc{std::numeric_limits<double>::quiet_NaN()};
};

template <typename T>
struct TrainResult {
  Network<T> model;
  std::vector<EpochStats> history;
};

// Inference probabilities for every window, [n x n_classes], f64.
template <typename T>
std::vector<std::array<double, 3>> evaluate(const Network<T>& net,
                                            const WindowSet<T>& set,
                                            std::size_t threads = 0);

// Mean softmax across a trial's windows, then argmax (ties -> lowest id).
int aggregate_trial_prediction(const std::vector<std::array<double, 3>>& probs);

// Trial-level accuracy from per-window probabilities.
double trial_accuracy(const std::vector<std::array<double, 3>>& probs,
                      const std::vector<std::int64_t>& trial_ids,
                      const std::vector<std::uint8_t>& labels);

// Full training loop: seeded shuffling, inverted dropout, Adam, and (when
// a validation set is given) retention of the parameter snapshot with the
// highest validation trial accuracy. With an empty validation set the
// final-epoch parameters are returned.
template <typename T>
TrainResult<T> train(const ModelSpec& spec, const WindowSet<T>& train_set,
                     const WindowSet<T>& val_set, const TrainConfig& cfg);

// Checkpoint: magic "MInet1", spec echo, parameters as f32 little-endian
// in declaration order.
template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path);
template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::filesystem::path& path);

// ----- template implementations ------------------------------------------

template <typename T>
void Cache<T>::resize(const ModelSpec& spec) {
  const Dims d = derive_dims(spec);
  const std::size_t K = spec.n_channels;
  a1.assign(spec.conv1_out * K * d.s1, T{});
  a2.assign(spec.conv2_out * K * d.s2, T{});
  a3.assign(spec.conv3_out * d.s2, T{});
  p1v.assign(spec.conv3_out * d.p1, T{});
  p1idx.assign(spec.conv3_out * d.p1, 0);
  drop.assign(spec.conv3_out * d.p1, T{});
  a4.assign(spec.conv4_out * d.s4, T{});
  p2v.assign(spec.conv4_out * d.p2, T{});
  p2idx.assign(spec.conv4_out * d.p2, 0);
  logits.assign(spec.n_classes, T{});
  probs.assign(spec.n_classes, T{});
  da1.assign(a1.size(), T{});
  da2.assign(a2.size(), T{});
  da3.assign(a3.size(), T{});
  dd.assign(drop.size(), T{});
  dp1.assign(drop.size(), T{});
  da4.assign(a4.size(), T{});
  dp2.assign(p2v.size(), T{});
}

template <typename T>
Network<T>::Network(const ModelSpec& spec, std::uint64_t init_seed)
    : spec_(spec) {
  spec_.validate();
  dims_ = derive_dims(spec_);
  const std::size_t K = spec_.n_channels;
  const std::size_t kt = spec_.temporal_kernel;
  auto add = [&](const char* name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto dch : shape) n *= dch;
    const std::size_t off = params_.size();
    views_.push_back({name, off, n, std::move(shape)});
    params_.resize(off + n, T{});
    return off;
  };
  w1_ = add("conv1.w", {spec_.conv1_out, 1, 1, kt});
  b1_ = add("conv1.b", {spec_.conv1_out});
  w2_ = add("conv2.w", {spec_.conv2_out, spec_.conv1_out, 1, kt});
  b2_ = add("conv2.b", {spec_.conv2_out});
  w3_ = add("conv3.w", {spec_.conv3_out, spec_.conv2_out, K, 1});
  b3_ = add("conv3.b", {spec_.conv3_out});
  w4_ = add("conv4.w", {spec_.conv4_out, spec_.conv3_out, 1, kt});
  b4_ = add("conv4.b", {spec_.conv4_out});
  w5_ = add("dense.w", {spec_.n_classes, dims_.flat});
  b5_ = add("dense.b", {spec_.n_classes});
  init_params(init_seed);
}

template <typename T>
void Network<T>::init_params(std::uint64_t seed) {
  rng::Xoshiro256pp gen(rng::derive_seed(seed, "weight-init"));
  auto fill_uniform = [&](std::size_t off, std::size_t n, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < n; ++i)
      params_[off + i] = static_cast<T>(gen.uniform(-bound, bound));
  };
  const std::size_t kt = spec_.temporal_kernel;
  fill_uniform(w1_, spec_.conv1_out * kt, kt);
  fill_uniform(w2_, spec_.conv2_out * spec_.conv1_out * kt,
               spec_.conv1_out * kt);
  fill_uniform(w3_, spec_.conv3_out * spec_.conv2_out * spec_.n_channels,
               spec_.conv2_out * spec_.n_channels);
  fill_uniform(w4_, spec_.conv4_out * spec_.conv3_out * kt,
               spec_.conv3_out * kt);
  // biases stay zero; the dense head stays all-zero so the first batch's
  // loss is exactly ln(n_classes)
}

template <typename T>
void Network<T>::forward(const T* x, Cache<T>& c, const T* mask) const {
  const auto& k = kernels::ops<T>();
  const std::size_t K = spec_.n_channels;
  const std::size_t S = spec_.in_samples;
  const std::size_t kt = spec_.temporal_kernel;
  const auto& d = dims_;
  const T* P = params_.data();
  c.x = x;

  auto elu = [](T* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      if (a[i] < T(0)) a[i] = std::exp(a[i]) - T(1);
  };

  // conv1 (1xkt temporal), no activation
  for (std::size_t co = 0; co < spec_.conv1_out; ++co)
    for (std::size_t h = 0; h < K; ++h) {
      T* out = c.a1.data() + (co * K + h) * d.s1;
      std::fill_n(out, d.s1, P[b1_ + co]);
      k.conv1d_acc(x + h * S, 0, 1, P + w1_ + co * kt, 0, kt, out, d.s1);
    }

  // conv2 (1xkt temporal over conv1_out channels), ELU
  for (std::size_t co = 0; co < spec_.conv2_out; ++co)
    for (std::size_t h = 0; h < K; ++h) {
      T* out = c.a2.data() + (co * K + h) * d.s2;
      std::fill_n(out, d.s2, P[b2_ + co]);
      k.conv1d_acc(c.a1.data() + h * d.s1, K * d.s1, spec_.conv1_out,
                   P + w2_ + co * spec_.conv1_out * kt, kt, kt, out, d.s2);
    }
  elu(c.a2.data(), c.a2.size());

  // conv3 (Kx1 spatial collapse), ELU
  for (std::size_t co = 0; co < spec_.conv3_out; ++co) {
    T* out = c.a3.data() + co * d.s2;
    std::fill_n(out, d.s2, P[b3_ + co]);
    k.conv1d_acc(c.a2.data(), d.s2, spec_.conv2_out * K,
                 P + w3_ + co * spec_.conv2_out * K, 1, 1, out, d.s2);
  }
  elu(c.a3.data(), c.a3.size());

  // max pool 1xpool, stride pool
  const std::size_t pool = spec_.pool;
  for (std::size_t co = 0; co < spec_.conv3_out; ++co) {
    const T* row = c.a3.data() + co * d.s2;
    for (std::size_t j = 0; j < d.p1; ++j) {
      std::size_t best = j * pool;
      for (std::size_t u = 1; u < pool; ++u)
        if (row[j * pool + u] > row[best]) best = j * pool + u;
      c.p1v[co * d.p1 + j] = row[best];
      c.p1idx[co * d.p1 + j] = static_cast<std::uint32_t>(best);
    }
  }

  // dropout (inverted scaling lives in the mask values)
  if (mask) {
    for (std::size_t i = 0; i < c.drop.size(); ++i)
      c.drop[i] = c.p1v[i] * mask[i];
  } else {
    std::copy(c.p1v.begin(), c.p1v.end(), c.drop.begin());
  }

  // conv4 (1xkt temporal), ELU
  for (std::size_t co = 0; co < spec_.conv4_out; ++co) {
    T* out = c.a4.data() + co * d.s4;
    std::fill_n(out, d.s4, P[b4_ + co]);
    k.conv1d_acc(c.drop.data(), d.p1, spec_.conv3_out,
                 P + w4_ + co * spec_.conv3_out * kt, kt, kt, out, d.s4);
  }
  elu(c.a4.data(), c.a4.size());

  // max pool -> flatten
  for (std::size_t co = 0; co < spec_.conv4_out; ++co) {
    const T* row = c.a4.data() + co * d.s4;
    for (std::size_t j = 0; j < d.p2; ++j) {
      std::size_t best = j * pool;
      for (std::size_t u = 1; u < pool; ++u)
        if (row[j * pool + u] > row[best]) best = j * pool + u;
      c.p2v[co * d.p2 + j] = row[best];
      c.p2idx[co * d.p2 + j] = static_cast<std::uint32_t>(best);
    }
  }

  // dense + softmax
  for (std::size_t cls = 0; cls < spec_.n_classes; ++cls)
    c.logits[cls] =
        P[b5_ + cls] + k.dot(P + w5_ + cls * d.flat, c.p2v.data(), d.flat);
  T mx = c.logits[0];
  for (std::size_t cls = 1; cls < spec_.n_classes; ++cls)
    mx = std::max(mx, c.logits[cls]);
  T sum{};
  for (std::size_t cls = 0; cls < spec_.n_classes; ++cls) {
    c.probs[cls] = std::exp(c.logits[cls] - mx);
    sum += c.probs[cls];
  }
  for (std::size_t cls = 0; cls < spec_.n_classes; ++cls) c.probs[cls] /= sum;
}

template <typename T>
T Network<T>::backward(Cache<T>& c, std::uint8_t label, T* grad,
                       const T* mask) const {
  const auto& k = kernels::ops<T>();
  const std::size_t K = spec_.n_channels;
  const std::size_t S = spec_.in_samples;
  const std::size_t kt = spec_.temporal_kernel;
  const std::size_t pool = spec_.pool;
  const auto& d = dims_;
  const T* P = params_.data();
  assert(label < spec_.n_classes);

  const T loss = -std::log(std::max(c.probs[label], T(1e-30)));

  // dlogits = probs - onehot
  std::array<T, 8> dlogits{};
  for (std::size_t cls = 0; cls < spec_.n_classes; ++cls)
    dlogits[cls] = c.probs[cls] - (cls == label ? T(1) : T(0));

  // dense
  std::fill(c.dp2.begin(), c.dp2.end(), T{});
  for (std::size_t cls = 0; cls < spec_.n_classes; ++cls) {
    grad[b5_ + cls] += dlogits[cls];
    k.axpy(dlogits[cls], c.p2v.data(), grad + w5_ + cls * d.flat, d.flat);
    k.axpy(dlogits[cls], P + w5_ + cls * d.flat, c.dp2.data(), d.flat);
  }

  // pool2 scatter, then ELU' on a4 (post-activation y: y>0 ? 1 : y+1)
  std::fill(c.da4.begin(), c.da4.end(), T{});
  for (std::size_t co = 0; co < spec_.conv4_out; ++co)
    for (std::size_t j = 0; j < d.p2; ++j)
      c.da4[co * d.s4 + c.p2idx[co * d.p2 + j]] += c.dp2[co * d.p2 + j];
  for (std::size_t i = 0; i < c.da4.size(); ++i)
    c.da4[i] *= c.a4[i] > T(0) ? T(1) : c.a4[i] + T(1);

  // conv4
  std::fill(c.dd.begin(), c.dd.end(), T{});
  for (std::size_t co = 0; co < spec_.conv4_out; ++co) {
    const T* dout = c.da4.data() + co * d.s4;
    T bsum{};
    for (std::size_t i = 0; i < d.s4; ++i) bsum += dout[i];
    grad[b4_ + co] += bsum;
    for (std::size_t ci = 0; ci < spec_.conv3_out; ++ci) {
      k.conv1d_grad_w(c.drop.data() + ci * d.p1, dout, d.s4, kt,
                      grad + w4_ + (co * spec_.conv3_out + ci) * kt);
      kernels::conv1d_grad_in(k, dout, d.s4,
                              P + w4_ + (co * spec_.conv3_out + ci) * kt, kt,
                              c.dd.data() + ci * d.p1);
    }
  }

  // dropout
  if (mask) {
    for (std::size_t i = 0; i < c.dp1.size(); ++i)
      c.dp1[i] = c.dd[i] * mask[i];
  } else {
    std::copy(c.dd.begin(), c.dd.end(), c.dp1.begin());
  }

  // pool1 scatter, ELU' on a3
  std::fill(c.da3.begin(), c.da3.end(), T{});
  for (std::size_t co = 0; co < spec_.conv3_out; ++co)
    for (std::size_t j = 0; j < d.p1; ++j)
      c.da3[co * d.s2 + c.p1idx[co * d.p1 + j]] += c.dp1[co * d.p1 + j];
  for (std::size_t i = 0; i < c.da3.size(); ++i)
    c.da3[i] *= c.a3[i] > T(0) ? T(1) : c.a3[i] + T(1);

  // conv3 (taps == 1: grad_w is a dot, grad_in is an axpy per row)
  std::fill(c.da2.begin(), c.da2.end(), T{});
  for (std::size_t co = 0; co < spec_.conv3_out; ++co) {
    const T* dout = c.da3.data() + co * d.s2;
    T bsum{};
    for (std::size_t i = 0; i < d.s2; ++i) bsum += dout[i];
    grad[b3_ + co] += bsum;
    for (std::size_t r = 0; r < spec_.conv2_out * K; ++r) {
      grad[w3_ + co * spec_.conv2_out * K + r] +=
          k.dot(c.a2.data() + r * d.s2, dout, d.s2);
      k.axpy(P[w3_ + co * spec_.conv2_out * K + r], dout,
             c.da2.data() + r * d.s2, d.s2);
    }
  }
  for (std::size_t i = 0; i < c.da2.size(); ++i)
    c.da2[i] *= c.a2[i] > T(0) ? T(1) : c.a2[i] + T(1);

  // conv2
  std::fill(c.da1.begin(), c.da1.end(), T{});
  for (std::size_t co = 0; co < spec_.conv2_out; ++co)
    for (std::size_t h = 0; h < K; ++h) {
      const T* dout = c.da2.data() + (co * K + h) * d.s2;
      T bsum{};
      for (std::size_t i = 0; i < d.s2; ++i) bsum += dout[i];
      grad[b2_ + co] += bsum;
      for (std::size_t ci = 0; ci < spec_.conv1_out; ++ci) {
        k.conv1d_grad_w(c.a1.data() + (ci * K + h) * d.s1, dout, d.s2, kt,
                        grad + w2_ + (co * spec_.conv1_out + ci) * kt);
        kernels::conv1d_grad_in(k, dout, d.s2,
                                P + w2_ + (co * spec_.conv1_out + ci) * kt, kt,
                                c.da1.data() + (ci * K + h) * d.s1);
      }
    }

  // conv1 (no activation, no input gradient needed)
  for (std::size_t co = 0; co < spec_.conv1_out; ++co)
    for (std::size_t h = 0; h < K; ++h) {
      const T* dout = c.da1.data() + (co * K + h) * d.s1;
      T bsum{};
      for (std::size_t i = 0; i < d.s1; ++i) bsum += dout[i];
      grad[b1_ + co] += bsum;
      k.conv1d_grad_w(c.x + h * S, dout, d.s1, kt, grad + w1_ + co * kt);
    }

  return loss;
}

template <typename T>
std::vector<std::array<double, 3>> evaluate(const Network<T>& net,
                                            const WindowSet<T>& set,
                                            std::size_t threads) {
  if (set.n_channels != net.spec().n_channels ||
      set.win_samples != net.spec().in_samples)
    throw DataError("window shape does not match network spec");
  const std::size_t workers = resolve_threads(threads);
  std::vector<Cache<T>> caches(workers);
  for (auto& c : caches) c.resize(net.spec());
  std::vector<std::array<double, 3>> probs(set.size());
  parallel_for(set.size(), workers, [&](std::size_t w, std::size_t i) {
    net.forward(set.window(i), caches[w], nullptr);
    for (int cls = 0; cls < 3; ++cls)
      probs[i][cls] = static_cast<double>(caches[w].probs[cls]);
  });
  return probs;
}

inline int aggregate_trial_prediction(
    const std::vector<std::array<double, 3>>& probs) {
  if (probs.empty()) throw DataError("no windows to aggregate");
  std::array<double, 3> mean{};
  for (const auto& p : probs)
    for (int cls = 0; cls < 3; ++cls) mean[cls] += p[cls];
  int best = 0;
  for (int cls = 1; cls < 3; ++cls)
    if (mean[cls] > mean[best]) best = cls;
  return best;
}

inline double trial_accuracy(const std::vector<std::array<double, 3>>& probs,
                             const std::vector<std::int64_t>& trial_ids,
                             const std::vector<std::uint8_t>& labels) {
  if (probs.size() != trial_ids.size() || probs.size() != labels.size())
    throw DataError("trial accuracy: length mismatch");
  if (probs.empty()) return 0.0;
  // group windows by trial id, preserving first-seen order
  std::vector<std::int64_t> order;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    std::size_t g = 0;
    for (; g < order.size(); ++g)
      if (order[g] == trial_ids[i]) break;
    if (g == order.size()) {
      order.push_back(trial_ids[i]);
      groups.emplace_back();
    }
    groups[g].push_back(i);
  }
  std::size_t correct = 0;
  for (const auto& g : groups) {
    std::vector<std::array<double, 3>> tp;
    tp.reserve(g.size());
    for (auto i : g) tp.push_back(probs[i]);
    if (aggregate_trial_prediction(tp) == labels[g.front()]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(groups.size());
}

template <typename T>
TrainResult<T> train(const ModelSpec& spec, const WindowSet<T>& train_set,
                     const WindowSet<T>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw ConfigError("empty training set");
  for (auto tid : val_set.trial_ids)
    for (auto t2 : train_set.trial_ids)
      if (tid == t2)
        throw DataError("train/val trial sets overlap (trial id " +
                        std::to_string(tid) + ")");

  TrainResult<T> result{Network<T>(spec, rng::derive_seed(cfg.seed, "init")),
                        {}};
  Network<T>& net = result.model;
  if (cfg.epochs == 0) return result;

  const std::size_t n = train_set.size();
  const std::size_t B = std::min(cfg.batch_size, n);
  const std::size_t P = net.n_params();
  const std::size_t mask_len = spec.conv3_out * net.dims().p1;
  const bool use_dropout = cfg.dropout_p > 0.0;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - cfg.dropout_p));

  rng::Xoshiro256pp shuffle_rng(rng::derive_seed(cfg.seed, "shuffle"));
  rng::Xoshiro256pp dropout_rng(rng::derive_seed(cfg.seed, "dropout"));

  const std::size_t workers = resolve_threads(cfg.threads);
  std::vector<Cache<T>> caches(workers);
  for (auto& c : caches) c.resize(spec);

  std::vector<std::vector<T>> sample_grads(B, std::vector<T>(P, T{}));
  std::vector<T> masks(use_dropout ? B * mask_len : 0);
  std::vector<T> grad(P, T{});
  std::vector<T> losses(B, T{});
  std::vector<std::uint8_t> correct(B, 0);
  AdamState<T> adam(P);

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  std::vector<T> best_params;
  double best_val = -1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(perm);
    double loss_sum = 0.0;
    std::size_t correct_sum = 0;

    for (std::size_t start = 0; start < n; start += B) {
      const std::size_t bsz = std::min(B, n - start);
      if (use_dropout) {
        for (std::size_t i = 0; i < bsz * mask_len; ++i)
          masks[i] = dropout_rng.uniform() < cfg.dropout_p ? T(0) : keep_scale;
      }
      parallel_for(bsz, workers, [&](std::size_t w, std::size_t i) {
        const std::size_t idx = perm[start + i];
        const T* mask = use_dropout ? masks.data() + i * mask_len : nullptr;
        Cache<T>& c = caches[w];
        net.forward(train_set.window(idx), c, mask);
        std::fill(sample_grads[i].begin(), sample_grads[i].end(), T{});
        losses[i] =
            net.backward(c, train_set.labels[idx], sample_grads[i].data(), mask);
        int pred = 0;
        for (int cls = 1; cls < 3; ++cls)
          if (c.probs[cls] > c.probs[pred]) pred = cls;
        correct[i] = pred == train_set.labels[idx] ? 1 : 0;
      });

      // deterministic reduction in sample order, independent of threading
      std::fill(grad.begin(), grad.end(), T{});
      const auto& k = kernels::ops<T>();
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < bsz; ++i) {
        k.axpy(T(1), sample_grads[i].data(), grad.data(), P);
        batch_loss += static_cast<double>(losses[i]);
        correct_sum += correct[i];
      }
      k.scale(T(1.0 / double(bsz)), grad.data(), P);
      batch_loss /= double(bsz);
      if (!std::isfinite(batch_loss))
        throw TrainingError("non-finite loss at epoch " +
                            std::to_string(epoch));
      loss_sum += batch_loss * double(bsz);
      adam_step(net.flat_params(), grad, adam, cfg.learning_rate);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / double(n);
    stats.train_acc = double(correct_sum) / double(n);
    if (val_set.size() > 0) {
      const auto probs = evaluate(net, val_set, cfg.threads);
      stats.val_acc = trial_accuracy(probs, val_set.trial_ids, val_set.labels);
      if (stats.val_acc > best_val) {
        best_val = stats.val_acc;
        best_params = net.flat_params();
      }
    }
    result.history.push_back(stats);
  }

  if (!best_params.empty()) net.flat_params() = std::move(best_params);
  return result;
}

}  // namespace miemph::net
