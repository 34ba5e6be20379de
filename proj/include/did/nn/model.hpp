#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "did/errors.hpp"
#include "did/rng.hpp"

namespace did::nn {

enum class Variant { Lstm1a, Lstm1b, Lstm2a, Lstm2b };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Lstm1a: return "lstm-1a";
    case Variant::Lstm1b: return "lstm-1b";
    case Variant::Lstm2a: return "lstm-2a";
    default: return "lstm-2b";
  }
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "lstm-1a") return Variant::Lstm1a;
  if (s == "lstm-1b") return Variant::Lstm1b;
  if (s == "lstm-2a") return Variant::Lstm2a;
  if (s == "lstm-2b") return Variant::Lstm2b;
  throw Error("unknown variant: " + s);
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ModelConfig {
  Variant variant = Variant::Lstm1b;
  std::vector<std::size_t> lstm_units;  // derived from variant
  std::vector<std::size_t> fc_units;    // hidden FC widths, excludes output
  double dropout_rate = 0.20;
  std::size_t n_classes = 2;
  std::size_t input_dim = 0;  // 1 + B
  std::size_t seq_len = 0;    // 1 + P
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::size_t patience = 10;  // early stopping on validation loss
};

/// One LSTM layer (50 units) vs two (100, 50); deep FC stack ("a") vs the
/// light 64/16 one ("b").
inline ModelConfig make_model_config(Variant v, std::size_t n_classes,
                                     std::size_t seq_len,
                                     std::size_t input_dim,
                                     std::uint64_t seed) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.n_classes = n_classes;
  cfg.seq_len = seq_len;
  cfg.input_dim = input_dim;
  cfg.seed = seed;
  bool two = (v == Variant::Lstm2a || v == Variant::Lstm2b);
  cfg.lstm_units = two ? std::vector<std::size_t>{100, 50}
                       : std::vector<std::size_t>{50};
  bool deep = (v == Variant::Lstm1a || v == Variant::Lstm2a);
  cfg.fc_units = deep ? std::vector<std::size_t>{2500, 1250, 512, 256, 64, 16}
                      : std::vector<std::size_t>{64, 16};
  return cfg;
}

/// Named tensors packed into one flat buffer; gradients and Adam moments
/// share the layout.
template <typename T>
struct ParamStore {
  struct Entry {
    std::string name;
    std::vector<std::size_t> dims;
    std::size_t offset = 0;
    std::size_t size = 0;
  };
  std::vector<Entry> entries;
  std::vector<T> data;

  std::size_t add(std::string name, std::vector<std::size_t> dims) {
    Entry e;
    e.name = std::move(name);
    e.size = 1;
    for (auto d : dims) e.size *= d;
    e.dims = std::move(dims);
    e.offset = data.size();
    data.resize(data.size() + e.size, T(0));
    entries.push_back(std::move(e));
    return entries.size() - 1;
  }
  std::span<T> view(std::size_t idx) {
    return {data.data() + entries[idx].offset, entries[idx].size};
  }
  std::span<const T> view(std::size_t idx) const {
    return {data.data() + entries[idx].offset, entries[idx].size};
  }
};

namespace detail {

// y = W x, W is rows x cols row-major
template <typename T>
inline void matvec(const T* W, const T* x, T* y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = 0;
    const T* w = W + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

// y += W x
template <typename T>
inline void matvec_add(const T* W, const T* x, T* y, std::size_t rows,
                       std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = 0;
    const T* w = W + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T d
template <typename T>
inline void matvec_transpose_add(const T* W, const T* d, T* y,
                                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* w = W + r * cols;
    T dr = d[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += w[c] * dr;
  }
}

// G += d x^T
template <typename T>
inline void outer_add(T* G, const T* d, const T* x, std::size_t rows,
                      std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* g = G + r * cols;
    T dr = d[r];
    for (std::size_t c = 0; c < cols; ++c) g[c] += dr * x[c];
  }
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace detail

enum class Mode { Train, Infer };

/// Per-sample activations retained for backpropagation through time.
template <typename T>
struct ForwardCache {
  // per LSTM layer, seq_len * hidden each (gates post-nonlinearity)
  struct LstmCache {
    std::vector<T> i, f, g, o, c, h;
  };
  std::vector<LstmCache> lstm;
  std::vector<std::vector<T>> lstm_inputs;  // layer 0 input = the matrix rows
  std::vector<std::vector<T>> fc_pre;    // pre-ReLU per hidden FC layer
  std::vector<std::vector<T>> fc_act;    // post-ReLU+dropout per hidden layer
  std::vector<std::vector<T>> fc_mask;   // inverted dropout scale per unit
  std::vector<T> logits;
  std::vector<T> probs;
};

/// LSTM sequence classifier with an FC head, trained by BPTT + Adam.
/// T = float for real use; double for the finite-difference reference mode.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg_.input_dim == 0 || cfg_.seq_len == 0)
      throw DimensionMismatch("model input dimensions must be set");
    build();
    init_params();
    grads_.assign(params_.data.size(), T(0));
    adam_m_.assign(params_.data.size(), T(0));
    adam_v_.assign(params_.data.size(), T(0));
    rng_.seed(cfg_.seed ^ 0x9E3779B97F4A7C15ull);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::vector<T>& grads() { return grads_; }
  std::vector<T>& adam_m() { return adam_m_; }
  std::vector<T>& adam_v() { return adam_v_; }
  std::size_t& step() { return step_; }
  std::size_t step() const { return step_; }
  rng::Engine& rng() { return rng_; }

  /// Class probabilities for one matrix (row-major seq_len x input_dim).
  std::vector<T> forward(std::span<const float> matrix, Mode mode) {
    ForwardCache<T> cache;
    return forward_cached(matrix, mode, cache);
  }

  std::vector<T> forward_cached(std::span<const float> matrix, Mode mode,
                                ForwardCache<T>& cache) {
    const std::size_t Tseq = cfg_.seq_len, D = cfg_.input_dim;
    if (matrix.size() != Tseq * D)
      throw DimensionMismatch("matrix size " + std::to_string(matrix.size()) +
                              " != " + std::to_string(Tseq * D));

    cache.lstm_inputs.resize(lstm_.size());
    cache.lstm.resize(lstm_.size());
    cache.lstm_inputs[0].resize(Tseq * D);
    for (std::size_t k = 0; k < Tseq * D; ++k)
      cache.lstm_inputs[0][k] = static_cast<T>(matrix[k]);

    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      lstm_forward_layer(l, cache.lstm_inputs[l], cache.lstm[l]);
      if (l + 1 < lstm_.size()) cache.lstm_inputs[l + 1] = cache.lstm[l].h;
    }

    // FC head over the last hidden state
    const std::size_t H = lstm_.back().hid;
    std::vector<T> act(cache.lstm.back().h.end() - static_cast<std::ptrdiff_t>(H),
                       cache.lstm.back().h.end());
    cache.fc_pre.resize(fc_.size());
    cache.fc_act.resize(fc_.size());
    cache.fc_mask.resize(fc_.size());
    for (std::size_t k = 0; k < fc_.size(); ++k) {
      std::vector<T> z(fc_[k].out);
      detail::matvec(params_.view(fc_[k].W).data(), act.data(), z.data(),
                     fc_[k].out, fc_[k].in);
      auto b = params_.view(fc_[k].b);
      for (std::size_t r = 0; r < fc_[k].out; ++r) z[r] += b[r];
      cache.fc_pre[k] = z;
      for (auto& v : z) v = std::max(v, T(0));  // ReLU
      cache.fc_mask[k].assign(fc_[k].out, T(1));
      if (mode == Mode::Train && cfg_.dropout_rate > 0) {
        T keep = T(1) - static_cast<T>(cfg_.dropout_rate);
        for (std::size_t r = 0; r < fc_[k].out; ++r) {
          bool kept = rng::uniform_real(rng_) >= cfg_.dropout_rate;
          cache.fc_mask[k][r] = kept ? T(1) / keep : T(0);
          z[r] *= cache.fc_mask[k][r];
        }
      }
      cache.fc_act[k] = z;
      act = std::move(z);
    }

    cache.logits.resize(cfg_.n_classes);
    detail::matvec(params_.view(out_W_).data(), act.data(),
                   cache.logits.data(), cfg_.n_classes, out_in_);
    auto ob = params_.view(out_b_);
    for (std::size_t r = 0; r < cfg_.n_classes; ++r) cache.logits[r] += ob[r];

    cache.probs = softmax(cache.logits);
    return cache.probs;
  }

  /// Accumulate gradients for one sample into grads(); the caller zeroes and
  /// scales. dlogits = probs - onehot(label) times any upstream weight.
  void backward(const ForwardCache<T>& cache, std::span<const T> dlogits) {
    const std::size_t H = lstm_.back().hid;

    // output layer
    const std::vector<T>& top_act =
        fc_.empty() ? last_hidden(cache) : cache.fc_act.back();
    detail::outer_add(grads_.data() + params_.entries[out_W_].offset,
                      dlogits.data(), top_act.data(), cfg_.n_classes, out_in_);
    {
      T* gb = grads_.data() + params_.entries[out_b_].offset;
      for (std::size_t r = 0; r < cfg_.n_classes; ++r) gb[r] += dlogits[r];
    }
    std::vector<T> d(out_in_, T(0));
    detail::matvec_transpose_add(params_.view(out_W_).data(), dlogits.data(),
                                 d.data(), cfg_.n_classes, out_in_);

    // FC stack, reverse
    for (std::size_t k = fc_.size(); k-- > 0;) {
      for (std::size_t r = 0; r < fc_[k].out; ++r) {
        d[r] *= cache.fc_mask[k][r];               // dropout
        if (cache.fc_pre[k][r] <= T(0)) d[r] = 0;  // ReLU
      }
      const std::vector<T>& below =
          (k == 0) ? last_hidden(cache) : cache.fc_act[k - 1];
      detail::outer_add(grads_.data() + params_.entries[fc_[k].W].offset,
                        d.data(), below.data(), fc_[k].out, fc_[k].in);
      T* gb = grads_.data() + params_.entries[fc_[k].b].offset;
      for (std::size_t r = 0; r < fc_[k].out; ++r) gb[r] += d[r];
      std::vector<T> dn(fc_[k].in, T(0));
      detail::matvec_transpose_add(params_.view(fc_[k].W).data(), d.data(),
                                   dn.data(), fc_[k].out, fc_[k].in);
      d = std::move(dn);
    }

    // BPTT through the LSTM stack; the head only touches the last timestep
    // of the top layer.
    std::vector<T> dH(cfg_.seq_len * H, T(0));
    std::copy(d.begin(), d.end(), dH.end() - static_cast<std::ptrdiff_t>(H));
    for (std::size_t l = lstm_.size(); l-- > 0;) {
      std::vector<T> dX;
      lstm_backward_layer(l, cache.lstm_inputs[l], cache.lstm[l], dH, dX);
      dH = std::move(dX);
    }
  }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), T(0)); }

  void scale_grads(T s) {
    for (auto& g : grads_) g *= s;
  }

  /// One Adam update from the accumulated gradients.
  void adam_step() {
    const AdamConfig& a = cfg_.adam;
    ++step_;
    double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.data.size(); ++i) {
      double g = static_cast<double>(grads_[i]);
      double m = a.beta1 * static_cast<double>(adam_m_[i]) + (1 - a.beta1) * g;
      double v = a.beta2 * static_cast<double>(adam_v_[i]) + (1 - a.beta2) * g * g;
      adam_m_[i] = static_cast<T>(m);
      adam_v_[i] = static_cast<T>(v);
      double mhat = m / bc1;
      double vhat = v / bc2;
      params_.data[i] -= static_cast<T>(a.lr * mhat / (std::sqrt(vhat) + a.eps));
    }
  }

  static std::vector<T> softmax(const std::vector<T>& logits) {
    T mx = *std::max_element(logits.begin(), logits.end());
    std::vector<T> p(logits.size());
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      p[i] = std::exp(logits[i] - mx);
      sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
  }

  /// Standalone single-layer LSTM pass, h_0 = c_0 = 0. Inputs are
  /// seq-major; returns h_1..h_T concatenated.
  std::vector<T> lstm_forward(std::size_t layer, const std::vector<T>& inputs) {
    if (inputs.size() % lstm_[layer].in != 0)
      throw DimensionMismatch("input length not a multiple of input_dim");
    typename ForwardCache<T>::LstmCache cache;
    lstm_forward_layer(layer, inputs, cache);
    return cache.h;
  }

 private:
  struct LstmHandles {
    std::size_t in = 0, hid = 0;
    std::size_t W[4], U[4], b[4];  // gate order: i, f, g, o
  };
  struct FcHandles {
    std::size_t in = 0, out = 0;
    std::size_t W = 0, b = 0;
  };

  const std::vector<T>& last_hidden_storage(const ForwardCache<T>& c) const {
    return c.lstm.back().h;
  }
  std::vector<T> last_hidden(const ForwardCache<T>& c) const {
    const std::size_t H = lstm_.back().hid;
    return {c.lstm.back().h.end() - static_cast<std::ptrdiff_t>(H),
            c.lstm.back().h.end()};
  }

  void build() {
    static const char* gate_names[4] = {"i", "f", "g", "o"};
    std::size_t in = cfg_.input_dim;
    for (std::size_t l = 0; l < cfg_.lstm_units.size(); ++l) {
      LstmHandles h;
      h.in = in;
      h.hid = cfg_.lstm_units[l];
      for (int g = 0; g < 4; ++g) {
        std::string base = "lstm" + std::to_string(l) + ".";
        h.W[g] = params_.add(base + "W." + gate_names[g], {h.hid, h.in});
        h.U[g] = params_.add(base + "U." + gate_names[g], {h.hid, h.hid});
        h.b[g] = params_.add(base + "b." + gate_names[g], {h.hid});
      }
      lstm_.push_back(h);
      in = h.hid;
    }
    for (std::size_t k = 0; k < cfg_.fc_units.size(); ++k) {
      FcHandles h;
      h.in = in;
      h.out = cfg_.fc_units[k];
      std::string base = "fc" + std::to_string(k) + ".";
      h.W = params_.add(base + "W", {h.out, h.in});
      h.b = params_.add(base + "b", {h.out});
      fc_.push_back(h);
      in = h.out;
    }
    out_in_ = in;
    out_W_ = params_.add("out.W", {cfg_.n_classes, in});
    out_b_ = params_.add("out.b", {cfg_.n_classes});
  }

  // uniform(+-sqrt(6/(fan_in+fan_out))) weights; zero biases except the
  // forget gate, which starts at 1
  void init_params() {
    rng::Engine eng(cfg_.seed);
    for (const auto& e : params_.entries) {
      T* p = params_.data.data() + e.offset;
      if (e.dims.size() == 2) {
        double fan_out = static_cast<double>(e.dims[0]);
        double fan_in = static_cast<double>(e.dims[1]);
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < e.size; ++i)
          p[i] = static_cast<T>(rng::uniform_range(eng, -a, a));
      } else if (e.name.find("b.f") != std::string::npos) {
        for (std::size_t i = 0; i < e.size; ++i) p[i] = T(1);
      }
    }
  }

  void lstm_forward_layer(std::size_t l, const std::vector<T>& input,
                          typename ForwardCache<T>::LstmCache& c) const {
    const LstmHandles& L = lstm_[l];
    const std::size_t Tseq = input.size() / L.in, H = L.hid;
    c.i.assign(Tseq * H, 0); c.f.assign(Tseq * H, 0);
    c.g.assign(Tseq * H, 0); c.o.assign(Tseq * H, 0);
    c.c.assign(Tseq * H, 0); c.h.assign(Tseq * H, 0);
    std::vector<T> a(H);
    const T* Wd[4];
    const T* Ud[4];
    const T* bd[4];
    for (int g = 0; g < 4; ++g) {
      Wd[g] = params_.view(L.W[g]).data();
      Ud[g] = params_.view(L.U[g]).data();
      bd[g] = params_.view(L.b[g]).data();
    }
    std::vector<T> zeros(H, T(0));
    for (std::size_t t = 0; t < Tseq; ++t) {
      const T* x = input.data() + t * L.in;
      const T* h_prev = t == 0 ? zeros.data() : c.h.data() + (t - 1) * H;
      const T* c_prev = t == 0 ? zeros.data() : c.c.data() + (t - 1) * H;
      T* gates[4] = {c.i.data() + t * H, c.f.data() + t * H,
                     c.g.data() + t * H, c.o.data() + t * H};
      for (int g = 0; g < 4; ++g) {
        detail::matvec(Wd[g], x, a.data(), H, L.in);
        detail::matvec_add(Ud[g], h_prev, a.data(), H, H);
        for (std::size_t r = 0; r < H; ++r) {
          T z = a[r] + bd[g][r];
          gates[g][r] = (g == 2) ? std::tanh(z) : detail::sigmoid(z);
        }
      }
      T* ct = c.c.data() + t * H;
      T* ht = c.h.data() + t * H;
      for (std::size_t r = 0; r < H; ++r) {
        ct[r] = gates[1][r] * c_prev[r] + gates[0][r] * gates[2][r];
        ht[r] = gates[3][r] * std::tanh(ct[r]);
      }
    }
  }

  void lstm_backward_layer(std::size_t l, const std::vector<T>& input,
                           const typename ForwardCache<T>::LstmCache& c,
                           const std::vector<T>& dH, std::vector<T>& dX) {
    const LstmHandles& L = lstm_[l];
    const std::size_t Tseq = input.size() / L.in, H = L.hid;
    dX.assign(Tseq * L.in, T(0));
    std::vector<T> dh_next(H, 0), dc_next(H, 0);
    std::vector<T> da[4];
    for (auto& v : da) v.resize(H);
    std::vector<T> zeros(H, T(0));
    T* gW[4];
    T* gU[4];
    T* gb[4];
    const T* Wd[4];
    const T* Ud[4];
    for (int g = 0; g < 4; ++g) {
      gW[g] = grads_.data() + params_.entries[L.W[g]].offset;
      gU[g] = grads_.data() + params_.entries[L.U[g]].offset;
      gb[g] = grads_.data() + params_.entries[L.b[g]].offset;
      Wd[g] = params_.view(L.W[g]).data();
      Ud[g] = params_.view(L.U[g]).data();
    }
    for (std::size_t t = Tseq; t-- > 0;) {
      const T* x = input.data() + t * L.in;
      const T* h_prev = t == 0 ? zeros.data() : c.h.data() + (t - 1) * H;
      const T* c_prev = t == 0 ? zeros.data() : c.c.data() + (t - 1) * H;
      const T* it = c.i.data() + t * H;
      const T* ft = c.f.data() + t * H;
      const T* gt = c.g.data() + t * H;
      const T* ot = c.o.data() + t * H;
      const T* ct = c.c.data() + t * H;
      for (std::size_t r = 0; r < H; ++r) {
        T dh = dH[t * H + r] + dh_next[r];
        T tc = std::tanh(ct[r]);
        T d_o = dh * tc;
        T dc = dc_next[r] + dh * ot[r] * (T(1) - tc * tc);
        T d_i = dc * gt[r];
        T d_g = dc * it[r];
        T d_f = dc * c_prev[r];
        dc_next[r] = dc * ft[r];
        da[0][r] = d_i * it[r] * (T(1) - it[r]);
        da[1][r] = d_f * ft[r] * (T(1) - ft[r]);
        da[2][r] = d_g * (T(1) - gt[r] * gt[r]);
        da[3][r] = d_o * ot[r] * (T(1) - ot[r]);
      }
      std::fill(dh_next.begin(), dh_next.end(), T(0));
      T* dx = dX.data() + t * L.in;
      for (int g = 0; g < 4; ++g) {
        detail::outer_add(gW[g], da[g].data(), x, H, L.in);
        detail::outer_add(gU[g], da[g].data(), h_prev, H, H);
        for (std::size_t r = 0; r < H; ++r) gb[g][r] += da[g][r];
        detail::matvec_transpose_add(Wd[g], da[g].data(), dx, H, L.in);
        detail::matvec_transpose_add(Ud[g], da[g].data(), dh_next.data(), H, H);
      }
    }
  }

  ModelConfig cfg_;
  ParamStore<T> params_;
  std::vector<T> grads_, adam_m_, adam_v_;
  std::size_t step_ = 0;
  std::vector<LstmHandles> lstm_;
  std::vector<FcHandles> fc_;
  std::size_t out_W_ = 0, out_b_ = 0, out_in_ = 0;
  rng::Engine rng_;
};

}  // namespace did::nn
