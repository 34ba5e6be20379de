#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "did/nn/checkpoint.hpp"
#include "did/nn/model.hpp"
#include "did/nn/train.hpp"
#include "did/rng.hpp"

using namespace did;
using namespace did::nn;

namespace {

ModelConfig tiny_config(std::size_t seq_len, std::size_t input_dim,
                        std::vector<std::size_t> lstm_units,
                        std::vector<std::size_t> fc_units,
                        std::size_t n_classes, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.seq_len = seq_len;
  cfg.input_dim = input_dim;
  cfg.lstm_units = std::move(lstm_units);
  cfg.fc_units = std::move(fc_units);
  cfg.n_classes = n_classes;
  cfg.seed = seed;
  cfg.dropout_rate = 0;  // keep the loss a deterministic function of params
  return cfg;
}

std::vector<float> random_matrix(std::size_t n, rng::Engine& eng) {
  std::vector<float> m(n);
  for (auto& v : m) v = static_cast<float>(rng::uniform_real(eng));
  return m;
}

// central finite differences of the batch loss, 64-bit
double numeric_gradient(Model<double>& model, std::span<const Sample> batch,
                        std::size_t param_index, double h = 1e-5) {
  double saved = model.params().data[param_index];
  model.params().data[param_index] = saved + h;
  double up = 0;
  for (const auto& s : batch) {
    auto p = model.forward(s.values, Mode::Infer);
    up += -std::log(p[static_cast<std::size_t>(s.label)]);
  }
  up /= static_cast<double>(batch.size());
  model.params().data[param_index] = saved - h;
  double down = 0;
  for (const auto& s : batch) {
    auto p = model.forward(s.values, Mode::Infer);
    down += -std::log(p[static_cast<std::size_t>(s.label)]);
  }
  down /= static_cast<double>(batch.size());
  model.params().data[param_index] = saved;
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("same seed gives identical parameters") {
  auto cfg = make_model_config(Variant::Lstm1b, 2, 5, 8, 42);
  Model<float> a(cfg), b(cfg);
  CHECK(a.params().data == b.params().data);
  cfg.seed = 43;
  Model<float> c(cfg);
  CHECK(a.params().data != c.params().data);
}

TEST_CASE("forget-gate bias starts at one, other biases at zero") {
  Model<float> m(tiny_config(3, 4, {5}, {6}, 2, 1));
  for (std::size_t i = 0; i < m.params().entries.size(); ++i) {
    const auto& e = m.params().entries[i];
    if (e.dims.size() != 1) continue;
    auto v = m.params().view(i);
    float want = e.name.find("b.f") != std::string::npos ? 1.0f : 0.0f;
    for (auto x : v) CHECK(x == want);
  }
}

TEST_CASE("dense weights respect the xavier bound") {
  Model<float> m(tiny_config(2, 4, {4}, {4}, 2, 9));
  for (std::size_t i = 0; i < m.params().entries.size(); ++i) {
    const auto& e = m.params().entries[i];
    if (e.dims.size() != 2) continue;
    double bound =
        std::sqrt(6.0 / (static_cast<double>(e.dims[0]) + e.dims[1]));
    for (auto x : m.params().view(i)) {
      CHECK(x <= bound);
      CHECK(x >= -bound);
    }
  }
  // fan_in = fan_out = 4 -> bound sqrt(6/8)
  CHECK(std::sqrt(6.0 / 8.0) == Catch::Approx(0.8660254));
}

TEST_CASE("all-zero parameters are an LSTM fixed point") {
  Model<float> m(tiny_config(4, 3, {5}, {}, 2, 0));
  std::fill(m.params().data.begin(), m.params().data.end(), 0.0f);
  std::vector<float> h = m.lstm_forward(0, {0.3f, -1.0f, 2.0f,
                                            0.5f, 0.5f, 0.5f,
                                            1.f, 1.f, 1.f,
                                            0.f, 0.f, 0.f});
  for (auto v : h) CHECK(v == 0.0f);
}

TEST_CASE("empty sequence gives empty hidden output") {
  Model<float> m(tiny_config(4, 3, {5}, {}, 2, 0));
  CHECK(m.lstm_forward(0, {}).empty());
}

TEST_CASE("memoryless scalar cell approximates tanh(tanh(x))") {
  // hidden_dim 1: i ~ 1, f ~ 0, g = tanh(x), o ~ 1 -> h_t ~ tanh(tanh(x_t))
  ModelConfig cfg = tiny_config(3, 1, {1}, {}, 2, 0);
  Model<double> m(cfg);
  std::fill(m.params().data.begin(), m.params().data.end(), 0.0);
  auto set = [&m](const std::string& name, double v) {
    for (std::size_t i = 0; i < m.params().entries.size(); ++i)
      if (m.params().entries[i].name == name) m.params().view(i)[0] = v;
  };
  set("lstm0.b.i", 30.0);   // input gate saturated open
  set("lstm0.b.f", -30.0);  // forget gate closed
  set("lstm0.b.o", 30.0);   // output gate open
  set("lstm0.W.g", 1.0);    // g = tanh(x)

  std::vector<double> xs = {0.7, -0.3, 1.5};
  auto h = m.lstm_forward(0, xs);
  // independent 64-bit scalar recurrence
  for (std::size_t t = 0; t < xs.size(); ++t) {
    double expect = std::tanh(std::tanh(xs[t]));
    CHECK(h[t] == Catch::Approx(expect).margin(1e-9));
  }
}

TEST_CASE("softmax output is a probability vector") {
  auto cfg = make_model_config(Variant::Lstm1b, 2, 4, 6, 5);
  Model<float> m(cfg);
  rng::Engine eng(2);
  auto x = random_matrix(4 * 6, eng);
  auto p = m.forward(x, Mode::Infer);
  double sum = 0;
  for (auto v : p) {
    CHECK(v >= 0.0f);
    sum += v;
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-6));

  auto p2 = m.forward(x, Mode::Infer);
  CHECK(p == p2);  // infer mode is deterministic
}

TEST_CASE("all-zero parameters give uniform class probabilities") {
  Model<float> m(tiny_config(3, 4, {5}, {6}, 4, 0));
  std::fill(m.params().data.begin(), m.params().data.end(), 0.0f);
  rng::Engine eng(1);
  auto p = m.forward(random_matrix(3 * 4, eng), Mode::Infer);
  for (auto v : p) CHECK(v == Catch::Approx(0.25).margin(1e-7));
}

TEST_CASE("softmax is shift-invariant") {
  std::vector<float> logits = {1.0f, 2.5f, -0.5f};
  auto a = Model<float>::softmax(logits);
  for (auto& l : logits) l += 100.0f;
  auto b = Model<float>::softmax(logits);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == Catch::Approx(b[i]).margin(1e-6));
}

TEST_CASE("uniform output on two classes costs ln 2") {
  Model<float> m(tiny_config(2, 3, {2}, {}, 2, 0));
  std::fill(m.params().data.begin(), m.params().data.end(), 0.0f);
  rng::Engine eng(4);
  auto x = random_matrix(2 * 3, eng);
  std::vector<Sample> batch{{std::span<const float>(x), 0}};
  double loss = loss_and_grads(m, batch);
  CHECK(loss == Catch::Approx(std::log(2.0)).margin(1e-6));
}

TEST_CASE("analytic gradients match central finite differences") {
  rng::Engine eng(31);
  for (int rep = 0; rep < 8; ++rep) {
    bool two_layers = rep % 2;
    std::size_t seq = 1 + rng::uniform_int(eng, 4);
    std::size_t dim = 2 + rng::uniform_int(eng, 4);
    auto cfg = tiny_config(
        seq, dim,
        two_layers ? std::vector<std::size_t>{3, 2} : std::vector<std::size_t>{3},
        {4}, 2 + rng::uniform_int(eng, 2), eng());
    Model<double> m(cfg);

    std::vector<std::vector<float>> data;
    std::vector<Sample> batch;
    for (int s = 0; s < 3; ++s) {
      data.push_back(random_matrix(seq * dim, eng));
      batch.push_back({std::span<const float>(data.back()),
                       static_cast<int>(rng::uniform_int(eng, cfg.n_classes))});
    }
    loss_and_grads(m, batch);
    auto grads = m.grads();
    for (int probe = 0; probe < 25; ++probe) {
      std::size_t i = rng::uniform_int(eng, grads.size());
      double numeric = numeric_gradient(m, batch, i);
      double denom = std::max({std::abs(numeric), std::abs(grads[i]), 1e-6});
      CHECK(std::abs(grads[i] - numeric) / denom < 1e-4);
    }
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Model<float> m(tiny_config(2, 3, {2}, {2}, 2, 6));
  auto before = m.params().data;
  m.zero_grads();
  m.adam_step();
  CHECK(m.params().data == before);
}

TEST_CASE("adam first step with unit gradients moves by about lr") {
  Model<float> m(tiny_config(2, 3, {2}, {2}, 2, 6));
  auto before = m.params().data;
  std::fill(m.grads().begin(), m.grads().end(), 1.0f);
  m.adam_step();
  // hand-computed: m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps);
  // the margin allows for float rounding of parameters of magnitude ~1
  double expect = 0.001 / (1.0 + 1e-8);
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i] - m.params().data[i] ==
          Catch::Approx(expect).margin(2e-7));
}

TEST_CASE("dropout expectation matches infer activations") {
  // inverted dropout: E[mask * act] == act
  double rate = 0.2;
  rng::Engine eng(8);
  double acc = 0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    bool kept = rng::uniform_real(eng) >= rate;
    acc += kept ? 1.0 / (1.0 - rate) : 0.0;
  }
  CHECK(acc / n == Catch::Approx(1.0).epsilon(0.01));
}

TEST_CASE("training fits a linearly separable toy set") {
  auto cfg = tiny_config(3, 5, {8}, {8}, 2, 12);
  cfg.dropout_rate = 0.2;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.adam.lr = 0.01;
  Model<float> m(cfg);

  std::vector<std::vector<float>> data;
  std::vector<Sample> train_set;
  rng::Engine eng(3);
  for (int i = 0; i < 64; ++i) {
    int label = i % 2;
    std::vector<float> x(3 * 5, label ? 0.9f : 0.1f);
    for (auto& v : x)
      v += static_cast<float>(rng::uniform_real(eng) * 0.05);
    data.push_back(std::move(x));
    train_set.push_back({std::span<const float>(data.back()), label});
  }
  auto result = train(m, train_set, train_set);
  // judge the fit without dropout noise: inference-mode loss on the set
  CHECK(dataset_loss(m, train_set) < 0.01);
  CHECK(result.history.back().train_loss < 0.1);
}

TEST_CASE("training is deterministic given the seed") {
  auto make = [] {
    auto cfg = tiny_config(3, 4, {4}, {4}, 2, 21);
    cfg.dropout_rate = 0.2;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    return cfg;
  };
  std::vector<std::vector<float>> data;
  rng::Engine eng(13);
  std::vector<Sample> set;
  for (int i = 0; i < 16; ++i) {
    data.push_back(random_matrix(12, eng));
    set.push_back({std::span<const float>(data.back()), i % 2});
  }
  Model<float> a(make()), b(make());
  auto ra = train(a, set, set);
  auto rb = train(b, set, set);
  CHECK(a.params().data == b.params().data);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
    CHECK(ra.history[i].val_loss == rb.history[i].val_loss);
  }
}

TEST_CASE("checkpoint round-trip reproduces forward bit-exactly") {
  auto cfg = make_model_config(Variant::Lstm2b, 2, 4, 6, 77);
  Model<float> m(cfg);
  // push the model off its initial state
  std::vector<std::vector<float>> data;
  rng::Engine eng(5);
  std::vector<Sample> set;
  for (int i = 0; i < 8; ++i) {
    data.push_back(random_matrix(24, eng));
    set.push_back({std::span<const float>(data.back()), i % 2});
  }
  loss_and_grads(m, set);
  m.adam_step();

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_checkpoint(buf, m);
  auto loaded = load_checkpoint(buf);

  CHECK(loaded.params().data == m.params().data);
  CHECK(loaded.adam_m() == m.adam_m());
  CHECK(loaded.step() == m.step());
  auto x = random_matrix(24, eng);
  CHECK(loaded.forward(x, Mode::Infer) == m.forward(x, Mode::Infer));
}

TEST_CASE("variant table") {
  auto a = make_model_config(Variant::Lstm1a, 2, 4, 4, 0);
  CHECK(a.lstm_units == std::vector<std::size_t>{50});
  CHECK(a.fc_units == std::vector<std::size_t>{2500, 1250, 512, 256, 64, 16});
  auto b2 = make_model_config(Variant::Lstm2b, 2, 4, 4, 0);
  CHECK(b2.lstm_units == std::vector<std::size_t>{100, 50});
  CHECK(b2.fc_units == std::vector<std::size_t>{64, 16});
  CHECK(b2.dropout_rate == 0.20);
}

TEST_CASE("dimension mismatches are rejected") {
  Model<float> m(tiny_config(3, 4, {4}, {}, 2, 0));
  std::vector<float> wrong(11, 0.0f);
  CHECK_THROWS_AS(m.forward(wrong, Mode::Infer), DimensionMismatch);
}
