#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rnnt/numerics.hpp"

using namespace rnnt;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n,
                               double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                     double scale = 1.0) {
  Matrix m(r, c);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (double& x : m.data) x = d(rng);
  return m;
}

// Straight scalar transliteration of the LSTM cell equations, used as an
// oracle for both the fused and the batched implementations.
void lstm_oracle(const LstmLayerParams& p, const std::vector<double>& x,
                 const std::vector<double>& h_prev,
                 const std::vector<double>& c_prev, std::vector<double>& h,
                 std::vector<double>& c) {
  const std::size_t H = p.hidden_size();
  auto gate = [&](std::size_t offset, std::size_t u) {
    double s = p.bias[offset + u];
    for (std::size_t i = 0; i < x.size(); ++i)
      s += p.w_input.at(offset + u, i) * x[i];
    for (std::size_t i = 0; i < H; ++i)
      s += p.w_hidden.at(offset + u, i) * h_prev[i];
    return s;
  };
  h.resize(H);
  c.resize(H);
  for (std::size_t u = 0; u < H; ++u) {
    double gi = 1.0 / (1.0 + std::exp(-gate(0, u)));
    double gf = 1.0 / (1.0 + std::exp(-gate(H, u)));
    double gg = std::tanh(gate(2 * H, u));
    double go = 1.0 / (1.0 + std::exp(-gate(3 * H, u)));
    c[u] = gf * c_prev[u] + gi * gg;
    h[u] = go * std::tanh(c[u]);
  }
}

LstmLayerParams random_lstm(std::mt19937_64& rng, std::size_t input,
                            std::size_t hidden) {
  LstmLayerParams p;
  p.w_input = random_matrix(rng, 4 * hidden, input, 0.3);
  p.w_hidden = random_matrix(rng, 4 * hidden, hidden, 0.3);
  p.bias = random_vec(rng, 4 * hidden, 0.3);
  return p;
}

}  // namespace

TEST_CASE("matvec identity and zero") {
  Matrix id(2, 2);
  id.at(0, 0) = 1.0;
  id.at(1, 1) = 1.0;
  std::vector<double> v{3.0, 4.0};
  CHECK(matvec(id, v) == std::vector<double>{3.0, 4.0});

  Matrix zero(2, 3);
  std::vector<double> ones{1.0, 1.0, 1.0};
  CHECK(matvec(zero, ones) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("matvec hand arithmetic") {
  Matrix m(2, 2);
  m.at(0, 0) = 1;
  m.at(0, 1) = 2;
  m.at(1, 0) = 3;
  m.at(1, 1) = 4;
  std::vector<double> v{1.0, 1.0};
  auto r = matvec(m, v);
  CHECK(r[0] == doctest::Approx(3.0));
  CHECK(r[1] == doctest::Approx(7.0));
}

TEST_CASE("matvec dimension mismatch is a hard error") {
  Matrix m(2, 3);
  std::vector<double> v{1.0, 2.0};
  CHECK_THROWS_AS(matvec(m, v), std::invalid_argument);
}

TEST_CASE("matvec linearity on random instances") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    Matrix m = random_matrix(rng, 5, 4);
    auto v = random_vec(rng, 4);
    auto w = random_vec(rng, 4);
    double a = random_vec(rng, 1)[0];
    std::vector<double> combo(4);
    for (std::size_t i = 0; i < 4; ++i) combo[i] = a * v[i] + w[i];
    auto lhs = matvec(m, combo);
    auto mv = matvec(m, v);
    auto mw = matvec(m, w);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(lhs[i] == doctest::Approx(a * mv[i] + mw[i]).epsilon(1e-10));
  }
}

TEST_CASE("log_softmax fixed values") {
  auto two = log_softmax(std::vector<double>{0.0, 0.0});
  CHECK(two[0] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  for (double c : {-3.0, 0.0, 17.5}) {
    auto four = log_softmax(std::vector<double>{c, c, c, c});
    for (double v : four)
      CHECK(v == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }

  // Direct-formula oracle for [1, 2, 3].
  std::vector<double> x{1.0, 2.0, 3.0};
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  auto got = log_softmax(x);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(got[i] == doctest::Approx(std::log(std::exp(x[i]) / z)).epsilon(1e-12));
}

TEST_CASE("log_softmax normalization and shift invariance") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 100; ++iter) {
    auto logits = random_vec(rng, 1 + iter % 7, 20.0);
    auto out = log_softmax(logits);
    double sum = 0.0;
    for (double v : out) sum += std::exp(v);
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    double shift = random_vec(rng, 1, 50.0)[0];
    auto shifted = logits;
    for (double& v : shifted) v += shift;
    auto out2 = log_softmax(shifted);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out2[i] == doctest::Approx(out[i]).epsilon(1e-12));
  }
}

TEST_CASE("log_softmax rejects empty input") {
  CHECK_THROWS_AS(log_softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("log_sum_exp fixed values") {
  double half = std::log(0.5);
  CHECK(log_sum_exp(std::vector<double>{half, half}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  double ninf = -std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(std::vector<double>{-1.25, ninf}) ==
        doctest::Approx(-1.25));
  CHECK(log_sum_exp(std::vector<double>{0.0, 0.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("log_sum_exp permutation invariance and max bound") {
  std::mt19937_64 rng(13);
  for (int iter = 0; iter < 100; ++iter) {
    auto terms = random_vec(rng, 2 + iter % 6, 30.0);
    double base = log_sum_exp(terms);
    CHECK(base >= *std::max_element(terms.begin(), terms.end()));
    std::shuffle(terms.begin(), terms.end(), rng);
    CHECK(log_sum_exp(terms) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("log_add matches log_sum_exp") {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 100; ++iter) {
    auto v = random_vec(rng, 2, 20.0);
    CHECK(log_add(v[0], v[1]) ==
          doctest::Approx(log_sum_exp(v)).epsilon(1e-12));
  }
}

TEST_CASE("lstm_cell_step zero parameters force zero output") {
  LstmLayerParams p;
  p.w_input = Matrix(4 * 3, 2);
  p.w_hidden = Matrix(4 * 3, 3);
  p.bias.assign(4 * 3, 0.0);
  std::vector<double> x{1.5, -2.0}, h0(3, 0.0), c0(3, 0.0), h(3), c(3);
  lstm_cell_step(p, x, h0, c0, h.data(), c.data());
  for (double v : h) CHECK(v == 0.0);
  for (double v : c) CHECK(v == 0.0);
}

TEST_CASE("lstm_cell_step large forget bias with nothing to remember") {
  LstmLayerParams p;
  p.w_input = Matrix(4 * 2, 2);
  p.w_hidden = Matrix(4 * 2, 2);
  p.bias.assign(4 * 2, 0.0);
  p.bias[2] = 20.0;  // forget gate wide open
  p.bias[3] = 20.0;
  std::vector<double> x(2, 0.0), h0(2, 0.0), c0(2, 0.0), h(2), c(2);
  lstm_cell_step(p, x, h0, c0, h.data(), c.data());
  for (double v : c) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("lstm_cell_step matches scalar transliteration oracle") {
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 20; ++iter) {
    std::size_t input = 2 + iter % 4, hidden = 3 + iter % 3;
    LstmLayerParams p = random_lstm(rng, input, hidden);
    auto x = random_vec(rng, input);
    auto h0 = random_vec(rng, hidden, 0.5);
    auto c0 = random_vec(rng, hidden, 0.5);
    std::vector<double> h(hidden), c(hidden), ho, co;
    lstm_cell_step(p, x, h0, c0, h.data(), c.data());
    lstm_oracle(p, x, h0, c0, ho, co);
    for (std::size_t u = 0; u < hidden; ++u) {
      CHECK(h[u] == doctest::Approx(ho[u]).epsilon(1e-12));
      CHECK(c[u] == doctest::Approx(co[u]).epsilon(1e-12));
    }
  }
}

TEST_CASE("lstm_cell_step rejects mismatched dimensions") {
  std::mt19937_64 rng(1);
  LstmLayerParams p = random_lstm(rng, 3, 4);
  std::vector<double> x(2), h0(4), c0(4), h(4), c(4);
  CHECK_THROWS_AS(lstm_cell_step(p, x, h0, c0, h.data(), c.data()),
                  std::invalid_argument);
}

TEST_CASE("batched lstm cell equals per-row cell") {
  std::mt19937_64 rng(99);
  const std::size_t input = 5, hidden = 4, n = 6;
  LstmLayerParams p = random_lstm(rng, input, hidden);
  std::vector<double> xs, hp, cp;
  for (std::size_t j = 0; j < n; ++j) {
    auto x = random_vec(rng, input);
    auto h0 = random_vec(rng, hidden, 0.5);
    auto c0 = random_vec(rng, hidden, 0.5);
    xs.insert(xs.end(), x.begin(), x.end());
    hp.insert(hp.end(), h0.begin(), h0.end());
    cp.insert(cp.end(), c0.begin(), c0.end());
  }
  std::vector<double> h(n * hidden), c(n * hidden);
  lstm_cell_step_batched(p, n, xs.data(), hp.data(), cp.data(), h.data(),
                         c.data());
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> hr(hidden), cr(hidden);
    lstm_cell_step(p,
                   std::span<const double>(xs.data() + j * input, input),
                   std::span<const double>(hp.data() + j * hidden, hidden),
                   std::span<const double>(cp.data() + j * hidden, hidden),
                   hr.data(), cr.data());
    for (std::size_t u = 0; u < hidden; ++u) {
      CHECK(h[j * hidden + u] == doctest::Approx(hr[u]).epsilon(1e-12));
      CHECK(c[j * hidden + u] == doctest::Approx(cr[u]).epsilon(1e-12));
    }
  }
}
