#include "rnnt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rnnt {

namespace {

using detail::dot;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> matvec(const Matrix& m, std::span<const double> v) {
  std::vector<double> out(m.rows);
  matvec_into(m, v, out.data());
  return out;
}

void matvec_into(const Matrix& m, std::span<const double> v, double* out) {
  if (v.size() != m.cols)
    throw std::invalid_argument("matvec: vector length " +
                                std::to_string(v.size()) +
                                " != matrix cols " + std::to_string(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    out[r] = dot(m.row(r), v.data(), m.cols);
}

std::vector<LogProb> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("log_softmax: empty input");
  std::vector<LogProb> out(logits.begin(), logits.end());
  log_softmax_inplace(out.data(), out.size());
  return out;
}

void log_softmax_inplace(double* x, std::size_t n) {
  if (n == 0) throw std::invalid_argument("log_softmax: empty input");
  double m = *std::max_element(x, x + n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - m);
  double lse = m + std::log(sum);
  for (std::size_t i = 0; i < n; ++i) x[i] -= lse;
}

LogProb log_sum_exp(std::span<const LogProb> terms) {
  if (terms.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double m = *std::max_element(terms.begin(), terms.end());
  if (std::isinf(m) && m < 0) return m;  // all zero probability
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - m);
  return m + std::log(sum);
}

LogProb log_add(LogProb a, LogProb b) {
  if (a < b) std::swap(a, b);
  if (std::isinf(a) && a < 0) return a;
  return a + std::log1p(std::exp(b - a));
}

void lstm_cell_step(const LstmLayerParams& p, std::span<const double> x,
                    std::span<const double> h_prev,
                    std::span<const double> c_prev, double* h_out,
                    double* c_out) {
  const std::size_t H = p.hidden_size();
  const std::size_t I = p.input_size();
  if (x.size() != I || h_prev.size() != H || c_prev.size() != H ||
      p.w_input.rows != 4 * H || p.w_hidden.rows != 4 * H ||
      p.w_hidden.cols != H)
    throw std::invalid_argument("lstm_cell_step: dimension mismatch");
  for (std::size_t u = 0; u < H; ++u) {
    double gi = sigmoid(dot(p.w_input.row(u), x.data(), I) +
                        dot(p.w_hidden.row(u), h_prev.data(), H) + p.bias[u]);
    double gf =
        sigmoid(dot(p.w_input.row(H + u), x.data(), I) +
                dot(p.w_hidden.row(H + u), h_prev.data(), H) + p.bias[H + u]);
    double gg = std::tanh(dot(p.w_input.row(2 * H + u), x.data(), I) +
                          dot(p.w_hidden.row(2 * H + u), h_prev.data(), H) +
                          p.bias[2 * H + u]);
    double go = sigmoid(dot(p.w_input.row(3 * H + u), x.data(), I) +
                        dot(p.w_hidden.row(3 * H + u), h_prev.data(), H) +
                        p.bias[3 * H + u]);
    double c = gf * c_prev[u] + gi * gg;
    c_out[u] = c;
    h_out[u] = go * std::tanh(c);
  }
}

void lstm_cell_step_batched(const LstmLayerParams& p, std::size_t n,
                            const double* xs, const double* h_prev,
                            const double* c_prev, double* h_out,
                            double* c_out) {
  const std::size_t H = p.hidden_size();
  const std::size_t I = p.input_size();
  // Gate pre-activations, (n, H) per gate; weight rows are read once for the
  // whole batch.
  std::vector<double> acc(4 * n * H);
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t u = 0; u < H; ++u) {
      const double* wi = p.w_input.row(g * H + u);
      const double* wh = p.w_hidden.row(g * H + u);
      const double b = p.bias[g * H + u];
      for (std::size_t j = 0; j < n; ++j) {
        acc[(g * n + j) * H + u] =
            dot(wi, xs + j * I, I) + dot(wh, h_prev + j * H, H) + b;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double* ai = &acc[(0 * n + j) * H];
    const double* af = &acc[(1 * n + j) * H];
    const double* ag = &acc[(2 * n + j) * H];
    const double* ao = &acc[(3 * n + j) * H];
    for (std::size_t u = 0; u < H; ++u) {
      double c = sigmoid(af[u]) * c_prev[j * H + u] +
                 sigmoid(ai[u]) * std::tanh(ag[u]);
      c_out[j * H + u] = c;
      h_out[j * H + u] = sigmoid(ao[u]) * std::tanh(c);
    }
  }
}

}  // namespace rnnt
