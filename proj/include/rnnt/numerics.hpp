#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rnnt {

// Log-domain probability. Range [-inf, 0]; -inf encodes probability zero.
using LogProb = double;

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

namespace detail {

// Dot product with eight strided partial sums. The fixed reduction tree
// keeps results deterministic while letting the compiler vectorize; every
// kernel in the library funnels through this one definition, so batched and
// per-row paths agree bitwise.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    s4 += a[i + 4] * b[i + 4];
    s5 += a[i + 5] * b[i + 5];
    s6 += a[i + 6] * b[i + 6];
    s7 += a[i + 7] * b[i + 7];
  }
  double tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))) + tail;
}

}  // namespace detail

// y = m * v
std::vector<double> matvec(const Matrix& m, std::span<const double> v);
void matvec_into(const Matrix& m, std::span<const double> v, double* out);

// out[i] = x[i] - logsumexp(x)
std::vector<LogProb> log_softmax(std::span<const double> logits);
void log_softmax_inplace(double* x, std::size_t n);

// ln sum exp(terms), max-shifted.
LogProb log_sum_exp(std::span<const LogProb> terms);
LogProb log_add(LogProb a, LogProb b);

// Parameters of one LSTM layer. Rows of w_input/w_hidden are grouped by gate
// in the order i, f, g, o (hidden units per gate = bias.size() / 4).
struct LstmLayerParams {
  Matrix w_input;   // (4H, I)
  Matrix w_hidden;  // (4H, H)
  std::vector<double> bias;  // (4H)

  std::size_t hidden_size() const { return bias.size() / 4; }
  std::size_t input_size() const { return w_input.cols; }
};

// Standard LSTM cell: i,f,o = sigmoid, g = tanh, c = f.c_prev + i.g,
// h = o.tanh(c). Writes h and c (length H each).
void lstm_cell_step(const LstmLayerParams& p, std::span<const double> x,
                    std::span<const double> h_prev,
                    std::span<const double> c_prev, double* h_out,
                    double* c_out);

// Same cell over a batch of n rows. xs is (n, I) row-major, states (n, H).
// Streams each weight row once across the batch; per-row arithmetic is
// identical to lstm_cell_step.
void lstm_cell_step_batched(const LstmLayerParams& p, std::size_t n,
                            const double* xs, const double* h_prev,
                            const double* c_prev, double* h_out,
                            double* c_out);

}  // namespace rnnt
