#include "rnnt/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace rnnt {

void ModelConfig::validate() const {
  auto need = [](std::size_t v, const char* name) {
    if (v < 1)
      throw std::invalid_argument(std::string("ModelConfig: ") + name +
                                  " must be >= 1");
  };
  need(input_dim, "input_dim");
  need(enc_layers, "enc_layers");
  need(enc_hidden, "enc_hidden");
  need(pred_layers, "pred_layers");
  need(pred_hidden, "pred_hidden");
  need(joint_dim, "joint_dim");
  need(num_labels, "num_labels");
  if (pred_hidden != enc_hidden)
    throw std::invalid_argument("ModelConfig: pred_hidden must equal enc_hidden");
}

namespace {

// Portable uniform draw in [-range, range): top 53 bits of the engine output.
class UniformSource {
 public:
  UniformSource(std::uint64_t seed, double range)
      : rng_(seed), range_(range) {}

  double next() {
    double u = (rng_() >> 11) * 0x1.0p-53;  // [0, 1)
    return (2.0 * u - 1.0) * range_;
  }

  void fill(Matrix& m) {
    for (double& v : m.data) v = next();
  }
  void fill(std::vector<double>& v) {
    for (double& x : v) x = next();
  }

 private:
  std::mt19937_64 rng_;
  double range_;
};

LstmLayerParams make_lstm_layer(std::size_t input, std::size_t hidden,
                                UniformSource& src) {
  LstmLayerParams p;
  p.w_input = Matrix(4 * hidden, input);
  p.w_hidden = Matrix(4 * hidden, hidden);
  p.bias.assign(4 * hidden, 0.0);
  src.fill(p.w_input);
  src.fill(p.w_hidden);
  src.fill(p.bias);
  return p;
}

}  // namespace

ModelWeights init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t D = config.enc_hidden;
  UniformSource src(seed, 0.5 / std::sqrt(static_cast<double>(D)));

  ModelWeights w;
  w.config = config;
  w.pred_embed = Matrix(config.vocab_size(), D);
  src.fill(w.pred_embed);
  for (std::size_t l = 0; l < config.enc_layers; ++l)
    w.enc_lstm.push_back(
        make_lstm_layer(l == 0 ? config.input_dim : D, D, src));
  for (std::size_t l = 0; l < config.pred_layers; ++l)
    w.pred_lstm.push_back(make_lstm_layer(D, D, src));
  w.joint_enc_proj = Matrix(config.joint_dim, D);
  w.joint_pred_proj = Matrix(config.joint_dim, D);
  w.joint_bias.assign(config.joint_dim, 0.0);
  w.output_proj = Matrix(config.vocab_size(), config.joint_dim);
  w.output_bias.assign(config.vocab_size(), 0.0);
  src.fill(w.joint_enc_proj);
  src.fill(w.joint_pred_proj);
  src.fill(w.joint_bias);
  src.fill(w.output_proj);
  src.fill(w.output_bias);
  return w;
}

EncState make_enc_state(const ModelConfig& config) {
  EncState s;
  s.h.assign(config.enc_layers, std::vector<double>(config.enc_hidden, 0.0));
  s.c.assign(config.enc_layers, std::vector<double>(config.enc_hidden, 0.0));
  return s;
}

PredState make_pred_state(const ModelConfig& config) {
  PredState s;
  s.h.assign(config.pred_layers, std::vector<double>(config.pred_hidden, 0.0));
  s.c.assign(config.pred_layers, std::vector<double>(config.pred_hidden, 0.0));
  s.last_h.assign(config.pred_hidden, 0.0);
  return s;
}

std::vector<double> encoder_step(const ModelWeights& w,
                                 std::span<const double> x_t, EncState& state) {
  if (x_t.size() != w.config.input_dim)
    throw std::invalid_argument("encoder_step: frame length != input_dim");
  const std::size_t D = w.config.enc_hidden;
  std::vector<double> in(x_t.begin(), x_t.end());
  std::vector<double> h(D), c(D);
  for (std::size_t l = 0; l < w.enc_lstm.size(); ++l) {
    lstm_cell_step(w.enc_lstm[l], in, state.h[l], state.c[l], h.data(),
                   c.data());
    state.h[l] = h;
    state.c[l] = c;
    in = h;
  }
  return in;
}

PredState predictor_step(const ModelWeights& w, int label,
                         const PredState& state) {
  if (label < 0 || static_cast<std::size_t>(label) >= w.config.vocab_size())
    throw std::invalid_argument("predictor_step: label out of range");
  const std::size_t D = w.config.pred_hidden;
  PredState next = state;
  const double* e = w.pred_embed.row(static_cast<std::size_t>(label));
  std::vector<double> in(e, e + D);
  std::vector<double> h(D), c(D);
  for (std::size_t l = 0; l < w.pred_lstm.size(); ++l) {
    lstm_cell_step(w.pred_lstm[l], in, state.h[l], state.c[l], h.data(),
                   c.data());
    next.h[l] = h;
    next.c[l] = c;
    in = h;
  }
  next.last_h = in;
  return next;
}

std::vector<PredState> predictor_step_batched(
    const ModelWeights& w, const std::vector<int>& labels,
    const std::vector<const PredState*>& states) {
  const std::size_t n = labels.size();
  if (states.size() != n)
    throw std::invalid_argument("predictor_step_batched: size mismatch");
  const std::size_t D = w.config.pred_hidden;
  std::vector<double> in(n * D), hp(n * D), cp(n * D), h(n * D), c(n * D);
  for (std::size_t j = 0; j < n; ++j) {
    int label = labels[j];
    if (label < 0 || static_cast<std::size_t>(label) >= w.config.vocab_size())
      throw std::invalid_argument("predictor_step_batched: label out of range");
    const double* e = w.pred_embed.row(static_cast<std::size_t>(label));
    std::copy(e, e + D, in.begin() + j * D);
  }
  std::vector<PredState> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = *states[j];
  for (std::size_t l = 0; l < w.pred_lstm.size(); ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      std::copy(states[j]->h[l].begin(), states[j]->h[l].end(),
                hp.begin() + j * D);
      std::copy(states[j]->c[l].begin(), states[j]->c[l].end(),
                cp.begin() + j * D);
    }
    lstm_cell_step_batched(w.pred_lstm[l], n, in.data(), hp.data(), cp.data(),
                           h.data(), c.data());
    for (std::size_t j = 0; j < n; ++j) {
      out[j].h[l].assign(h.begin() + j * D, h.begin() + (j + 1) * D);
      out[j].c[l].assign(c.begin() + j * D, c.begin() + (j + 1) * D);
    }
    in = h;
  }
  for (std::size_t j = 0; j < n; ++j)
    out[j].last_h.assign(in.begin() + j * D, in.begin() + (j + 1) * D);
  return out;
}

std::vector<double> joint_enc_projection(const ModelWeights& w,
                                         std::span<const double> h_enc) {
  return matvec(w.joint_enc_proj, h_enc);
}

std::vector<LogProb> posterior(const ModelWeights& w,
                               std::span<const double> h_enc,
                               const PredState& pred) {
  return posterior_from_proj(w, joint_enc_projection(w, h_enc), pred);
}

std::vector<LogProb> posterior_from_proj(const ModelWeights& w,
                                         std::span<const double> e,
                                         const PredState& pred) {
  const std::size_t J = w.config.joint_dim;
  std::vector<double> p(J), z(J);
  matvec_into(w.joint_pred_proj, pred.last_h, p.data());
  for (std::size_t j = 0; j < J; ++j)
    z[j] = std::tanh(e[j] + p[j] + w.joint_bias[j]);
  std::vector<double> logits(w.config.vocab_size());
  matvec_into(w.output_proj, z, logits.data());
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += w.output_bias[k];
  log_softmax_inplace(logits.data(), logits.size());
  return logits;
}

PosteriorMatrix batched_posterior(const ModelWeights& w,
                                  std::span<const double> h_enc,
                                  const std::vector<const PredState*>& preds) {
  if (preds.empty())
    throw std::invalid_argument("batched_posterior: empty batch");
  const std::size_t n = preds.size();
  const std::size_t J = w.config.joint_dim;
  const std::size_t V = w.config.vocab_size();

  // Encoder projection is shared across the whole batch.
  std::vector<double> e = joint_enc_projection(w, h_enc);

  // W_p rows stream once across the batch.
  std::vector<double> p(n * J);
  for (std::size_t j = 0; j < J; ++j) {
    const double* row = w.joint_pred_proj.row(j);
    for (std::size_t i = 0; i < n; ++i)
      p[i * J + j] =
          detail::dot(row, preds[i]->last_h.data(), w.joint_pred_proj.cols);
  }

  std::vector<double> z(n * J);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < J; ++j)
      z[i * J + j] = std::tanh(e[j] + p[i * J + j] + w.joint_bias[j]);

  PosteriorMatrix out;
  out.width = n;
  out.vocab = V;
  out.data.assign(n * V, 0.0);
  for (std::size_t k = 0; k < V; ++k) {
    const double* row = w.output_proj.row(k);
    const double b = w.output_bias[k];
    for (std::size_t i = 0; i < n; ++i)
      out.data[i * V + k] = detail::dot(row, z.data() + i * J, J) + b;
  }
  for (std::size_t i = 0; i < n; ++i)
    log_softmax_inplace(out.data.data() + i * V, V);
  return out;
}

}  // namespace rnnt
