#pragma once

// Shared helpers for the test suites: small model configs, bias-only models
// with analytically known posteriors, and random feature frames.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rnnt/decode.hpp"
#include "rnnt/model.hpp"

namespace testutil {

inline rnnt::ModelConfig small_config(std::size_t F = 3, std::size_t D = 4,
                                      std::size_t K = 2,
                                      std::size_t enc_layers = 2,
                                      std::size_t pred_layers = 1) {
  rnnt::ModelConfig cfg;
  cfg.input_dim = F;
  cfg.enc_layers = enc_layers;
  cfg.enc_hidden = D;
  cfg.pred_layers = pred_layers;
  cfg.pred_hidden = D;
  cfg.joint_dim = D;
  cfg.num_labels = K;
  return cfg;
}

// All-zero weights except the output bias; the posterior is exactly
// log_softmax(bias) for every state and frame. `probs` need not be
// normalized; entry 0 is the blank.
inline rnnt::ModelWeights bias_model(const std::vector<double>& probs,
                                     std::size_t F = 3, std::size_t D = 4) {
  rnnt::ModelConfig cfg = small_config(F, D, probs.size() - 1);
  rnnt::ModelWeights w = rnnt::init_model(cfg, 1);
  auto zero = [](rnnt::Matrix& m) {
    std::fill(m.data.begin(), m.data.end(), 0.0);
  };
  zero(w.pred_embed);
  zero(w.joint_enc_proj);
  zero(w.joint_pred_proj);
  zero(w.output_proj);
  for (auto* layers : {&w.enc_lstm, &w.pred_lstm})
    for (rnnt::LstmLayerParams& l : *layers) {
      zero(l.w_input);
      zero(l.w_hidden);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
  std::fill(w.joint_bias.begin(), w.joint_bias.end(), 0.0);
  for (std::size_t k = 0; k < probs.size(); ++k)
    w.output_bias[k] = std::log(probs[k]);
  return w;
}

// Random model with a blank-favoring output bias and amplified logits.
// Tiny uniform init gives near-uniform posteriors; scaling the output layer
// spreads them out and the blank bias keeps hypotheses short, which is the
// regime trained acoustic models live in.
inline rnnt::ModelWeights shaped_model(const rnnt::ModelConfig& cfg,
                                       std::uint64_t seed, double blank_bias,
                                       double logit_scale) {
  rnnt::ModelWeights w = rnnt::init_model(cfg, seed);
  for (double& v : w.output_proj.data) v *= logit_scale;
  for (double& v : w.output_bias) v *= logit_scale;
  w.output_bias[rnnt::ModelConfig::kBlankId] += blank_bias;
  return w;
}

// Normalized posterior of a bias model, for hand-computed expectations.
inline std::vector<double> bias_posterior(const std::vector<double>& probs) {
  double sum = 0.0;
  for (double p : probs) sum += p;
  std::vector<double> out(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) out[k] = probs[k] / sum;
  return out;
}

inline rnnt::FeatureMatrix random_features(std::size_t frames, std::size_t dim,
                                           std::uint64_t seed) {
  rnnt::FeatureMatrix f;
  f.frames = frames;
  f.dim = dim;
  f.data.resize(frames * dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (double& v : f.data) v = d(rng);
  return f;
}

}  // namespace testutil
