#pragma once

#include <cstdint>
#include <vector>

#include "rnnt/numerics.hpp"

namespace rnnt {

struct ModelConfig {
  std::size_t input_dim = 0;    // F
  std::size_t enc_layers = 0;
  std::size_t enc_hidden = 0;   // D
  std::size_t pred_layers = 0;
  std::size_t pred_hidden = 0;  // must equal enc_hidden
  std::size_t joint_dim = 0;
  std::size_t num_labels = 0;   // |K|, non-blank labels
  static constexpr int kBlankId = 0;

  std::size_t vocab_size() const { return num_labels + 1; }
  void validate() const;  // throws std::invalid_argument
};

// All parameters of the encoder, prediction and joint networks. Immutable
// after construction.
struct ModelWeights {
  ModelConfig config;
  std::vector<LstmLayerParams> enc_lstm;
  std::vector<LstmLayerParams> pred_lstm;
  Matrix pred_embed;          // (|K|+1, D); row kBlankId doubles as start symbol
  Matrix joint_enc_proj;      // W_e, (joint_dim, D)
  Matrix joint_pred_proj;     // W_p, (joint_dim, D)
  std::vector<double> joint_bias;   // b_z, (joint_dim)
  Matrix output_proj;         // W_z, (|K|+1, joint_dim)
  std::vector<double> output_bias;  // b_s, (|K|+1)
};

struct EncState {
  // Per-layer (h, c), each of size enc_hidden.
  std::vector<std::vector<double>> h;
  std::vector<std::vector<double>> c;
};

struct PredState {
  std::vector<std::vector<double>> h;
  std::vector<std::vector<double>> c;
  // Exposed top-layer hidden output, h^pre for the current label history.
  std::vector<double> last_h;
};

// One row of log posteriors per hypothesis, each of length |K|+1.
struct PosteriorMatrix {
  std::size_t width = 0;       // W
  std::size_t vocab = 0;       // |K|+1
  std::vector<LogProb> data;   // row-major (W, |K|+1)

  const LogProb* row(std::size_t i) const { return data.data() + i * vocab; }
};

// Deterministic synthetic weights, uniform in [-0.5/sqrt(D), 0.5/sqrt(D)].
ModelWeights init_model(const ModelConfig& config, std::uint64_t seed);

EncState make_enc_state(const ModelConfig& config);
PredState make_pred_state(const ModelConfig& config);

// One frame through the stacked encoder LSTMs; returns the top-layer hidden
// output and advances state in place.
std::vector<double> encoder_step(const ModelWeights& w,
                                 std::span<const double> x_t, EncState& state);

// Advances the prediction network by one label. The start step is
// predictor_step(w, kBlankId, zero state).
PredState predictor_step(const ModelWeights& w, int label,
                         const PredState& state);

// Advances n prediction states by one label each. Row-identical to
// per-state predictor_step.
std::vector<PredState> predictor_step_batched(
    const ModelWeights& w, const std::vector<int>& labels,
    const std::vector<const PredState*>& states);

// log softmax(W_z tanh(W_e h_enc + W_p h_pre + b_z) + b_s), length |K|+1.
std::vector<LogProb> posterior(const ModelWeights& w,
                               std::span<const double> h_enc,
                               const PredState& pred);

// W_e h_enc, constant across every posterior evaluated at the same frame.
std::vector<double> joint_enc_projection(const ModelWeights& w,
                                         std::span<const double> h_enc);

// posterior() with the encoder projection hoisted out; bitwise identical to
// posterior(w, h_enc, pred) when enc_proj = joint_enc_projection(w, h_enc).
std::vector<LogProb> posterior_from_proj(const ModelWeights& w,
                                         std::span<const double> enc_proj,
                                         const PredState& pred);

// Row i equals posterior(w, h_enc, *preds[i]); the encoder projection is
// computed once and shared across rows.
PosteriorMatrix batched_posterior(const ModelWeights& w,
                                  std::span<const double> h_enc,
                                  const std::vector<const PredState*>& preds);

}  // namespace rnnt
