#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnt/decode.hpp"
#include "rnnt/model.hpp"

namespace rnnt {

enum class FormatErrorKind {
  BadMagic,
  VersionMismatch,
  Truncation,
  TrailingBytes,
  BadValue,
};

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind(kind) {}
  FormatErrorKind kind;
};

// Model file: "RNTW", u16 version, seven u32 config fields
// (F, enc_layers, D, pred_layers, pred_hidden, joint_dim, |K|), then
// float32 little-endian parameter blocks in order: embedding, encoder
// layers bottom-up (per layer w_input, w_hidden, bias; gate rows i,f,g,o),
// predictor layers, W_e, W_p, b_z, W_z, b_s. No trailing bytes.
void write_model(const std::string& path, const ModelWeights& w);
ModelWeights read_model(const std::string& path);

// Feature file: "RNTF", u16 version, u32 T, u32 F, u32 audio_duration_ms,
// then T*F float32 little-endian values row-major.
void write_features(const std::string& path, const FeatureMatrix& feats,
                    std::uint32_t audio_duration_ms);
std::pair<FeatureMatrix, std::uint32_t> read_features(const std::string& path);

// Deterministic standard-normal feature matrix.
FeatureMatrix synth_features(std::size_t frames, std::size_t dim,
                             std::uint64_t seed);

// Transcript file: one line per utterance, "id<TAB>space-separated labels".
struct Transcript {
  std::string utterance_id;
  std::vector<int> labels;
};
std::vector<Transcript> read_transcripts(const std::string& path);
void write_transcripts(const std::string& path,
                       const std::vector<Transcript>& transcripts);

// Result log: line-delimited JSON records, append-only.
struct ResultRecord {
  std::string utterance_id;
  std::string decoder;
  std::size_t beam_width = 0;
  double alpha = -1;        // OSC only, else -1
  double expand_beam = -1;  // improved only, else -1
  double state_beam = -1;
  std::vector<int> labels;
  double raw_logp = 0.0;
  double score = 0.0;
  double wall_time_ms = 0.0;
  double audio_duration_ms = 0.0;
};
std::string format_result_record(const ResultRecord& r);
ResultRecord parse_result_record(const std::string& line);
std::vector<ResultRecord> read_result_log(const std::string& path);

}  // namespace rnnt
