#include "rnnt/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace rnnt {

namespace {

constexpr std::uint16_t kFormatVersion = 1;
constexpr char kModelMagic[4] = {'R', 'N', 'T', 'W'};
constexpr char kFeatureMagic[4] = {'R', 'N', 'T', 'F'};

// Largest accepted value for any header dimension; fuzzers get a BadValue
// instead of an allocation attempt.
constexpr std::uint32_t kMaxDim = 1u << 24;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void f32_block(const std::vector<double>& values) {
    std::vector<float> buf(values.begin(), values.end());
    // Host is little-endian x86; values are written verbatim.
    bytes(buf.data(), buf.size() * sizeof(float));
  }
  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(buf, sizeof(T));
  }
  std::ofstream out_;
};

class Reader {
 public:
  Reader(const std::string& path, const char magic[4], const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    data_ = ss.str();
    if (data_.size() < 4 || std::memcmp(data_.data(), magic, 4) != 0)
      throw FormatError(FormatErrorKind::BadMagic,
                        std::string("bad magic: not a ") + what + " file");
    pos_ = 4;
    std::uint16_t version = u16("version");
    if (version != kFormatVersion)
      throw FormatError(FormatErrorKind::VersionMismatch,
                        "version mismatch: got " + std::to_string(version) +
                            ", expected " + std::to_string(kFormatVersion));
  }

  std::uint16_t u16(const char* field) { return le<std::uint16_t>(field); }
  std::uint32_t u32(const char* field) { return le<std::uint32_t>(field); }

  void f32_block(std::vector<double>& out, std::size_t count,
                 const std::string& block) {
    if (remaining() / sizeof(float) < count)
      throw FormatError(FormatErrorKind::Truncation,
                        "truncated while reading block '" + block + "'");
    out.resize(count);
    const unsigned char* p =
        reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, p + i * sizeof(float), sizeof(float));
      out[i] = static_cast<double>(f);
    }
    pos_ += count * sizeof(float);
  }

  void expect_end() {
    if (pos_ != data_.size())
      throw FormatError(FormatErrorKind::TrailingBytes,
                        "trailing bytes after payload: " +
                            std::to_string(data_.size() - pos_));
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  template <typename T>
  T le(const char* field) {
    if (remaining() < sizeof(T))
      throw FormatError(FormatErrorKind::Truncation,
                        std::string("truncated while reading header field '") +
                            field + "'");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string data_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_dim(std::size_t v, const char* name) {
  if (v == 0 || v > kMaxDim)
    throw FormatError(FormatErrorKind::BadValue,
                      std::string("dimension out of range: ") + name);
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_model(const std::string& path, const ModelWeights& w) {
  w.config.validate();
  Writer out(path);
  out.bytes(kModelMagic, 4);
  out.u16(kFormatVersion);
  out.u32(checked_dim(w.config.input_dim, "input_dim"));
  out.u32(checked_dim(w.config.enc_layers, "enc_layers"));
  out.u32(checked_dim(w.config.enc_hidden, "enc_hidden"));
  out.u32(checked_dim(w.config.pred_layers, "pred_layers"));
  out.u32(checked_dim(w.config.pred_hidden, "pred_hidden"));
  out.u32(checked_dim(w.config.joint_dim, "joint_dim"));
  out.u32(checked_dim(w.config.num_labels, "num_labels"));
  out.f32_block(w.pred_embed.data);
  for (const LstmLayerParams& l : w.enc_lstm) {
    out.f32_block(l.w_input.data);
    out.f32_block(l.w_hidden.data);
    out.f32_block(l.bias);
  }
  for (const LstmLayerParams& l : w.pred_lstm) {
    out.f32_block(l.w_input.data);
    out.f32_block(l.w_hidden.data);
    out.f32_block(l.bias);
  }
  out.f32_block(w.joint_enc_proj.data);
  out.f32_block(w.joint_pred_proj.data);
  out.f32_block(w.joint_bias);
  out.f32_block(w.output_proj.data);
  out.f32_block(w.output_bias);
  out.close();
}

ModelWeights read_model(const std::string& path) {
  Reader in(path, kModelMagic, "model");
  ModelConfig cfg;
  cfg.input_dim = in.u32("input_dim");
  cfg.enc_layers = in.u32("enc_layers");
  cfg.enc_hidden = in.u32("enc_hidden");
  cfg.pred_layers = in.u32("pred_layers");
  cfg.pred_hidden = in.u32("pred_hidden");
  cfg.joint_dim = in.u32("joint_dim");
  cfg.num_labels = in.u32("num_labels");
  for (std::size_t v : {cfg.input_dim, cfg.enc_layers, cfg.enc_hidden,
                        cfg.pred_layers, cfg.pred_hidden, cfg.joint_dim,
                        cfg.num_labels})
    if (v == 0 || v > kMaxDim)
      throw FormatError(FormatErrorKind::BadValue,
                        "config dimension out of range");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrorKind::BadValue, e.what());
  }

  const std::size_t D = cfg.enc_hidden;
  ModelWeights w;
  w.config = cfg;
  auto read_matrix = [&](Matrix& m, std::size_t rows, std::size_t cols,
                         const std::string& block) {
    m.rows = rows;
    m.cols = cols;
    in.f32_block(m.data, rows * cols, block);
  };
  read_matrix(w.pred_embed, cfg.vocab_size(), D, "embedding");
  auto read_lstm = [&](std::vector<LstmLayerParams>& layers, std::size_t count,
                       std::size_t input0, const std::string& name) {
    for (std::size_t l = 0; l < count; ++l) {
      LstmLayerParams p;
      std::size_t input = l == 0 ? input0 : D;
      std::string block = name + "[" + std::to_string(l) + "]";
      read_matrix(p.w_input, 4 * D, input, block + ".w_input");
      read_matrix(p.w_hidden, 4 * D, D, block + ".w_hidden");
      in.f32_block(p.bias, 4 * D, block + ".bias");
      layers.push_back(std::move(p));
    }
  };
  read_lstm(w.enc_lstm, cfg.enc_layers, cfg.input_dim, "encoder");
  read_lstm(w.pred_lstm, cfg.pred_layers, D, "predictor");
  read_matrix(w.joint_enc_proj, cfg.joint_dim, D, "W_e");
  read_matrix(w.joint_pred_proj, cfg.joint_dim, D, "W_p");
  in.f32_block(w.joint_bias, cfg.joint_dim, "b_z");
  read_matrix(w.output_proj, cfg.vocab_size(), cfg.joint_dim, "W_z");
  in.f32_block(w.output_bias, cfg.vocab_size(), "b_s");
  in.expect_end();
  return w;
}

void write_features(const std::string& path, const FeatureMatrix& feats,
                    std::uint32_t audio_duration_ms) {
  if (feats.frames == 0)
    throw std::invalid_argument("write_features: empty utterance");
  if (feats.dim == 0) throw std::invalid_argument("write_features: zero dim");
  if (audio_duration_ms == 0)
    throw std::invalid_argument("write_features: zero duration");
  Writer out(path);
  out.bytes(kFeatureMagic, 4);
  out.u16(kFormatVersion);
  out.u32(checked_dim(feats.frames, "frames"));
  out.u32(checked_dim(feats.dim, "dim"));
  out.u32(audio_duration_ms);
  out.f32_block(feats.data);
  out.close();
}

std::pair<FeatureMatrix, std::uint32_t> read_features(const std::string& path) {
  Reader in(path, kFeatureMagic, "feature");
  FeatureMatrix f;
  f.frames = in.u32("frames");
  f.dim = in.u32("dim");
  std::uint32_t duration_ms = in.u32("audio_duration_ms");
  if (f.frames == 0 || f.frames > kMaxDim || f.dim == 0 || f.dim > kMaxDim)
    throw FormatError(FormatErrorKind::BadValue, "frame dimensions out of range");
  if (duration_ms == 0)
    throw FormatError(FormatErrorKind::BadValue, "zero audio duration");
  in.f32_block(f.data, f.frames * f.dim, "features");
  in.expect_end();
  return {std::move(f), duration_ms};
}

FeatureMatrix synth_features(std::size_t frames, std::size_t dim,
                             std::uint64_t seed) {
  if (frames < 1 || dim < 1)
    throw std::invalid_argument("synth_features: frames and dim must be >= 1");
  FeatureMatrix f;
  f.frames = frames;
  f.dim = dim;
  f.data.resize(frames * dim);
  std::mt19937_64 rng(seed);
  auto uniform01 = [&rng] { return ((rng() >> 11) + 1.0) * 0x1.0p-53; };
  // Box-Muller keeps the stream portable across standard libraries.
  for (std::size_t i = 0; i < f.data.size(); i += 2) {
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    f.data[i] = r * std::cos(2.0 * M_PI * u2);
    if (i + 1 < f.data.size()) f.data[i + 1] = r * std::sin(2.0 * M_PI * u2);
  }
  return f;
}

std::vector<Transcript> read_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<Transcript> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(FormatErrorKind::BadValue,
                        "transcript line " + std::to_string(lineno) +
                            ": missing tab separator");
    Transcript t;
    t.utterance_id = line.substr(0, tab);
    std::istringstream labels(line.substr(tab + 1));
    int v;
    while (labels >> v) {
      if (v < 1)
        throw FormatError(FormatErrorKind::BadValue,
                          "transcript line " + std::to_string(lineno) +
                              ": label must be >= 1");
      t.labels.push_back(v);
    }
    if (!labels.eof())
      throw FormatError(FormatErrorKind::BadValue,
                        "transcript line " + std::to_string(lineno) +
                            ": malformed label list");
    out.push_back(std::move(t));
  }
  return out;
}

void write_transcripts(const std::string& path,
                       const std::vector<Transcript>& transcripts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const Transcript& t : transcripts) {
    out << t.utterance_id << '\t';
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
      if (i) out << ' ';
      out << t.labels[i];
    }
    out << '\n';
  }
}

std::string format_result_record(const ResultRecord& r) {
  nlohmann::json j;
  j["utterance_id"] = r.utterance_id;
  j["decoder"] = r.decoder;
  j["beam_width"] = r.beam_width;
  if (r.alpha >= 0) j["alpha"] = r.alpha;
  if (r.expand_beam >= 0) j["expand_beam"] = r.expand_beam;
  if (r.state_beam >= 0) j["state_beam"] = r.state_beam;
  j["labels"] = r.labels;
  j["raw_logp"] = r.raw_logp;
  j["score"] = r.score;
  j["wall_time_ms"] = r.wall_time_ms;
  j["audio_duration_ms"] = r.audio_duration_ms;
  return j.dump();
}

ResultRecord parse_result_record(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  ResultRecord r;
  r.utterance_id = j.at("utterance_id").get<std::string>();
  r.decoder = j.at("decoder").get<std::string>();
  r.beam_width = j.at("beam_width").get<std::size_t>();
  r.alpha = j.value("alpha", -1.0);
  r.expand_beam = j.value("expand_beam", -1.0);
  r.state_beam = j.value("state_beam", -1.0);
  r.labels = j.at("labels").get<std::vector<int>>();
  r.raw_logp = j.at("raw_logp").get<double>();
  r.score = j.at("score").get<double>();
  r.wall_time_ms = j.at("wall_time_ms").get<double>();
  r.audio_duration_ms = j.at("audio_duration_ms").get<double>();
  return r;
}

std::vector<ResultRecord> read_result_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<ResultRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_result_record(line));
  }
  return out;
}

}  // namespace rnnt
