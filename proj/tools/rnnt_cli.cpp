// Command-line driver: model generation, decoding, benchmarking, search
// statistics, cross-decoder comparison, and evaluation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "rnnt/decode.hpp"
#include "rnnt/io.hpp"
#include "rnnt/metrics.hpp"
#include "rnnt/model.hpp"

namespace {

using namespace rnnt;

constexpr int kExitUsage = 2;
constexpr int kExitBudget = 3;
constexpr int kExitDataMismatch = 4;

std::string utterance_id_from_path(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

struct DecoderConfig {
  std::string name = "osc";  // greedy | ref | improved | osc | osc-unbatched | oracle
  std::size_t beam = 4;
  std::size_t alpha = 1;
  double expand_beam = 2.3;
  double state_beam = 4.6;
  std::size_t max_len = 8;  // oracle only
  bool record_beams = false;
};

DecodeOutput run_decoder(const ModelWeights& w, const FeatureMatrix& feats,
                         const DecoderConfig& cfg) {
  if (cfg.name == "greedy") return decode_greedy(w, feats);
  if (cfg.name == "ref") {
    ReferenceOptions opts;
    opts.record_beams = cfg.record_beams;
    return decode_reference(w, feats, cfg.beam, opts);
  }
  if (cfg.name == "improved") {
    ImprovedParams p;
    p.beam_width = cfg.beam;
    p.expand_beam = cfg.expand_beam;
    p.state_beam = cfg.state_beam;
    return decode_improved(w, feats, p);
  }
  if (cfg.name == "osc" || cfg.name == "osc-unbatched") {
    OscParams p;
    p.beam_width = cfg.beam;
    p.alpha = cfg.alpha;
    p.record_beams = cfg.record_beams;
    return cfg.name == "osc" ? decode_osc(w, feats, p)
                             : decode_osc_unbatched(w, feats, p);
  }
  if (cfg.name == "oracle") {
    auto begin = std::chrono::steady_clock::now();
    ExhaustiveResult r = exhaustive_decode(w, feats, cfg.max_len);
    DecodeOutput out;
    out.labels = r.labels;
    out.score = r.normalized_score;
    out.raw_logp = r.raw_logp;
    out.frames_processed = feats.frames;
    out.wall_time_s = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - begin)
                          .count();
    return out;
  }
  throw CLI::ValidationError("unknown decoder: " + cfg.name);
}

ResultRecord make_record(const std::string& id, const DecoderConfig& cfg,
                         const DecodeOutput& out, double audio_ms) {
  ResultRecord r;
  r.utterance_id = id;
  r.decoder = cfg.name;
  r.beam_width = cfg.name == "greedy" ? 1 : cfg.beam;
  if (cfg.name == "osc" || cfg.name == "osc-unbatched")
    r.alpha = static_cast<double>(cfg.alpha);
  if (cfg.name == "improved") {
    r.expand_beam = cfg.expand_beam;
    r.state_beam = cfg.state_beam;
  }
  r.labels = out.labels;
  r.raw_logp = out.raw_logp;
  r.score = out.score;
  r.wall_time_ms = out.wall_time_s * 1e3;
  r.audio_duration_ms = audio_ms;
  return r;
}

ModelConfig preset_config(const std::string& name) {
  ModelConfig cfg;
  if (name == "timit") {
    cfg.input_dim = 40;
    cfg.enc_layers = 3;
    cfg.enc_hidden = 256;
    cfg.pred_layers = 1;
    cfg.pred_hidden = 256;
    cfg.joint_dim = 256;
    cfg.num_labels = 61;
  } else if (name == "librispeech") {
    cfg.input_dim = 80;
    cfg.enc_layers = 5;
    cfg.enc_hidden = 512;
    cfg.pred_layers = 2;
    cfg.pred_hidden = 512;
    cfg.joint_dim = 512;
    cfg.num_labels = 256;
  } else {
    throw CLI::ValidationError("unknown preset: " + name);
  }
  return cfg;
}

int cmd_gen_model(const std::string& preset, ModelConfig cfg,
                  std::uint64_t seed, double blank_bias, double logit_scale,
                  const std::string& out_path) {
  if (!preset.empty()) cfg = preset_config(preset);
  cfg.validate();
  ModelWeights w = init_model(cfg, seed);
  if (logit_scale != 1.0) {
    for (double& v : w.output_proj.data) v *= logit_scale;
    for (double& v : w.output_bias) v *= logit_scale;
  }
  w.output_bias[ModelConfig::kBlankId] += blank_bias;
  write_model(out_path, w);
  std::cout << "wrote " << out_path << ": F=" << cfg.input_dim << " enc "
            << cfg.enc_layers << "x" << cfg.enc_hidden << " pred "
            << cfg.pred_layers << "x" << cfg.pred_hidden << " joint "
            << cfg.joint_dim << " labels " << cfg.num_labels << " seed "
            << seed << "\n";
  return 0;
}

int cmd_decode(const std::string& model_path,
               const std::vector<std::string>& feature_paths,
               const DecoderConfig& cfg, const std::string& out_path) {
  ModelWeights w = read_model(model_path);
  std::ofstream log;
  if (!out_path.empty()) {
    log.open(out_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot open log: " + out_path);
  }
  for (const std::string& path : feature_paths) {
    auto [feats, duration_ms] = read_features(path);
    DecodeOutput out;
    try {
      out = run_decoder(w, feats, cfg);
    } catch (const BudgetExceededError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitBudget;
    }
    ResultRecord rec =
        make_record(utterance_id_from_path(path), cfg, out, duration_ms);
    std::string line = format_result_record(rec);
    if (log.is_open())
      log << line << "\n";
    else
      std::cout << line << "\n";
  }
  return 0;
}

struct BenchCell {
  std::string decoder;
  std::size_t beam = 0;
  std::optional<std::size_t> alpha;
  std::vector<double> rtfs;
  double total_time_s = 0.0;

  std::string key() const {
    std::string k = decoder + "-W" + std::to_string(beam);
    if (alpha) k += "-a" + std::to_string(*alpha);
    return k;
  }
};

int cmd_bench(const std::string& model_path,
              const std::vector<std::string>& feature_paths,
              std::vector<std::string> decoders, std::vector<std::size_t> beams,
              std::vector<std::size_t> alphas, std::size_t repeats, bool warmup,
              const std::string& report_path) {
  ModelWeights w = read_model(model_path);
  std::vector<std::pair<FeatureMatrix, double>> corpus;
  for (const std::string& path : feature_paths) {
    auto [feats, duration_ms] = read_features(path);
    corpus.emplace_back(std::move(feats), duration_ms / 1e3);
  }

  std::vector<BenchCell> cells;
  for (const std::string& dec : decoders) {
    for (std::size_t beam : beams) {
      std::vector<std::optional<std::size_t>> cell_alphas;
      if (dec == "osc")
        for (std::size_t a : alphas) cell_alphas.push_back(a);
      else
        cell_alphas.push_back(std::nullopt);
      for (auto alpha : cell_alphas) {
        BenchCell cell;
        cell.decoder = dec;
        cell.beam = beam;
        cell.alpha = alpha;
        DecoderConfig cfg;
        cfg.name = dec;
        cfg.beam = beam;
        if (alpha) cfg.alpha = *alpha;

        if (warmup && !corpus.empty())
          run_decoder(w, corpus.front().first, cfg);
        for (auto& [feats, audio_s] : corpus) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t r = 0; r < repeats; ++r) {
            DecodeOutput out = run_decoder(w, feats, cfg);
            best = std::min(best, out.wall_time_s);
          }
          cell.total_time_s += best;
          cell.rtfs.push_back(best / audio_s);
        }
        std::cerr << "bench " << cell.key() << ": RT-90 "
                  << percentile(cell.rtfs, 90.0) << "\n";
        cells.push_back(std::move(cell));
      }
    }
  }

  nlohmann::json report;
  report["utterances"] = corpus.size();
  report["repeats"] = repeats;
  nlohmann::json jcells = nlohmann::json::array();
  for (const BenchCell& c : cells) {
    double mean = 0.0;
    for (double v : c.rtfs) mean += v;
    mean /= static_cast<double>(c.rtfs.size());
    nlohmann::json jc;
    jc["config"] = c.key();
    jc["decoder"] = c.decoder;
    jc["beam"] = c.beam;
    if (c.alpha) jc["alpha"] = *c.alpha;
    jc["rt90"] = percentile(c.rtfs, 90.0);
    jc["mean_rtf"] = mean;
    jc["total_time_s"] = c.total_time_s;
    jcells.push_back(jc);
  }
  report["cells"] = jcells;

  // W-doubling ratios per decoder (and per alpha for OSC).
  nlohmann::json ratios = nlohmann::json::array();
  for (const BenchCell& a : cells) {
    for (const BenchCell& b : cells) {
      if (a.decoder != b.decoder || a.alpha != b.alpha) continue;
      if (b.beam != 2 * a.beam) continue;
      nlohmann::json jr;
      jr["decoder"] = a.decoder;
      if (a.alpha) jr["alpha"] = *a.alpha;
      jr["from_w"] = a.beam;
      jr["to_w"] = b.beam;
      jr["rt90_ratio"] =
          percentile(b.rtfs, 90.0) / percentile(a.rtfs, 90.0);
      ratios.push_back(jr);
    }
  }
  report["w_doubling_ratios"] = ratios;

  std::string text = report.dump(2);
  if (report_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(report_path);
    out << text << "\n";
    std::cout << "wrote " << report_path << "\n";
  }
  return 0;
}

int cmd_stats(const std::string& model_path,
              const std::vector<std::string>& feature_paths, std::size_t beam) {
  ModelWeights w = read_model(model_path);
  std::vector<StepStats> all;
  for (const std::string& path : feature_paths) {
    auto [feats, duration_ms] = read_features(path);
    (void)duration_ms;
    DecodeOutput out = decode_reference_instrumented(w, feats, beam);
    if (out.step_stats)
      all.insert(all.end(), out.step_stats->begin(), out.step_stats->end());
  }
  StatsRatioTable table = aggregate_step_stats(all);
  std::cout << "Expansion search (ratio %, zero-expansion steps excluded: "
            << table.zero_expansions << " observations)\n";
  if (table.expansion_pct.empty())
    std::cout << "  (no expansions observed)\n";
  for (const auto& [k, pct] : table.expansion_pct)
    std::cout << "  " << k << "\t" << std::fixed << std::setprecision(2) << pct
              << "\n";
  std::cout << "Prefix search (ratio %)\n";
  if (table.prefix_pct.empty()) std::cout << "  (no prefix pairs observed)\n";
  for (const auto& [k, pct] : table.prefix_pct)
    std::cout << "  " << k << "\t" << std::fixed << std::setprecision(2) << pct
              << "\n";
  return 0;
}

int cmd_compare(const std::string& model_path,
                const std::vector<std::string>& feature_paths,
                DecoderConfig a, DecoderConfig b, bool trace) {
  ModelWeights w = read_model(model_path);
  a.record_beams = trace;
  b.record_beams = trace;
  std::size_t agree = 0, total = 0;
  for (const std::string& path : feature_paths) {
    auto [feats, duration_ms] = read_features(path);
    (void)duration_ms;
    DecodeOutput oa = run_decoder(w, feats, a);
    DecodeOutput ob = run_decoder(w, feats, b);
    ++total;
    bool same = oa.labels == ob.labels;
    if (same) ++agree;
    std::cout << utterance_id_from_path(path) << ": labels "
              << (same ? "agree" : "differ") << ", logp delta "
              << std::abs(oa.raw_logp - ob.raw_logp);
    if (!same && trace) {
      std::size_t frames = std::min(oa.beam_trace.size(), ob.beam_trace.size());
      for (std::size_t t = 0; t < frames; ++t) {
        if (oa.beam_trace[t].labels != ob.beam_trace[t].labels) {
          std::cout << ", first divergent frame " << t;
          break;
        }
      }
    }
    std::cout << "\n";
  }
  std::cout << "agreement: " << agree << "/" << total << "\n";
  return 0;
}

int cmd_eval(const std::string& results_path,
             const std::string& transcripts_path) {
  std::vector<ResultRecord> results = read_result_log(results_path);
  std::vector<Transcript> transcripts = read_transcripts(transcripts_path);
  std::map<std::string, const Transcript*> by_id;
  for (const Transcript& t : transcripts) by_id[t.utterance_id] = &t;

  std::vector<std::string> unmatched;
  std::uint64_t edits = 0, ref_len = 0;
  std::vector<double> rtfs;
  bool empty_ref_seen = false;
  for (const ResultRecord& r : results) {
    auto it = by_id.find(r.utterance_id);
    if (it == by_id.end()) {
      unmatched.push_back(r.utterance_id);
      continue;
    }
    EditOps ops = edit_distance(r.labels, it->second->labels);
    edits += ops.total();
    ref_len += it->second->labels.size();
    if (it->second->labels.empty()) empty_ref_seen = true;
    if (r.wall_time_ms > 0 && r.audio_duration_ms > 0)
      rtfs.push_back(r.wall_time_ms / r.audio_duration_ms);
  }
  if (!unmatched.empty()) {
    std::cerr << "unmatched utterance ids:\n";
    for (const std::string& id : unmatched) std::cerr << "  " << id << "\n";
    return kExitDataMismatch;
  }
  double rate = ref_len == 0 ? static_cast<double>(edits)
                             : static_cast<double>(edits) /
                                   static_cast<double>(ref_len);
  std::cout << "utterances: " << results.size() << "\n";
  std::cout << "error_rate: " << rate << "\n";
  if (empty_ref_seen)
    std::cout << "note: empty reference transcript present (rate divides by 1)\n";
  if (!rtfs.empty()) std::cout << "rt90: " << percentile(rtfs, 90.0) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RNN transducer beam search toolkit"};
  app.require_subcommand(1);

  // gen-model
  auto* gen = app.add_subcommand("gen-model", "generate synthetic model");
  std::string gen_preset;
  ModelConfig gen_cfg;
  std::uint64_t gen_seed = 1;
  double gen_blank_bias = 0.0, gen_logit_scale = 1.0;
  std::string gen_out;
  gen->add_option("--preset", gen_preset, "timit or librispeech");
  gen->add_option("--input-dim", gen_cfg.input_dim);
  gen->add_option("--enc-layers", gen_cfg.enc_layers);
  gen->add_option("--enc-hidden", gen_cfg.enc_hidden);
  gen->add_option("--pred-layers", gen_cfg.pred_layers);
  gen->add_option("--pred-hidden", gen_cfg.pred_hidden);
  gen->add_option("--joint-dim", gen_cfg.joint_dim);
  gen->add_option("--labels", gen_cfg.num_labels);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--blank-bias", gen_blank_bias,
                  "added to the blank output bias after init");
  gen->add_option("--logit-scale", gen_logit_scale,
                  "scales the output layer after init");
  gen->add_option("--out", gen_out)->required();

  // gen-features
  auto* genf = app.add_subcommand("gen-features", "generate synthetic features");
  std::size_t gf_frames = 100, gf_dim = 80;
  std::uint64_t gf_seed = 1;
  std::uint32_t gf_duration = 0;
  std::string gf_out;
  genf->add_option("--frames", gf_frames);
  genf->add_option("--dim", gf_dim);
  genf->add_option("--seed", gf_seed);
  genf->add_option("--duration-ms", gf_duration,
                   "defaults to 10 ms per frame");
  genf->add_option("--out", gf_out)->required();

  // decode
  auto* dec = app.add_subcommand("decode", "decode feature files");
  std::string dec_model, dec_out;
  std::vector<std::string> dec_feats;
  DecoderConfig dec_cfg;
  bool dec_alpha_set = false;
  dec->add_option("--model", dec_model)->required();
  dec->add_option("--features", dec_feats)->required();
  dec->add_option("--decoder", dec_cfg.name,
                  "greedy|ref|improved|osc|osc-unbatched|oracle");
  dec->add_option("--beam", dec_cfg.beam);
  dec->add_option("--alpha", dec_cfg.alpha)
      ->each([&dec_alpha_set](const std::string&) { dec_alpha_set = true; });
  dec->add_option("--expand-beam", dec_cfg.expand_beam);
  dec->add_option("--state-beam", dec_cfg.state_beam);
  dec->add_option("--max-len", dec_cfg.max_len, "oracle enumeration cap");
  dec->add_option("--out", dec_out, "result log (JSONL, appended)");

  // bench
  auto* bench = app.add_subcommand("bench", "benchmark decoder grid");
  std::string bench_model, bench_report;
  std::vector<std::string> bench_feats;
  std::vector<std::string> bench_decoders{"ref", "improved", "osc"};
  std::vector<std::size_t> bench_beams{5, 10, 20};
  std::vector<std::size_t> bench_alphas{1, 2};
  std::size_t bench_repeats = 1;
  bool bench_no_warmup = false;
  bench->add_option("--model", bench_model)->required();
  bench->add_option("--features", bench_feats)->required();
  bench->add_option("--decoders", bench_decoders);
  bench->add_option("--beams", bench_beams);
  bench->add_option("--alphas", bench_alphas);
  bench->add_option("--repeats", bench_repeats);
  bench->add_flag("--no-warmup", bench_no_warmup);
  bench->add_option("--out", bench_report);

  // stats
  auto* stats = app.add_subcommand("stats", "expansion/prefix search ratios");
  std::string stats_model;
  std::vector<std::string> stats_feats;
  std::size_t stats_beam = 5;
  stats->add_option("--model", stats_model)->required();
  stats->add_option("--features", stats_feats)->required();
  stats->add_option("--beam", stats_beam);

  // compare
  auto* cmp = app.add_subcommand("compare", "compare two decoder configs");
  std::string cmp_model;
  std::vector<std::string> cmp_feats;
  DecoderConfig cmp_a, cmp_b;
  bool cmp_trace = false;
  cmp->add_option("--model", cmp_model)->required();
  cmp->add_option("--features", cmp_feats)->required();
  cmp->add_option("--a-decoder", cmp_a.name)->required();
  cmp->add_option("--a-beam", cmp_a.beam);
  cmp->add_option("--a-alpha", cmp_a.alpha);
  cmp->add_option("--a-max-len", cmp_a.max_len);
  cmp->add_option("--b-decoder", cmp_b.name)->required();
  cmp->add_option("--b-beam", cmp_b.beam);
  cmp->add_option("--b-alpha", cmp_b.alpha);
  cmp->add_option("--b-max-len", cmp_b.max_len);
  cmp->add_flag("--trace", cmp_trace, "report first divergent frame");

  // eval
  auto* eval = app.add_subcommand("eval", "score a result log");
  std::string eval_results, eval_transcripts;
  eval->add_option("--results", eval_results)->required();
  eval->add_option("--transcripts", eval_transcripts)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen_model(gen_preset, gen_cfg, gen_seed, gen_blank_bias,
                           gen_logit_scale, gen_out);
    if (genf->parsed()) {
      FeatureMatrix f = synth_features(gf_frames, gf_dim, gf_seed);
      std::uint32_t dur = gf_duration
                              ? gf_duration
                              : static_cast<std::uint32_t>(gf_frames * 10);
      write_features(gf_out, f, dur);
      std::cout << "wrote " << gf_out << ": T=" << gf_frames
                << " F=" << gf_dim << " seed " << gf_seed << "\n";
      return 0;
    }
    if (dec->parsed()) {
      if (dec_cfg.name == "osc" && !dec_alpha_set)
        std::cerr << "notice: --alpha not given, defaulting to 1\n";
      return cmd_decode(dec_model, dec_feats, dec_cfg, dec_out);
    }
    if (bench->parsed())
      return cmd_bench(bench_model, bench_feats, bench_decoders, bench_beams,
                       bench_alphas, bench_repeats, !bench_no_warmup,
                       bench_report);
    if (stats->parsed()) return cmd_stats(stats_model, stats_feats, stats_beam);
    if (cmp->parsed())
      return cmd_compare(cmp_model, cmp_feats, cmp_a, cmp_b, cmp_trace);
    if (eval->parsed()) return cmd_eval(eval_results, eval_transcripts);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BudgetExceededError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
