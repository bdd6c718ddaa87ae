#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "rnnt/model.hpp"

namespace rnnt {

// Row-major T x F feature matrix.
struct FeatureMatrix {
  std::size_t frames = 0;  // T
  std::size_t dim = 0;     // F
  std::vector<double> data;

  const double* frame(std::size_t t) const { return data.data() + t * dim; }
  std::span<const double> frame_span(std::size_t t) const {
    return {frame(t), dim};
  }
};

struct Hypothesis {
  std::vector<int> labels;  // non-blank labels, each in [1, |K|]
  LogProb logp = 0.0;       // complete (blank-terminated) accumulated score
  std::shared_ptr<const PredState> pred_state;
  // Index of the parent in the previous beam for freshly expanded
  // hypotheses; -1 for carried-over ones.
  int parent_index = -1;
};

// Size-bounded, score-descending set of hypotheses (the sets A, B).
struct Beam {
  std::vector<Hypothesis> items;
  std::size_t width = 0;  // W
};

struct OscParams {
  std::size_t beam_width = 1;  // W
  std::size_t alpha = 1;       // prefix length-difference cap
  // Test hooks.
  bool duplication_check = true;
  bool prefix_search = true;
  bool debug_checks = false;
  bool record_beams = false;
};

struct ImprovedParams {
  std::size_t beam_width = 1;
  double expand_beam = 2.3;  // log-domain label margin
  double state_beam = 4.6;   // log-domain early-exit margin
};

// Per-step instrumentation histograms.
struct StepStats {
  std::map<std::size_t, std::uint64_t> expansion_counts;
  std::map<std::size_t, std::uint64_t> prefix_len_diffs;

  void merge(const StepStats& other);
};

// Two-column ratio table (percentages per bucket). The expansion table
// excludes the zero-expansion bucket.
struct StatsRatioTable {
  std::map<std::size_t, double> expansion_pct;
  std::map<std::size_t, double> prefix_pct;
  std::uint64_t zero_expansions = 0;  // excluded from expansion_pct
};

struct DecodeCounters {
  std::uint64_t posterior_batches = 0;  // main batched posterior calls
  std::uint64_t rescore_batches = 0;    // blank-rescoring batched calls
  std::uint64_t posterior_calls = 0;    // single-row posterior evaluations
  std::uint64_t expansion_pops = 0;     // while-loop pops (reference/improved)
  std::uint64_t predictor_steps = 0;    // prediction-network advances
  std::uint64_t duplicates_dropped = 0; // candidates removed by dup check
  std::uint64_t duplicate_beam_entries = 0;  // duplicated sequences seen in B
};

struct BeamSnapshot {
  std::vector<std::vector<int>> labels;
  std::vector<LogProb> scores;
};

struct DecodeOutput {
  std::vector<int> labels;
  LogProb score = 0.0;           // log Pr / max(|labels|, 1)
  LogProb raw_logp = 0.0;        // unnormalized log Pr
  std::size_t frames_processed = 0;
  double wall_time_s = 0.0;
  std::optional<std::vector<StepStats>> step_stats;  // one per frame
  DecodeCounters counters;
  std::vector<BeamSnapshot> beam_trace;  // filled when tracing is enabled
};

// At most one emission per frame, argmax over |K|+1 entries; ties break
// toward blank, then the lowest label index. An emission is followed by the
// blank factor from the advanced state so the score is a complete path
// probability.
DecodeOutput decode_greedy(const ModelWeights& w, const FeatureMatrix& feats);

// Chain log Pr(full | prefix, t): sum of per-label posteriors over the
// extension positions, advancing the prediction network from prefix_hyp's
// state. Does not include the prefix's own score.
LogProb prefix_extension_logprob(const ModelWeights& w,
                                 const Hypothesis& prefix_hyp,
                                 const std::vector<int>& full,
                                 std::span<const double> h_enc,
                                 DecodeCounters* counters = nullptr);

struct ReferenceOptions {
  bool instrument = false;
  bool record_beams = false;
  // Hit only on runaway expansion; treated as a hard error.
  std::uint64_t max_pops_per_frame = 2'000'000;
};

DecodeOutput decode_reference(const ModelWeights& w, const FeatureMatrix& feats,
                              std::size_t beam_width,
                              const ReferenceOptions& opts = {});

DecodeOutput decode_reference_instrumented(const ModelWeights& w,
                                           const FeatureMatrix& feats,
                                           std::size_t beam_width);

// Merges histograms and converts to percentages. The expansion table drops
// the zero bucket before normalizing.
StatsRatioTable aggregate_step_stats(const std::vector<StepStats>& stats);

// Reference search with state_beam early exit and expand_beam label margin.
DecodeOutput decode_improved(const ModelWeights& w, const FeatureMatrix& feats,
                             const ImprovedParams& params);

// One-step constrained beam search, batched.
DecodeOutput decode_osc(const ModelWeights& w, const FeatureMatrix& feats,
                        const OscParams& params);

// Straight-line per-hypothesis transliteration of the same search; kept
// free of the batched kernels so the two paths check each other.
DecodeOutput decode_osc_unbatched(const ModelWeights& w,
                                  const FeatureMatrix& feats,
                                  const OscParams& params);

// argmax of logp / max(|labels|, 1); ties toward shorter, then lexicographic.
std::pair<std::vector<int>, LogProb> select_final(const Beam& beam);

struct ExhaustiveResult {
  std::vector<int> labels;
  LogProb normalized_score = 0.0;
  LogProb raw_logp = 0.0;
  // Full table: label sequence -> log Pr(y) under the transducer lattice.
  std::map<std::vector<int>, LogProb> table;
};

// Enumerates every label sequence up to max_len and scores it with the
// forward recursion over the (t, u) lattice. Small instances only.
ExhaustiveResult exhaustive_decode(const ModelWeights& w,
                                   const FeatureMatrix& feats,
                                   std::size_t max_len,
                                   std::uint64_t budget = 2'000'000);

class BudgetExceededError : public std::runtime_error {
 public:
  BudgetExceededError(std::uint64_t required, std::uint64_t budget);
  std::uint64_t required;
  std::uint64_t budget;
};

// Shared candidate ordering: higher score, then shorter label sequence,
// then lexicographic labels, then lower parent index.
bool hypothesis_order(LogProb score_a, const std::vector<int>& labels_a,
                      int parent_a, LogProb score_b,
                      const std::vector<int>& labels_b, int parent_b);

}  // namespace rnnt
