#include "rnnt/decode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rnnt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::shared_ptr<const PredState> start_pred_state(const ModelWeights& w) {
  PredState zero = make_pred_state(w.config);
  return std::make_shared<const PredState>(
      predictor_step(w, ModelConfig::kBlankId, zero));
}

bool is_strict_prefix(const std::vector<int>& shorter,
                      const std::vector<int>& longer) {
  if (shorter.size() >= longer.size()) return false;
  return std::equal(shorter.begin(), shorter.end(), longer.begin());
}

class Stopwatch {
 public:
  Stopwatch() : begin_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         begin_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point begin_;
};

}  // namespace

bool hypothesis_order(LogProb score_a, const std::vector<int>& labels_a,
                      int parent_a, LogProb score_b,
                      const std::vector<int>& labels_b, int parent_b) {
  if (score_a != score_b) return score_a > score_b;
  if (labels_a.size() != labels_b.size())
    return labels_a.size() < labels_b.size();
  if (labels_a != labels_b) return labels_a < labels_b;
  return parent_a < parent_b;
}

void StepStats::merge(const StepStats& other) {
  for (const auto& [k, v] : other.expansion_counts) expansion_counts[k] += v;
  for (const auto& [k, v] : other.prefix_len_diffs) prefix_len_diffs[k] += v;
}

std::pair<std::vector<int>, LogProb> select_final(const Beam& beam) {
  if (beam.items.empty())
    throw std::invalid_argument("select_final: empty beam");
  const Hypothesis* best = nullptr;
  LogProb best_norm = kNegInf;
  for (const Hypothesis& h : beam.items) {
    LogProb norm =
        h.logp / static_cast<double>(std::max<std::size_t>(h.labels.size(), 1));
    bool better = false;
    if (best == nullptr || norm > best_norm) {
      better = true;
    } else if (norm == best_norm) {
      if (h.labels.size() != best->labels.size())
        better = h.labels.size() < best->labels.size();
      else
        better = h.labels < best->labels;
    }
    if (better) {
      best = &h;
      best_norm = norm;
    }
  }
  return {best->labels, best_norm};
}

DecodeOutput decode_greedy(const ModelWeights& w, const FeatureMatrix& feats) {
  Stopwatch clock;
  DecodeOutput out;
  EncState enc = make_enc_state(w.config);
  std::shared_ptr<const PredState> pred = start_pred_state(w);
  LogProb logp = 0.0;
  for (std::size_t t = 0; t < feats.frames; ++t) {
    std::vector<double> h_enc = encoder_step(w, feats.frame_span(t), enc);
    std::vector<LogProb> p = posterior(w, h_enc, *pred);
    out.counters.posterior_calls++;
    // Ties break toward blank (index 0), then the lowest label.
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.size(); ++k)
      if (p[k] > p[best]) best = k;
    if (best == ModelConfig::kBlankId) {
      logp += p[best];
    } else {
      out.labels.push_back(static_cast<int>(best));
      logp += p[best];
      pred = std::make_shared<const PredState>(
          predictor_step(w, static_cast<int>(best), *pred));
      out.counters.predictor_steps++;
      std::vector<LogProb> p2 = posterior(w, h_enc, *pred);
      out.counters.posterior_calls++;
      logp += p2[ModelConfig::kBlankId];
    }
  }
  out.raw_logp = logp;
  out.score =
      logp / static_cast<double>(std::max<std::size_t>(out.labels.size(), 1));
  out.frames_processed = feats.frames;
  out.wall_time_s = clock.seconds();
  return out;
}

namespace {

// Core of prefix_extension_logprob with the frame-constant encoder
// projection hoisted out so per-frame callers pay for it once.
LogProb prefix_extension_logprob_proj(const ModelWeights& w,
                                      const Hypothesis& prefix_hyp,
                                      const std::vector<int>& full,
                                      std::span<const double> enc_proj,
                                      DecodeCounters* counters) {
  if (!is_strict_prefix(prefix_hyp.labels, full))
    throw std::invalid_argument(
        "prefix_extension_logprob: not a strict prefix");
  LogProb total = 0.0;
  std::shared_ptr<const PredState> state = prefix_hyp.pred_state;
  for (std::size_t j = prefix_hyp.labels.size(); j < full.size(); ++j) {
    std::vector<LogProb> p = posterior_from_proj(w, enc_proj, *state);
    if (counters) counters->posterior_calls++;
    total += p[static_cast<std::size_t>(full[j])];
    if (j + 1 < full.size()) {
      state =
          std::make_shared<const PredState>(predictor_step(w, full[j], *state));
      if (counters) counters->predictor_steps++;
    }
  }
  return total;
}

}  // namespace

LogProb prefix_extension_logprob(const ModelWeights& w,
                                 const Hypothesis& prefix_hyp,
                                 const std::vector<int>& full,
                                 std::span<const double> h_enc,
                                 DecodeCounters* counters) {
  return prefix_extension_logprob_proj(
      w, prefix_hyp, full, joint_enc_projection(w, h_enc), counters);
}

namespace {

// A-set entry during the expansion while-loop. Children defer their
// prediction-network advance until popped.
struct RefHyp {
  std::vector<int> labels;
  LogProb logp = 0.0;
  std::shared_ptr<const PredState> pred;  // parent's state while pending
  int pending_label = -1;
  std::size_t expansions = 0;
};

struct RefHypWorse {
  bool operator()(const RefHyp& a, const RefHyp& b) const {
    // Max-heap: "less" means ranked worse.
    return hypothesis_order(b.logp, b.labels, 0, a.logp, a.labels, 0);
  }
};

struct CommittedHyp {
  Hypothesis hyp;
  std::size_t expansions = 0;
};

DecodeOutput decode_expansion_loop(const ModelWeights& w,
                                   const FeatureMatrix& feats,
                                   std::size_t beam_width, double expand_beam,
                                   double state_beam,
                                   const ReferenceOptions& opts) {
  if (beam_width < 1)
    throw std::invalid_argument("decode: beam width must be >= 1");
  Stopwatch clock;
  DecodeOutput out;
  if (opts.instrument) out.step_stats.emplace();

  EncState enc = make_enc_state(w.config);
  const std::size_t K = w.config.num_labels;

  std::vector<Hypothesis> beam;
  beam.push_back(Hypothesis{{}, 0.0, start_pred_state(w), -1});

  for (std::size_t t = 0; t < feats.frames; ++t) {
    std::vector<double> h_enc = encoder_step(w, feats.frame_span(t), enc);
    std::vector<double> enc_proj = joint_enc_projection(w, h_enc);
    StepStats frame_stats;

    // Prefix search over the incoming beam, using scores as they stand at
    // frame entry.
    std::vector<LogProb> updated(beam.size());
    for (std::size_t i = 0; i < beam.size(); ++i) updated[i] = beam[i].logp;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      for (std::size_t j = 0; j < beam.size(); ++j) {
        if (i == j || !is_strict_prefix(beam[j].labels, beam[i].labels))
          continue;
        if (opts.instrument)
          frame_stats
              .prefix_len_diffs[beam[i].labels.size() - beam[j].labels.size()]++;
        LogProb chain = prefix_extension_logprob_proj(
            w, beam[j], beam[i].labels, enc_proj, &out.counters);
        updated[i] = log_add(updated[i], beam[j].logp + chain);
      }
    }

    // Expansion search.
    std::vector<RefHyp> a_heap;
    a_heap.reserve(beam.size());
    for (std::size_t i = 0; i < beam.size(); ++i)
      a_heap.push_back(
          RefHyp{beam[i].labels, updated[i], beam[i].pred_state, -1, 0});
    std::make_heap(a_heap.begin(), a_heap.end(), RefHypWorse{});

    std::vector<CommittedHyp> committed;
    std::uint64_t pops = 0;
    while (!a_heap.empty()) {
      const LogProb best_a = a_heap.front().logp;
      std::size_t better = 0;
      LogProb best_b = kNegInf;
      for (const CommittedHyp& c : committed) {
        if (c.hyp.logp > best_a) ++better;
        best_b = std::max(best_b, c.hyp.logp);
      }
      if (better >= beam_width) break;
      if (best_b - best_a > state_beam) break;  // state_beam early exit

      std::pop_heap(a_heap.begin(), a_heap.end(), RefHypWorse{});
      RefHyp star = std::move(a_heap.back());
      a_heap.pop_back();
      if (++pops > opts.max_pops_per_frame)
        throw std::runtime_error(
            "decode_reference: expansion loop exceeded pop cap");

      std::shared_ptr<const PredState> pred = star.pred;
      if (star.pending_label >= 0) {
        pred = std::make_shared<const PredState>(
            predictor_step(w, star.pending_label, *pred));
        out.counters.predictor_steps++;
      }
      std::vector<LogProb> p = posterior_from_proj(w, enc_proj, *pred);
      out.counters.posterior_calls++;

      committed.push_back(CommittedHyp{
          Hypothesis{star.labels, star.logp + p[ModelConfig::kBlankId], pred,
                     -1},
          star.expansions});

      LogProb max_label = kNegInf;
      for (std::size_t k = 1; k <= K; ++k) max_label = std::max(max_label, p[k]);
      for (std::size_t k = 1; k <= K; ++k) {
        if (p[k] < max_label - expand_beam) continue;
        RefHyp child;
        child.labels = star.labels;
        child.labels.push_back(static_cast<int>(k));
        child.logp = star.logp + p[k];
        child.pred = pred;
        child.pending_label = static_cast<int>(k);
        child.expansions = star.expansions + 1;
        a_heap.push_back(std::move(child));
        std::push_heap(a_heap.begin(), a_heap.end(), RefHypWorse{});
      }
    }
    out.counters.expansion_pops += pops;

    // Keep the W most probable in B.
    std::sort(committed.begin(), committed.end(),
              [](const CommittedHyp& a, const CommittedHyp& b) {
                return hypothesis_order(a.hyp.logp, a.hyp.labels, 0, b.hyp.logp,
                                        b.hyp.labels, 0);
              });
    if (committed.size() > beam_width) committed.resize(beam_width);

    beam.clear();
    for (CommittedHyp& c : committed) {
      if (opts.instrument) frame_stats.expansion_counts[c.expansions]++;
      beam.push_back(std::move(c.hyp));
    }
    if (opts.instrument) out.step_stats->push_back(std::move(frame_stats));
    if (opts.record_beams) {
      BeamSnapshot snap;
      for (const Hypothesis& h : beam) {
        snap.labels.push_back(h.labels);
        snap.scores.push_back(h.logp);
      }
      out.beam_trace.push_back(std::move(snap));
    }
  }

  Beam final_beam;
  final_beam.width = beam_width;
  final_beam.items = std::move(beam);
  auto [labels, score] = select_final(final_beam);
  for (const Hypothesis& h : final_beam.items)
    if (h.labels == labels) {
      out.raw_logp = h.logp;
      break;
    }
  out.labels = std::move(labels);
  out.score = score;
  out.frames_processed = feats.frames;
  out.wall_time_s = clock.seconds();
  return out;
}

}  // namespace

DecodeOutput decode_reference(const ModelWeights& w, const FeatureMatrix& feats,
                              std::size_t beam_width,
                              const ReferenceOptions& opts) {
  return decode_expansion_loop(w, feats, beam_width,
                               std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(), opts);
}

DecodeOutput decode_reference_instrumented(const ModelWeights& w,
                                           const FeatureMatrix& feats,
                                           std::size_t beam_width) {
  ReferenceOptions opts;
  opts.instrument = true;
  return decode_reference(w, feats, beam_width, opts);
}

DecodeOutput decode_improved(const ModelWeights& w, const FeatureMatrix& feats,
                             const ImprovedParams& params) {
  if (params.expand_beam < 0 || params.state_beam < 0)
    throw std::invalid_argument("decode_improved: margins must be >= 0");
  return decode_expansion_loop(w, feats, params.beam_width, params.expand_beam,
                               params.state_beam, ReferenceOptions{});
}

StatsRatioTable aggregate_step_stats(const std::vector<StepStats>& stats) {
  StepStats merged;
  for (const StepStats& s : stats) merged.merge(s);
  std::uint64_t exp_total = 0;
  for (const auto& [k, v] : merged.expansion_counts) {
    if (k == 0)
      continue;  // zero-expansion bucket is tracked but not tabulated
    exp_total += v;
  }
  std::uint64_t pre_total = 0;
  for (const auto& [k, v] : merged.prefix_len_diffs) pre_total += v;
  if (exp_total == 0 && pre_total == 0 && merged.expansion_counts.empty() &&
      merged.prefix_len_diffs.empty())
    throw std::invalid_argument("aggregate_step_stats: no observations");

  StatsRatioTable table;
  auto it = merged.expansion_counts.find(0);
  table.zero_expansions = it == merged.expansion_counts.end() ? 0 : it->second;
  for (const auto& [k, v] : merged.expansion_counts) {
    if (k == 0) continue;
    table.expansion_pct[k] = 100.0 * static_cast<double>(v) /
                             static_cast<double>(exp_total);
  }
  for (const auto& [k, v] : merged.prefix_len_diffs)
    table.prefix_pct[k] =
        100.0 * static_cast<double>(v) / static_cast<double>(pre_total);
  return table;
}

namespace {

// Incomplete expansion candidate: parent beam slot + appended label.
struct Cand {
  std::size_t parent;
  int label;
  LogProb score;
};

// Lexicographic compare of (parent labels + appended label) sequences
// without materializing them.
int compare_extended(const std::vector<int>& a, int ka,
                     const std::vector<int>& b, int kb) {
  const std::size_t na = a.size() + 1, nb = b.size() + 1;
  const std::size_t n = std::min(na, nb);
  for (std::size_t i = 0; i < n; ++i) {
    int va = i < a.size() ? a[i] : ka;
    int vb = i < b.size() ? b[i] : kb;
    if (va != vb) return va < vb ? -1 : 1;
  }
  if (na != nb) return na < nb ? -1 : 1;
  return 0;
}

}  // namespace

DecodeOutput decode_osc(const ModelWeights& w, const FeatureMatrix& feats,
                        const OscParams& params) {
  if (params.beam_width < 1)
    throw std::invalid_argument("decode_osc: beam width must be >= 1");
  Stopwatch clock;
  DecodeOutput out;
  const std::size_t W = params.beam_width;
  const std::size_t K = w.config.num_labels;
  const std::size_t V = w.config.vocab_size();

  EncState enc = make_enc_state(w.config);
  std::vector<Hypothesis> beam;
  beam.push_back(Hypothesis{{}, 0.0, start_pred_state(w), -1});

  for (std::size_t t = 0; t < feats.frames; ++t) {
    std::vector<double> h_enc = encoder_step(w, feats.frame_span(t), enc);
    const std::size_t n = beam.size();

    // Constrained prefix search, on scores as they stand at frame entry.
    std::vector<LogProb> updated(n);
    for (std::size_t i = 0; i < n; ++i) updated[i] = beam[i].logp;
    if (params.prefix_search && params.alpha > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j || !is_strict_prefix(beam[j].labels, beam[i].labels))
            continue;
          if (beam[i].labels.size() - beam[j].labels.size() > params.alpha)
            continue;
          LogProb chain = prefix_extension_logprob(w, beam[j], beam[i].labels,
                                                   h_enc, &out.counters);
          updated[i] = log_add(updated[i], beam[j].logp + chain);
        }
      }
    }

    // One batched posterior over the whole beam.
    std::vector<const PredState*> states(n);
    for (std::size_t i = 0; i < n; ++i) states[i] = beam[i].pred_state.get();
    PosteriorMatrix post = batched_posterior(w, h_enc, states);
    out.counters.posterior_batches++;

    // Incomplete candidates (i, k) and local top-W pruning.
    std::vector<Cand> cands;
    cands.reserve(n * K);
    for (std::size_t i = 0; i < n; ++i) {
      const LogProb* row = post.row(i);
      for (std::size_t k = 1; k <= K; ++k)
        cands.push_back(
            Cand{i, static_cast<int>(k), updated[i] + row[k]});
    }
    auto cand_order = [&beam](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      const std::size_t la = beam[a.parent].labels.size() + 1;
      const std::size_t lb = beam[b.parent].labels.size() + 1;
      if (la != lb) return la < lb;
      int c = compare_extended(beam[a.parent].labels, a.label,
                               beam[b.parent].labels, b.label);
      if (c != 0) return c < 0;
      return a.parent < b.parent;
    };
    if (cands.size() > W) {
      std::partial_sort(cands.begin(), cands.begin() + W, cands.end(),
                        cand_order);
      cands.resize(W);
    } else {
      std::sort(cands.begin(), cands.end(), cand_order);
    }

    // Duplication check: drop candidates already present in the beam.
    std::vector<Cand> survivors;
    survivors.reserve(cands.size());
    for (const Cand& c : cands) {
      bool dup = false;
      if (params.duplication_check) {
        const std::vector<int>& pl = beam[c.parent].labels;
        for (const Hypothesis& h : beam) {
          if (h.labels.size() == pl.size() + 1 &&
              h.labels.back() == c.label &&
              std::equal(pl.begin(), pl.end(), h.labels.begin())) {
            dup = true;
            break;
          }
        }
      }
      if (dup)
        out.counters.duplicates_dropped++;
      else
        survivors.push_back(c);
    }

    // Blank rescoring: one batched predictor advance plus one batched
    // posterior over the surviving expansions.
    std::vector<PredState> advanced;
    std::vector<LogProb> rescored(survivors.size(), kNegInf);
    if (!survivors.empty()) {
      std::vector<int> labels(survivors.size());
      std::vector<const PredState*> parents(survivors.size());
      for (std::size_t j = 0; j < survivors.size(); ++j) {
        labels[j] = survivors[j].label;
        parents[j] = beam[survivors[j].parent].pred_state.get();
      }
      advanced = predictor_step_batched(w, labels, parents);
      out.counters.predictor_steps += survivors.size();
      std::vector<const PredState*> adv_ptrs(advanced.size());
      for (std::size_t j = 0; j < advanced.size(); ++j)
        adv_ptrs[j] = &advanced[j];
      PosteriorMatrix blank_post = batched_posterior(w, h_enc, adv_ptrs);
      out.counters.rescore_batches++;
      for (std::size_t j = 0; j < survivors.size(); ++j)
        rescored[j] =
            survivors[j].score + blank_post.row(j)[ModelConfig::kBlankId];
    }

    // Global pruning over stay and expansion branches.
    struct GlobalCand {
      bool expanded;
      std::size_t idx;  // beam index or survivor index
      LogProb score;
    };
    std::vector<GlobalCand> global;
    global.reserve(n + survivors.size());
    for (std::size_t i = 0; i < n; ++i)
      global.push_back(GlobalCand{
          false, i, updated[i] + post.row(i)[ModelConfig::kBlankId]});
    for (std::size_t j = 0; j < survivors.size(); ++j)
      global.push_back(GlobalCand{true, j, rescored[j]});

    auto global_order = [&](const GlobalCand& a, const GlobalCand& b) {
      if (a.score != b.score) return a.score > b.score;
      auto len = [&](const GlobalCand& g) {
        return g.expanded ? beam[survivors[g.idx].parent].labels.size() + 1
                          : beam[g.idx].labels.size();
      };
      if (len(a) != len(b)) return len(a) < len(b);
      auto lex = [&](const GlobalCand& x, const GlobalCand& y) {
        const std::vector<int>& xl = x.expanded
                                         ? beam[survivors[x.idx].parent].labels
                                         : beam[x.idx].labels;
        int xk = x.expanded ? survivors[x.idx].label : -1;
        const std::vector<int>& yl = y.expanded
                                         ? beam[survivors[y.idx].parent].labels
                                         : beam[y.idx].labels;
        int yk = y.expanded ? survivors[y.idx].label : -1;
        // -1 marks "no appended label"; compare as plain sequences.
        std::vector<int> xs = xl, ys = yl;
        if (xk >= 0) xs.push_back(xk);
        if (yk >= 0) ys.push_back(yk);
        if (xs != ys) return xs < ys ? -1 : 1;
        return 0;
      };
      int c = lex(a, b);
      if (c != 0) return c < 0;
      auto parent = [&](const GlobalCand& g) {
        return g.expanded ? survivors[g.idx].parent : g.idx;
      };
      return parent(a) < parent(b);
    };
    if (global.size() > W) {
      std::partial_sort(global.begin(), global.begin() + W, global.end(),
                        global_order);
      global.resize(W);
    } else {
      std::sort(global.begin(), global.end(), global_order);
    }

    std::vector<Hypothesis> next;
    next.reserve(global.size());
    for (const GlobalCand& g : global) {
      if (g.expanded) {
        const Cand& c = survivors[g.idx];
        Hypothesis h;
        h.labels = beam[c.parent].labels;
        h.labels.push_back(c.label);
        h.logp = g.score;
        h.pred_state = std::make_shared<const PredState>(advanced[g.idx]);
        h.parent_index = static_cast<int>(c.parent);
        next.push_back(std::move(h));
      } else {
        Hypothesis h = beam[g.idx];
        h.logp = g.score;
        h.parent_index = static_cast<int>(g.idx);
        next.push_back(std::move(h));
      }
    }

    // Duplicate sequences in B are counted always; they can only appear
    // when the duplication check is disabled.
    for (std::size_t i = 0; i < next.size(); ++i)
      for (std::size_t j = i + 1; j < next.size(); ++j)
        if (next[i].labels == next[j].labels)
          out.counters.duplicate_beam_entries++;

    if (params.debug_checks) {
      if (next.size() > W)
        throw std::logic_error("decode_osc: beam width exceeded");
      if (params.duplication_check && out.counters.duplicate_beam_entries > 0)
        throw std::logic_error("decode_osc: duplicate hypotheses in beam");
      for (const Hypothesis& h : next) {
        bool ok = false;
        for (const Hypothesis& a : beam) {
          if (h.labels == a.labels) ok = true;
          if (h.labels.size() == a.labels.size() + 1 &&
              std::equal(a.labels.begin(), a.labels.end(), h.labels.begin()))
            ok = true;
        }
        if (!ok)
          throw std::logic_error("decode_osc: one-step constraint violated");
      }
    }

    beam = std::move(next);
    if (params.record_beams) {
      BeamSnapshot snap;
      for (const Hypothesis& h : beam) {
        snap.labels.push_back(h.labels);
        snap.scores.push_back(h.logp);
      }
      out.beam_trace.push_back(std::move(snap));
    }
  }

  Beam final_beam;
  final_beam.width = W;
  final_beam.items = std::move(beam);
  auto [labels, score] = select_final(final_beam);
  for (const Hypothesis& h : final_beam.items)
    if (h.labels == labels) {
      out.raw_logp = h.logp;
      break;
    }
  out.labels = std::move(labels);
  out.score = score;
  out.frames_processed = feats.frames;
  out.wall_time_s = clock.seconds();
  return out;
}

BudgetExceededError::BudgetExceededError(std::uint64_t required_,
                                         std::uint64_t budget_)
    : std::runtime_error("exhaustive_decode: enumeration requires " +
                         std::to_string(required_) +
                         " posterior evaluations, budget is " +
                         std::to_string(budget_)),
      required(required_),
      budget(budget_) {}

namespace {

struct ExhaustiveCtx {
  const ModelWeights* w;
  std::size_t T;
  std::size_t K;
  std::size_t max_len;
  const std::vector<std::vector<double>>* h_enc;  // per frame
  std::map<std::vector<int>, LogProb>* table;
};

// Posterior rows for one prefix state across all frames.
std::vector<std::vector<LogProb>> posterior_rows(const ExhaustiveCtx& ctx,
                                                 const PredState& state) {
  std::vector<std::vector<LogProb>> rows(ctx.T);
  for (std::size_t t = 0; t < ctx.T; ++t)
    rows[t] = posterior(*ctx.w, (*ctx.h_enc)[t], state);
  return rows;
}

// col[t] (0-based frame t) = log mass of paths that emitted exactly this
// prefix using emissions at frames <= t and blanks before frame t.
void enumerate(const ExhaustiveCtx& ctx, std::vector<int>& prefix,
               const PredState& state,
               const std::vector<std::vector<LogProb>>& rows,
               const std::vector<LogProb>& col) {
  (*ctx.table)[prefix] =
      col[ctx.T - 1] + rows[ctx.T - 1][ModelConfig::kBlankId];
  if (prefix.size() >= ctx.max_len) return;
  for (std::size_t k = 1; k <= ctx.K; ++k) {
    PredState child_state = predictor_step(*ctx.w, static_cast<int>(k), state);
    std::vector<std::vector<LogProb>> child_rows =
        posterior_rows(ctx, child_state);
    std::vector<LogProb> child_col(ctx.T, kNegInf);
    child_col[0] = col[0] + rows[0][k];
    for (std::size_t t = 1; t < ctx.T; ++t)
      child_col[t] =
          log_add(child_col[t - 1] + child_rows[t - 1][ModelConfig::kBlankId],
                  col[t] + rows[t][k]);
    prefix.push_back(static_cast<int>(k));
    enumerate(ctx, prefix, child_state, child_rows, child_col);
    prefix.pop_back();
  }
}

}  // namespace

ExhaustiveResult exhaustive_decode(const ModelWeights& w,
                                   const FeatureMatrix& feats,
                                   std::size_t max_len, std::uint64_t budget) {
  const std::size_t T = feats.frames;
  const std::size_t K = w.config.num_labels;
  if (T < 1) throw std::invalid_argument("exhaustive_decode: empty input");

  // Node count sum_{u=0}^{max_len} K^u, each node costing T posteriors.
  std::uint64_t nodes = 0, pow = 1;
  for (std::size_t u = 0; u <= max_len; ++u) {
    nodes += pow;
    if (nodes > budget || pow > budget) throw BudgetExceededError(nodes * T, budget);
    pow *= K;
  }
  if (nodes * T > budget) throw BudgetExceededError(nodes * T, budget);

  std::vector<std::vector<double>> h_enc(T);
  EncState enc = make_enc_state(w.config);
  for (std::size_t t = 0; t < T; ++t)
    h_enc[t] = encoder_step(w, feats.frame_span(t), enc);

  ExhaustiveResult result;
  ExhaustiveCtx ctx{&w, T, K, max_len, &h_enc, &result.table};

  PredState root = predictor_step(w, ModelConfig::kBlankId,
                                  make_pred_state(w.config));
  std::vector<std::vector<LogProb>> rows = posterior_rows(ctx, root);
  std::vector<LogProb> col(T, kNegInf);
  col[0] = 0.0;
  for (std::size_t t = 1; t < T; ++t)
    col[t] = col[t - 1] + rows[t - 1][ModelConfig::kBlankId];
  std::vector<int> prefix;
  enumerate(ctx, prefix, root, rows, col);

  const std::vector<int>* best = nullptr;
  LogProb best_norm = kNegInf;
  for (const auto& [labels, logp] : result.table) {
    LogProb norm =
        logp / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
    bool better = false;
    if (best == nullptr || norm > best_norm) {
      better = true;
    } else if (norm == best_norm) {
      if (labels.size() != best->size())
        better = labels.size() < best->size();
      else
        better = labels < *best;
    }
    if (better) {
      best = &labels;
      best_norm = norm;
      result.raw_logp = logp;
    }
  }
  result.labels = *best;
  result.normalized_score = best_norm;
  return result;
}

}  // namespace rnnt
