#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rnnt/decode.hpp"

// Per-hypothesis transliteration of the one-step constrained search. This
// file deliberately avoids the batched model kernels; every probability is
// produced by single-state posterior() and predictor_step() calls so the
// batched decoder can be checked against it.

namespace rnnt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct UHyp {
  std::vector<int> labels;
  LogProb logp = 0.0;
  PredState state;
  std::size_t parent = 0;
};

bool strict_prefix_of(const std::vector<int>& a, const std::vector<int>& b) {
  return a.size() < b.size() && std::equal(a.begin(), a.end(), b.begin());
}

bool ranked_before(LogProb sa, const std::vector<int>& la, std::size_t pa,
                   LogProb sb, const std::vector<int>& lb, std::size_t pb) {
  if (sa != sb) return sa > sb;
  if (la.size() != lb.size()) return la.size() < lb.size();
  if (la != lb) return la < lb;
  return pa < pb;
}

}  // namespace

DecodeOutput decode_osc_unbatched(const ModelWeights& w,
                                  const FeatureMatrix& feats,
                                  const OscParams& params) {
  if (params.beam_width < 1)
    throw std::invalid_argument("decode_osc_unbatched: beam width must be >= 1");
  auto begin = std::chrono::steady_clock::now();
  DecodeOutput out;
  const std::size_t W = params.beam_width;
  const std::size_t K = w.config.num_labels;

  EncState enc = make_enc_state(w.config);
  std::vector<UHyp> beam;
  {
    UHyp root;
    root.state =
        predictor_step(w, ModelConfig::kBlankId, make_pred_state(w.config));
    beam.push_back(std::move(root));
  }

  for (std::size_t t = 0; t < feats.frames; ++t) {
    std::vector<double> h_enc = encoder_step(w, feats.frame_span(t), enc);

    // Constrained prefix search on frame-entry scores.
    std::vector<LogProb> updated(beam.size());
    for (std::size_t i = 0; i < beam.size(); ++i) updated[i] = beam[i].logp;
    if (params.prefix_search && params.alpha > 0) {
      for (std::size_t i = 0; i < beam.size(); ++i) {
        for (std::size_t j = 0; j < beam.size(); ++j) {
          if (i == j || !strict_prefix_of(beam[j].labels, beam[i].labels))
            continue;
          if (beam[i].labels.size() - beam[j].labels.size() > params.alpha)
            continue;
          // Chain of label factors at frame t along the extension.
          LogProb chain = 0.0;
          PredState s = beam[j].state;
          for (std::size_t u = beam[j].labels.size();
               u < beam[i].labels.size(); ++u) {
            std::vector<LogProb> p = posterior(w, h_enc, s);
            chain += p[static_cast<std::size_t>(beam[i].labels[u])];
            if (u + 1 < beam[i].labels.size())
              s = predictor_step(w, beam[i].labels[u], s);
          }
          updated[i] = log_add(updated[i], beam[j].logp + chain);
        }
      }
    }

    // Per-hypothesis posteriors.
    std::vector<std::vector<LogProb>> post(beam.size());
    for (std::size_t i = 0; i < beam.size(); ++i)
      post[i] = posterior(w, h_enc, beam[i].state);

    // Incomplete candidates and local top-W pruning.
    struct Cand {
      std::size_t parent;
      int label;
      LogProb score;
      std::vector<int> labels;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      for (std::size_t k = 1; k <= K; ++k) {
        Cand c;
        c.parent = i;
        c.label = static_cast<int>(k);
        c.score = updated[i] + post[i][k];
        c.labels = beam[i].labels;
        c.labels.push_back(c.label);
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return ranked_before(a.score, a.labels, a.parent, b.score, b.labels,
                           b.parent);
    });
    if (cands.size() > W) cands.resize(W);

    // Duplication check against the incoming beam.
    std::vector<Cand> survivors;
    for (Cand& c : cands) {
      bool dup = false;
      if (params.duplication_check) {
        for (const UHyp& h : beam)
          if (h.labels == c.labels) {
            dup = true;
            break;
          }
      }
      if (!dup) survivors.push_back(std::move(c));
    }

    // Blank rescoring, one hypothesis at a time.
    struct Scored {
      std::vector<int> labels;
      LogProb logp;
      PredState state;
      std::size_t parent;
    };
    std::vector<Scored> pool;
    for (std::size_t i = 0; i < beam.size(); ++i)
      pool.push_back(Scored{beam[i].labels,
                            updated[i] + post[i][ModelConfig::kBlankId],
                            beam[i].state, i});
    for (const Cand& c : survivors) {
      PredState s = predictor_step(w, c.label, beam[c.parent].state);
      std::vector<LogProb> p = posterior(w, h_enc, s);
      pool.push_back(Scored{c.labels, c.score + p[ModelConfig::kBlankId],
                            std::move(s), c.parent});
    }

    // Global top-W pruning.
    std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
      return ranked_before(a.logp, a.labels, a.parent, b.logp, b.labels,
                           b.parent);
    });
    if (pool.size() > W) pool.resize(W);

    std::vector<UHyp> next;
    for (Scored& s : pool)
      next.push_back(
          UHyp{std::move(s.labels), s.logp, std::move(s.state), s.parent});
    beam = std::move(next);

    if (params.record_beams) {
      BeamSnapshot snap;
      for (const UHyp& h : beam) {
        snap.labels.push_back(h.labels);
        snap.scores.push_back(h.logp);
      }
      out.beam_trace.push_back(std::move(snap));
    }
  }

  const UHyp* best = nullptr;
  LogProb best_norm = kNegInf;
  for (const UHyp& h : beam) {
    LogProb norm =
        h.logp / static_cast<double>(std::max<std::size_t>(h.labels.size(), 1));
    bool better = false;
    if (best == nullptr || norm > best_norm)
      better = true;
    else if (norm == best_norm) {
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
  out.labels = best->labels;
  out.score = best_norm;
  out.raw_logp = best->logp;
  out.frames_processed = feats.frames;
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
          .count();
  return out;
}

}  // namespace rnnt
