#include "segen/oracle.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segen/lattice.h"
#include "segen/logspace.h"

namespace segen {

namespace {

constexpr size_t kEnumerationCap = 1000000;

void extend(std::vector<LabeledSegmentation>& out, LabeledSegmentation& cur,
            int pos, int prev, int m, int K, int L, bool null_self_allowed) {
  if (pos == m) {
    out.push_back(cur);
    if (out.size() > kEnumerationCap)
      throw std::runtime_error(
          "enumerate_segmentations: more than 1000000 labeled segmentations; "
          "shrink m, K, or L until the instance is enumerable");
    return;
  }
  for (int len = 1; len <= std::min(L, m - pos); ++len) {
    for (int j = 0; j <= K; ++j) {
      if (j == prev && !(j == 0 && null_self_allowed)) continue;
      cur.boundaries.push_back(pos + len);
      cur.labels.push_back(j);
      extend(out, cur, pos + len, j, m, K, L, null_self_allowed);
      cur.boundaries.pop_back();
      cur.labels.pop_back();
    }
  }
}

// Shared scoring context so every hypothesis is priced through the same
// attention/output/transition calls the lattice uses. The tape is rewound
// after each hypothesis; only the encoder and decoder chains persist.
struct NeuralScorer {
  ad::Tape tp;
  Bound b;
  const EncodedInstance& enc;
  SourceEncoding src;
  DecoderChain chain;
  bool allow_null_self;
  size_t base;

  NeuralScorer(const EncodedInstance& e, const ModelParams& mp)
      : b(bind(tp, mp)), enc(e), allow_null_self(mp.cfg.allow_null_self_transition) {
    Rng rr(0);
    src = encode_source(tp, b, mp, enc, false, rr);
    chain = build_decoder_chain(tp, b, mp, enc, src, false, rr);
    base = tp.mark();
  }

  double score(const LabeledSegmentation& ls) {
    double lp = 0.0;
    int prev = -1;
    int p = 0;
    for (int o = 0; o < ls.segments(); ++o) {
      int e = ls.boundaries[static_cast<size_t>(o)];
      int j = ls.labels[static_cast<size_t>(o)];
      ad::Var tdist = boundary_transition_dist(tp, b, src, chain, p, prev,
                                               allow_null_self);
      lp += tp.tensor(tdist).v[static_cast<size_t>(j)];
      lp += tp.val(segment_logprob(tp, b, enc, src, chain.views, p + 1, e, j));
      prev = j;
      p = e;
    }
    tp.rewind(base);
    return lp;
  }
};

double table_score(
    const LabeledSegmentation& ls,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores) {
  double lp = 0.0;
  int prev = -1;
  int p = 0;
  for (int o = 0; o < ls.segments(); ++o) {
    int e = ls.boundaries[static_cast<size_t>(o)];
    int j = ls.labels[static_cast<size_t>(o)];
    if (p == 0)
      lp += prior_scores[static_cast<size_t>(j)];
    else
      lp += trans_scores[static_cast<size_t>(p)][static_cast<size_t>(prev)]
                        [static_cast<size_t>(j)];
    lp += gen_scores[static_cast<size_t>(p)][static_cast<size_t>(e - p - 1)]
                    [static_cast<size_t>(j)];
    prev = j;
    p = e;
  }
  return lp;
}

double fold_loglik(const std::vector<double>& logps) {
  double total = logspace::kNegInf;
  for (double lp : logps) total = logspace::log_add(total, lp);
  return total;
}

double fold_expected(const std::vector<double>& logps,
                     const std::vector<LabeledSegmentation>& combos) {
  double hi = logspace::kNegInf;
  for (double lp : logps) hi = std::max(hi, lp);
  double mass = 0.0, weighted = 0.0;
  for (size_t i = 0; i < logps.size(); ++i) {
    double w = std::exp(logps[i] - hi);
    mass += w;
    weighted += w * combos[i].segments();
  }
  return weighted / mass;
}

}  // namespace

std::vector<LabeledSegmentation> enumerate_segmentations(
    int m, int K, int L, bool null_self_allowed) {
  std::vector<LabeledSegmentation> out;
  LabeledSegmentation cur;
  extend(out, cur, 0, -1, m, K, L, null_self_allowed);
  return out;
}

double brute_loglik(const EncodedInstance& enc, const ModelParams& mp, int L) {
  auto combos = enumerate_segmentations(
      enc.m, enc.K, L, mp.cfg.allow_null_self_transition);
  NeuralScorer scorer(enc, mp);
  std::vector<double> logps;
  logps.reserve(combos.size());
  for (const auto& ls : combos) logps.push_back(scorer.score(ls));
  return fold_loglik(logps);
}

double brute_expected_segments(const EncodedInstance& enc,
                               const ModelParams& mp, int L) {
  auto combos = enumerate_segmentations(
      enc.m, enc.K, L, mp.cfg.allow_null_self_transition);
  NeuralScorer scorer(enc, mp);
  std::vector<double> logps;
  logps.reserve(combos.size());
  for (const auto& ls : combos) logps.push_back(scorer.score(ls));
  return fold_expected(logps, combos);
}

LabeledSegmentation brute_argmax(const EncodedInstance& enc,
                                 const ModelParams& mp, int L,
                                 double* best_logp) {
  auto combos = enumerate_segmentations(
      enc.m, enc.K, L, mp.cfg.allow_null_self_transition);
  NeuralScorer scorer(enc, mp);
  size_t best = 0;
  double best_lp = logspace::kNegInf;
  for (size_t i = 0; i < combos.size(); ++i) {
    double lp = scorer.score(combos[i]);
    if (lp > best_lp) {
      best_lp = lp;
      best = i;
    }
  }
  if (best_logp) *best_logp = best_lp;
  return combos[best];
}

double brute_loglik_tables(
    int m, int K, int L,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores,
    bool null_self_allowed) {
  auto combos = enumerate_segmentations(m, K, L, null_self_allowed);
  std::vector<double> logps;
  logps.reserve(combos.size());
  for (const auto& ls : combos)
    logps.push_back(table_score(ls, gen_scores, prior_scores, trans_scores));
  return fold_loglik(logps);
}

double brute_expected_segments_tables(
    int m, int K, int L,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores,
    bool null_self_allowed) {
  auto combos = enumerate_segmentations(m, K, L, null_self_allowed);
  std::vector<double> logps;
  logps.reserve(combos.size());
  for (const auto& ls : combos)
    logps.push_back(table_score(ls, gen_scores, prior_scores, trans_scores));
  return fold_expected(logps, combos);
}

}  // namespace segen
