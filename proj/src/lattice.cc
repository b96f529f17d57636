#include "segen/lattice.h"

#include <cassert>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "segen/logspace.h"

namespace segen {

using ad::Tape;
using ad::Var;

Var boundary_transition_dist(Tape& tp, const Bound& b,
                             const SourceEncoding& src,
                             const DecoderChain& chain, int p, int prev_record,
                             bool allow_null_self, EvalCounter* counter) {
  if (p == 0) {
    Var zero_ctx = tp.zeros(tp.tensor(src.H).cols);
    return transition_log_distribution(tp, b, src, zero_ctx, chain.views[0],
                                       -1, allow_null_self, counter);
  }
  Attention att = masked_attention(
      tp, b, src, chain.views[static_cast<size_t>(p - 1)], prev_record,
      counter);
  return transition_log_distribution(tp, b, src, att.context,
                                     chain.views[static_cast<size_t>(p)],
                                     prev_record, allow_null_self, counter);
}

SegmentScoreCache precompute_segment_scores(Tape& tp, const Bound& b,
                                            const EncodedInstance& enc,
                                            const SourceEncoding& src,
                                            const DecoderChain& chain, int L,
                                            bool allow_null_self,
                                            EvalCounter* counter) {
  assert(L >= 1);
  const int m = enc.m;
  const int K = enc.K;
  SegmentScoreCache cache;
  cache.m = m;
  cache.K = K;
  cache.L = L;
  cache.allow_null_self = allow_null_self;

  // One output distribution per (decoder state, record): state t has
  // consumed y_1..y_t, so it emits y_{t+1} and closes segments ending at t.
  std::vector<std::vector<Var>> ylp(static_cast<size_t>(m) + 1);
  std::vector<std::vector<Var>> eolp(static_cast<size_t>(m) + 1);
  for (int t = 0; t <= m; ++t) {
    ylp[static_cast<size_t>(t)].resize(static_cast<size_t>(K) + 1);
    eolp[static_cast<size_t>(t)].resize(static_cast<size_t>(K) + 1);
    for (int j = 0; j <= K; ++j) {
      Attention att = masked_attention(
          tp, b, src, chain.views[static_cast<size_t>(t)], j, counter);
      OutputDist dist = output_distribution(tp, b, enc, chain.views[static_cast<size_t>(t)], att);
      if (t < m)
        ylp[static_cast<size_t>(t)][static_cast<size_t>(j)] = tp.pick(
            dist.log_probs, enc.target_ext_ids[static_cast<size_t>(t)]);
      if (t >= 1)
        eolp[static_cast<size_t>(t)][static_cast<size_t>(j)] =
            tp.pick(dist.log_probs, Vocabulary::kEndOfSegment);
    }
  }

  // gen(a, len, j): running token-factor sum plus the closing "$" factor.
  cache.gen.resize(static_cast<size_t>(m));
  for (int a = 1; a <= m; ++a) {
    int max_len = std::min(L, m - a + 1);
    auto& by_len = cache.gen[static_cast<size_t>(a - 1)];
    by_len.resize(static_cast<size_t>(max_len));
    std::vector<Var> core(static_cast<size_t>(K) + 1);
    for (int len = 1; len <= max_len; ++len) {
      int last = a + len - 1;  // 1-based index of the segment's last token
      by_len[static_cast<size_t>(len - 1)].resize(static_cast<size_t>(K) + 1);
      for (int j = 0; j <= K; ++j) {
        Var tok = ylp[static_cast<size_t>(last - 1)][static_cast<size_t>(j)];
        core[static_cast<size_t>(j)] =
            (len == 1) ? tok : tp.s_add(core[static_cast<size_t>(j)], tok);
        by_len[static_cast<size_t>(len - 1)][static_cast<size_t>(j)] =
            tp.s_add(core[static_cast<size_t>(j)],
                     eolp[static_cast<size_t>(last)][static_cast<size_t>(j)]);
      }
    }
  }

  cache.prior =
      boundary_transition_dist(tp, b, src, chain, 0, -1, allow_null_self,
                               counter);
  cache.trans.resize(m >= 2 ? static_cast<size_t>(m - 1) : 0);
  for (int p = 1; p <= m - 1; ++p) {
    auto& row = cache.trans[static_cast<size_t>(p - 1)];
    row.resize(static_cast<size_t>(K) + 1);
    for (int q = 0; q <= K; ++q)
      row[static_cast<size_t>(q)] = boundary_transition_dist(
          tp, b, src, chain, p, q, allow_null_self, counter);
  }
  return cache;
}

SegmentScoreCache cache_from_tables(
    Tape& tp, int m, int K, int L,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores,
    bool allow_null_self) {
  SegmentScoreCache cache;
  cache.m = m;
  cache.K = K;
  cache.L = L;
  cache.allow_null_self = allow_null_self;
  cache.gen.resize(static_cast<size_t>(m));
  for (int a = 1; a <= m; ++a) {
    int max_len = std::min(L, m - a + 1);
    auto& by_len = cache.gen[static_cast<size_t>(a - 1)];
    by_len.resize(static_cast<size_t>(max_len));
    for (int len = 1; len <= max_len; ++len) {
      by_len[static_cast<size_t>(len - 1)].resize(static_cast<size_t>(K) + 1);
      for (int j = 0; j <= K; ++j)
        by_len[static_cast<size_t>(len - 1)][static_cast<size_t>(j)] =
            tp.scalar(gen_scores[static_cast<size_t>(a - 1)]
                                [static_cast<size_t>(len - 1)]
                                [static_cast<size_t>(j)]);
    }
  }
  cache.prior = tp.constant_vector(prior_scores);
  cache.trans.resize(m >= 2 ? static_cast<size_t>(m - 1) : 0);
  for (int p = 1; p <= m - 1; ++p) {
    auto& row = cache.trans[static_cast<size_t>(p - 1)];
    row.resize(static_cast<size_t>(K) + 1);
    for (int q = 0; q <= K; ++q) {
      std::vector<double> scores =
          trans_scores[static_cast<size_t>(p)][static_cast<size_t>(q)];
      if (!(q == 0 && allow_null_self))
        scores[static_cast<size_t>(q)] = logspace::kNegInf;
      row[static_cast<size_t>(q)] = tp.constant_vector(scores);
    }
  }
  return cache;
}

ForwardLattice run_forward(Tape& tp, const SegmentScoreCache& cache,
                           bool with_expected, int beta_log_threshold) {
  if (cache.m == 0)
    throw std::invalid_argument("forward_loglik: target is empty (m = 0)");
  const int m = cache.m, K = cache.K, L = cache.L;
  ForwardLattice lat;
  lat.m = m;
  lat.K = K;
  lat.L = L;
  lat.beta_in_log = with_expected && m > beta_log_threshold;
  lat.alpha.assign(static_cast<size_t>(m),
                   std::vector<Var>(static_cast<size_t>(K) + 1));
  if (with_expected)
    lat.beta.assign(static_cast<size_t>(m),
                    std::vector<Var>(static_cast<size_t>(K) + 1));

  for (int i = 1; i <= m; ++i) {
    for (int j = 0; j <= K; ++j) {
      std::vector<Var> terms;
      std::vector<Var> count_terms;
      if (i <= L) {
        Var base = tp.s_add(tp.pick(cache.prior, j), cache.gen_at(1, i, j));
        terms.push_back(base);
        if (with_expected)
          count_terms.push_back(lat.beta_in_log ? base : tp.s_exp(base));
      }
      for (int p = std::max(1, i - L); p <= i - 1; ++p) {
        Var seg = cache.gen_at(p + 1, i - p, j);
        for (int q = 0; q <= K; ++q) {
          Var step = tp.s_add(tp.pick(cache.trans_at(p, q), j), seg);
          Var a_pq = lat.alpha[static_cast<size_t>(p - 1)][static_cast<size_t>(q)];
          terms.push_back(tp.s_add(a_pq, step));
          if (with_expected) {
            Var b_pq = lat.beta[static_cast<size_t>(p - 1)][static_cast<size_t>(q)];
            if (lat.beta_in_log)
              count_terms.push_back(tp.s_add(tp.log_add(b_pq, a_pq), step));
            else
              count_terms.push_back(tp.s_mul(
                  tp.s_add(b_pq, tp.s_exp(a_pq)), tp.s_exp(step)));
          }
        }
      }
      lat.alpha[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] =
          tp.log_sum_exp(terms);
      if (with_expected)
        lat.beta[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] =
            lat.beta_in_log ? tp.log_sum_exp(count_terms)
                            : tp.s_sum(count_terms);
    }
  }
  lat.loglik = tp.log_sum_exp(lat.alpha[static_cast<size_t>(m - 1)]);
  if (with_expected) {
    if (m == 1) {
      // Every labeling of a one-token target has exactly one segment; the
      // ratio is the constant 1 with no parameter dependence.
      lat.expected = tp.scalar(1.0);
    } else if (lat.beta_in_log) {
      Var total = tp.log_sum_exp(lat.beta[static_cast<size_t>(m - 1)]);
      lat.expected = tp.s_exp(tp.s_sub(total, lat.loglik));
    } else {
      Var total = tp.s_sum(lat.beta[static_cast<size_t>(m - 1)]);
      lat.expected = tp.s_mul(total, tp.s_exp(tp.s_neg(lat.loglik)));
    }
  }
  return lat;
}

Var forward_loglik(Tape& tp, const SegmentScoreCache& cache) {
  return run_forward(tp, cache, false).loglik;
}

Var expected_segments(Tape& tp, const SegmentScoreCache& cache,
                      int beta_log_threshold) {
  return run_forward(tp, cache, true, beta_log_threshold).expected;
}

Var training_loss(Tape& tp, const ForwardLattice& lat, double eta,
                  double gamma) {
  assert(eta >= 1.0);
  assert(gamma >= 0.0);
  Var nll = tp.s_neg(lat.loglik);
  if (std::isinf(gamma)) return nll;
  assert(lat.expected.idx >= 0);
  Var diff = tp.s_abs(tp.s_sub(lat.expected, tp.scalar(eta)));
  // Ties route through the gamma constant, keeping the band gradient-free.
  return tp.s_add(nll, tp.s_max(diff, tp.scalar(gamma)));
}

InstanceObjective instance_objective(Tape& tp, const Bound& b,
                                     const ModelParams& mp,
                                     const EncodedInstance& enc, double eta,
                                     double gamma, bool train, Rng& drop_rng,
                                     EvalCounter* counter) {
  SourceEncoding src = encode_source(tp, b, mp, enc, train, drop_rng);
  DecoderChain chain = build_decoder_chain(tp, b, mp, enc, src, train,
                                           drop_rng);
  SegmentScoreCache cache = precompute_segment_scores(
      tp, b, enc, src, chain, mp.cfg.max_segment_len,
      mp.cfg.allow_null_self_transition, counter);
  InstanceObjective obj;
  obj.lattice = run_forward(tp, cache, true);
  double eta_r = eta > 0.0 ? eta : static_cast<double>(enc.K);
  obj.loss = training_loss(tp, obj.lattice, eta_r, gamma);
  obj.loglik_value = tp.val(obj.lattice.loglik);
  obj.expected_value = tp.val(obj.lattice.expected);
  obj.regularizer_value = tp.val(obj.loss) + obj.loglik_value;
  return obj;
}

void dump_lattice(std::ostream& os, const Tape& tp, const ForwardLattice& lat) {
  os << std::setprecision(12);
  os << "alpha";
  for (int j = 0; j <= lat.K; ++j) os << "\tr" << j;
  os << "\n";
  for (int i = 1; i <= lat.m; ++i) {
    os << i;
    for (int j = 0; j <= lat.K; ++j)
      os << "\t"
         << tp.val(lat.alpha[static_cast<size_t>(i - 1)][static_cast<size_t>(j)]);
    os << "\n";
  }
  if (lat.beta.empty()) return;
  os << (lat.beta_in_log ? "beta_log" : "beta");
  for (int j = 0; j <= lat.K; ++j) os << "\tr" << j;
  os << "\n";
  for (int i = 1; i <= lat.m; ++i) {
    os << i;
    for (int j = 0; j <= lat.K; ++j)
      os << "\t"
         << tp.val(lat.beta[static_cast<size_t>(i - 1)][static_cast<size_t>(j)]);
    os << "\n";
  }
}

}  // namespace segen
