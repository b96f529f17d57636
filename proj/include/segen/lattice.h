#ifndef SEGEN_LATTICE_H
#define SEGEN_LATTICE_H

#include <iosfwd>
#include <vector>

#include "segen/generator.h"
#include "segen/transition.h"

namespace segen {

// All per-instance scores the semi-Markov recursions consume, computed
// from a single decoder pass over y_1..y_m. gen(a,len,j) is built by
// extending gen(a,len-1,j) with one token factor and swapping the
// end-of-segment factor, so the longest segment's work is shared by every
// shorter prefix; each entry still equals a fresh segment_logprob call
// within 1e-12.
struct SegmentScoreCache {
  int m = 0, K = 0, L = 0;
  bool allow_null_self = false;
  ad::Var prior;                            // (K+1) log-dist over the first record
  std::vector<std::vector<ad::Var>> trans;  // [p-1][q] -> (K+1) log-dist, p = 1..m-1
  // [a-1][len-1][j], a = 1..m, len = 1..min(L, m-a+1)
  std::vector<std::vector<std::vector<ad::Var>>> gen;

  ad::Var gen_at(int a, int len, int j) const {
    return gen[static_cast<size_t>(a - 1)][static_cast<size_t>(len - 1)]
              [static_cast<size_t>(j)];
  }
  ad::Var trans_at(int p, int q) const {
    return trans[static_cast<size_t>(p - 1)][static_cast<size_t>(q)];
  }
};

// The transition distribution taken at boundary p: the new record is
// scored against the attention state under which y_p was emitted (zero
// for p = 0, i.e. the first segment, which is also unmasked) and the
// decoder state that has consumed y_1..y_p. Both the cache and the
// brute-force reference call this one function, so their comparisons
// exercise only the recursion logic.
ad::Var boundary_transition_dist(ad::Tape& tp, const Bound& b,
                                 const SourceEncoding& src,
                                 const DecoderChain& chain, int p,
                                 int prev_record, bool allow_null_self,
                                 EvalCounter* counter = nullptr);

SegmentScoreCache precompute_segment_scores(ad::Tape& tp, const Bound& b,
                                            const EncodedInstance& enc,
                                            const SourceEncoding& src,
                                            const DecoderChain& chain, int L,
                                            bool allow_null_self,
                                            EvalCounter* counter = nullptr);

// Handcrafted score tables for closed-form tests: gen[a-1][len-1][j] and
// trans[p][q][j] (p = 0 holds the first-segment scores, q ignored there).
// Scores are plain log values; the self-transition ban is applied here the
// same way the model applies it.
SegmentScoreCache cache_from_tables(
    ad::Tape& tp, int m, int K, int L,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores,
    bool allow_null_self = false);

// alpha[i-1][j] = log p(y_1..y_i, last segment labeled j); beta carries
// the companion segment-count accumulator, linear-valued by default and
// log-valued for long targets (counts are positive, so no signs needed).
struct ForwardLattice {
  int m = 0, K = 0, L = 0;
  std::vector<std::vector<ad::Var>> alpha;
  std::vector<std::vector<ad::Var>> beta;
  bool beta_in_log = false;
  ad::Var loglik;    // log sum_j alpha(m, j)
  ad::Var expected;  // E[#segments]; unset unless requested
};

// beta_log_threshold: targets longer than this run the count recursion in
// log space; at or below it, linear space is exact enough and clearer.
ForwardLattice run_forward(ad::Tape& tp, const SegmentScoreCache& cache,
                           bool with_expected, int beta_log_threshold = 64);

ad::Var forward_loglik(ad::Tape& tp, const SegmentScoreCache& cache);
ad::Var expected_segments(ad::Tape& tp, const SegmentScoreCache& cache,
                          int beta_log_threshold = 64);

// loss = -loglik + max(|E[#segments] - eta|, gamma). Inside the band the
// max saturates at the constant gamma, so the regularizer contributes no
// gradient there (ties included). An infinite gamma drops the term
// entirely instead of poisoning the loss value.
ad::Var training_loss(ad::Tape& tp, const ForwardLattice& lat, double eta,
                      double gamma);

// Convenience: full per-instance objective from raw inputs. eta <= 0
// resolves to the instance's record count.
struct InstanceObjective {
  ForwardLattice lattice;
  ad::Var loss;
  double loglik_value = 0.0;
  double expected_value = 0.0;
  double regularizer_value = 0.0;
};

InstanceObjective instance_objective(ad::Tape& tp, const Bound& b,
                                     const ModelParams& mp,
                                     const EncodedInstance& enc, double eta,
                                     double gamma, bool train, Rng& drop_rng,
                                     EvalCounter* counter = nullptr);

// Tab-separated alpha and beta tables, one row per target position.
void dump_lattice(std::ostream& os, const ad::Tape& tp,
                  const ForwardLattice& lat);

}  // namespace segen

#endif
