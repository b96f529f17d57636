#ifndef SEGEN_ORACLE_H
#define SEGEN_ORACLE_H

#include <vector>

#include "segen/corpus.h"
#include "segen/params.h"

namespace segen {

// One complete hypothesis over the reference: cut positions (1-based
// segment ends, the last always m) and one record label per segment.
struct LabeledSegmentation {
  std::vector<int> boundaries;
  std::vector<int> labels;
  int segments() const { return static_cast<int>(labels.size()); }
};

// Exhaustive, duplicate-free enumeration of every valid labeled
// segmentation: nonempty segments of length <= L covering y_1..y_m, no
// record repeated back-to-back. `null_self_allowed` lifts that ban for
// the null record only, matching the transition mask. Throws when the
// total would exceed 10^6, with instructions to shrink the instance.
std::vector<LabeledSegmentation> enumerate_segmentations(
    int m, int K, int L, bool null_self_allowed);

// Reference quantities computed by summing over the full enumeration,
// scoring each hypothesis with the same attention, output, and transition
// calls the lattice caches. No per-instance reuse: every hypothesis is
// priced from scratch, so agreement with the recursions tests only DP
// structure.
double brute_loglik(const EncodedInstance& enc, const ModelParams& mp, int L);
double brute_expected_segments(const EncodedInstance& enc,
                               const ModelParams& mp, int L);
// Highest-scoring hypothesis; ties resolved toward earlier enumeration
// order (shorter first segments, then lower record indices).
LabeledSegmentation brute_argmax(const EncodedInstance& enc,
                                 const ModelParams& mp, int L,
                                 double* best_logp = nullptr);

// Table-scored variants for closed-form toys, mirroring
// lattice::cache_from_tables: gen[a-1][len-1][j], trans[p][q][j] with row
// p = 0 holding the first-segment scores.
double brute_loglik_tables(
    int m, int K, int L,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores,
    bool null_self_allowed = false);
double brute_expected_segments_tables(
    int m, int K, int L,
    const std::vector<std::vector<std::vector<double>>>& gen_scores,
    const std::vector<double>& prior_scores,
    const std::vector<std::vector<std::vector<double>>>& trans_scores,
    bool null_self_allowed = false);

}  // namespace segen

#endif
