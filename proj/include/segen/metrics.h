#ifndef SEGEN_METRICS_H
#define SEGEN_METRICS_H

#include <string>
#include <vector>

#include "segen/oracle.h"

namespace segen {

// Corpus-level BLEU with up-to-4-gram modified precision and a brevity
// penalty, one reference per hypothesis. Orders with no candidate n-grams
// anywhere in the corpus are dropped from the geometric mean, so very
// short corpora still score on the orders they can express. With
// smoothing off, a zero match count at any remaining order gives 0;
// with smoothing on, zero-match orders score (matches+1)/(candidates+1).
double bleu4(const std::vector<std::vector<std::string>>& hypotheses,
             const std::vector<std::vector<std::string>>& references,
             bool smoothing = false);

// Number of unique n-grams pooled across all hypotheses, an absolute
// count. Hypotheses shorter than n contribute nothing.
long distinct_ngrams(const std::vector<std::vector<std::string>>& hypotheses,
                     int n);

// Fraction of tokens whose predicted record label matches the gold label.
// The prediction labels tokens through its segment boundaries; gold is
// one record index per token. With exclude_null_gold set, tokens whose
// gold label is 0 leave the denominator. Length mismatch or an empty
// denominator is an error.
double alignment_accuracy(const LabeledSegmentation& predicted,
                          const std::vector<int>& gold,
                          bool exclude_null_gold = false);

}  // namespace segen

#endif
