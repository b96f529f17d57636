#include "segen/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace segen {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, long> ngram_counts(const std::vector<std::string>& tokens,
                                   int n) {
  std::map<Ngram, long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu4(const std::vector<std::vector<std::string>>& hypotheses,
             const std::vector<std::vector<std::string>>& references,
             bool smoothing) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument(
        "bleu4: hypothesis and reference lists differ in length");
  if (hypotheses.empty()) throw std::invalid_argument("bleu4: empty corpus");

  long hyp_len = 0, ref_len = 0;
  long matched[4] = {0, 0, 0, 0};
  long total[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& hyp = hypotheses[i];
    const auto& ref = references[i];
    hyp_len += static_cast<long>(hyp.size());
    ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= 4; ++n) {
      auto hc = ngram_counts(hyp, n);
      auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : hc) {
        total[n - 1] += count;
        auto it = rc.find(gram);
        if (it != rc.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  // Modified precision in log space over the orders the corpus can
  // express at all.
  double log_prec_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < 4; ++n) {
    if (total[n] == 0) continue;
    long num = matched[n];
    long den = total[n];
    if (num == 0) {
      if (!smoothing) return 0.0;
      num += 1;
      den += 1;
    }
    log_prec_sum += std::log(static_cast<double>(num) / den);
    ++orders;
  }
  if (orders == 0) return 0.0;  // every hypothesis empty

  double bp = 1.0;
  if (hyp_len < ref_len)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return bp * std::exp(log_prec_sum / orders);
}

long distinct_ngrams(const std::vector<std::vector<std::string>>& hypotheses,
                     int n) {
  if (n < 1) throw std::invalid_argument("distinct_ngrams: n must be >= 1");
  std::set<Ngram> grams;
  for (const auto& hyp : hypotheses) {
    if (static_cast<int>(hyp.size()) < n) continue;
    for (size_t i = 0; i + n <= hyp.size(); ++i)
      grams.insert(Ngram(hyp.begin() + i, hyp.begin() + i + n));
  }
  return static_cast<long>(grams.size());
}

double alignment_accuracy(const LabeledSegmentation& predicted,
                          const std::vector<int>& gold,
                          bool exclude_null_gold) {
  const int m = static_cast<int>(gold.size());
  if (predicted.boundaries.empty() || predicted.boundaries.back() != m)
    throw std::invalid_argument(
        "alignment_accuracy: prediction does not cover the gold tokens");
  std::vector<int> pred(m);
  int begin = 0;
  for (size_t s = 0; s < predicted.labels.size(); ++s) {
    const int end = predicted.boundaries[s];
    if (end <= begin || end > m)
      throw std::invalid_argument(
          "alignment_accuracy: malformed segment boundaries");
    for (int t = begin; t < end; ++t) pred[t] = predicted.labels[s];
    begin = end;
  }
  long hit = 0, scored = 0;
  for (int t = 0; t < m; ++t) {
    if (exclude_null_gold && gold[t] == 0) continue;
    ++scored;
    if (pred[t] == gold[t]) ++hit;
  }
  if (scored == 0)
    throw std::invalid_argument("alignment_accuracy: no scoreable tokens");
  return static_cast<double>(hit) / scored;
}

}  // namespace segen
