#include "segen/transition.h"

#include <numeric>

namespace segen {

using ad::Tape;
using ad::Var;

Var transition_logits(Tape& tp, const Bound& b, const SourceEncoding& src,
                      Var A_prev, Var d_prev, EvalCounter* counter) {
  Var u = tp.add(tp.matvec(b.trans_M, A_prev), tp.matvec(b.trans_N, d_prev));
  const int R = static_cast<int>(src.record_reprs.size());
  std::vector<int> all(static_cast<size_t>(R));
  std::iota(all.begin(), all.end(), 0);
  if (counter) counter->transition_scores += R;
  return tp.row_scores(src.record_matrix, u, all);
}

Var transition_log_distribution(Tape& tp, const Bound& b,
                                const SourceEncoding& src, Var A_prev,
                                Var d_prev, int prev_record,
                                bool allow_null_self, EvalCounter* counter) {
  Var logits = transition_logits(tp, b, src, A_prev, d_prev, counter);
  const int R = static_cast<int>(src.record_reprs.size());
  std::vector<bool> allowed(static_cast<size_t>(R), true);
  if (prev_record >= 0 && !(prev_record == 0 && allow_null_self))
    allowed[static_cast<size_t>(prev_record)] = false;
  return tp.log_softmax_masked(logits, allowed);
}

}  // namespace segen
