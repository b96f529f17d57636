#ifndef SEGEN_TRANSITION_H
#define SEGEN_TRANSITION_H

#include "segen/encoder.h"
#include "segen/model.h"

namespace segen {

// Record-selection scores: score_j = f(r_j) . (M A_prev + N d_prev) over
// j in [0..K]. prev_record = -1 denotes the first segment, where A_prev is
// the zero vector, d_prev the decoder initial state, and nothing is masked.
ad::Var transition_logits(ad::Tape& tp, const Bound& b,
                          const SourceEncoding& src, ad::Var A_prev,
                          ad::Var d_prev, EvalCounter* counter = nullptr);

// Log-softmax over the logits with the self-transition ban applied: the
// previous record's entry carries exactly zero probability unless it is
// the null record and null self-transitions are enabled.
ad::Var transition_log_distribution(ad::Tape& tp, const Bound& b,
                                    const SourceEncoding& src, ad::Var A_prev,
                                    ad::Var d_prev, int prev_record,
                                    bool allow_null_self,
                                    EvalCounter* counter = nullptr);

}  // namespace segen

#endif
