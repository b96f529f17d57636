#ifndef SEGEN_MODEL_H
#define SEGEN_MODEL_H

#include <vector>

#include "segen/params.h"
#include "segen/tape.h"

namespace segen {

// Counters for the per-step cost audit: attention scores touched per
// emitted token and record scores touched per transition.
struct EvalCounter {
  long attention_scores = 0;
  long transition_scores = 0;
};

struct BoundLstm {
  ad::Var Wi, Wf, Wo, Wg, Ui, Uf, Uo, Ug, bi, bf, bo, bg;
};

// All parameters of one model bound onto one tape as tracked leaves.
struct Bound {
  ad::Var embed;
  BoundLstm enc_fw, enc_bw, dec;
  ad::Var init_h_W, init_h_b, init_c_W, init_c_b;
  ad::Var att_W;
  ad::Var out_W1, out_W2, out_b;
  ad::Var pgen_wd, pgen_wa, pgen_b;
  ad::Var trans_M, trans_N;
  ad::Var terminal_logit;
};

Bound bind(ad::Tape& tp, const ModelParams& mp);

struct LstmState {
  ad::Var h, c;
};

LstmState lstm_step(ad::Tape& tp, const BoundLstm& p, ad::Var x,
                    const LstmState& prev);

}  // namespace segen

#endif
