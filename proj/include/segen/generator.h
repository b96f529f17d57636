#ifndef SEGEN_GENERATOR_H
#define SEGEN_GENERATOR_H

#include <vector>

#include "segen/encoder.h"
#include "segen/model.h"

namespace segen {

// Attention over one record's source span. For the null record there is
// nothing to attend to: the context is the zero vector and no weights
// exist, which is what makes null segments pure language modeling.
struct Attention {
  ad::Var context;             // (2H)
  ad::Var weights;             // softmax over span_rows; unset when null
  std::vector<int> span_rows;  // attended source positions, empty when null
  bool null_record = false;
};

Attention masked_attention(ad::Tape& tp, const Bound& b,
                           const SourceEncoding& src, ad::Var d, int record_j,
                           EvalCounter* counter = nullptr);

// Copy-augmented output distribution over the extended vocabulary.
// p(w) = p_gen p_vocab(w) + (1-p_gen) sum of attention on source copies
// of w; for the null record the copy branch is empty and p_gen is pinned
// at 1 so the distribution still sums to one.
struct OutputDist {
  ad::Var log_probs;  // length ext_size
  ad::Var pgen;       // unset when null_record
  bool null_record = false;
};

OutputDist output_distribution(ad::Tape& tp, const Bound& b,
                               const EncodedInstance& enc, ad::Var d,
                               const Attention& att);

// One recurrent update consuming a real token (never the end-of-segment
// symbol: segmentation must not influence decoder state).
LstmState decoder_step(ad::Tape& tp, const Bound& b, const LstmState& prev,
                       int token_vocab_id);

// States D_0..D_m where D_0 is the projected encoder summary and D_t has
// consumed y_1..y_t. `views` are the dropout-visible copies of each h used
// by attention, output, and transition layers; the recurrent chain itself
// stays clean.
struct DecoderChain {
  std::vector<LstmState> states;
  std::vector<ad::Var> views;
};

DecoderChain build_decoder_chain(ad::Tape& tp, const Bound& b,
                                 const ModelParams& mp,
                                 const EncodedInstance& enc,
                                 const SourceEncoding& src, bool train,
                                 Rng& drop_rng);

// log p(y_a..y_b, then "$" | record j), naive step-by-step evaluation.
// Positions are 1-based inclusive; chain_views must hold D_0..D_m.
ad::Var segment_logprob(ad::Tape& tp, const Bound& b,
                        const EncodedInstance& enc, const SourceEncoding& src,
                        const std::vector<ad::Var>& chain_views, int a, int b_,
                        int j, EvalCounter* counter = nullptr);

}  // namespace segen

#endif
