#include "segen/generator.h"

#include <cassert>

#include "segen/corpus.h"

namespace segen {

using ad::Tape;
using ad::Var;

Attention masked_attention(Tape& tp, const Bound& b, const SourceEncoding& src,
                           Var d, int record_j, EvalCounter* counter) {
  Attention att;
  const std::vector<bool>& mask =
      src.record_masks[static_cast<size_t>(record_j)];
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) att.span_rows.push_back(static_cast<int>(i));
  if (att.span_rows.empty()) {
    att.null_record = true;
    const ad::Tensor& H = tp.tensor(src.H);
    att.context = tp.zeros(H.cols);
    return att;
  }
  Var u = tp.matvec(b.att_W, d);
  if (counter)
    counter->attention_scores += static_cast<long>(att.span_rows.size());
  Var scores = tp.row_scores(src.H, u, att.span_rows);
  att.weights = tp.softmax(scores);
  att.context = tp.weighted_rows(src.H, att.weights, att.span_rows);
  return att;
}

OutputDist output_distribution(Tape& tp, const Bound& b,
                               const EncodedInstance& enc, Var d,
                               const Attention& att) {
  OutputDist out;
  out.null_record = att.null_record;
  Var scores = tp.add(
      tp.add(tp.matvec(b.out_W1, d), tp.matvec(b.out_W2, att.context)),
      b.out_b);
  if (att.null_record) {
    out.log_probs = tp.log_softmax_ext(scores, enc.ext_size);
    return out;
  }
  Var pvocab = tp.softmax(scores);
  Var pgen_in = tp.s_add(tp.s_add(tp.s_dot(b.pgen_wd, d),
                                  tp.s_dot(b.pgen_wa, att.context)),
                         tp.pick(b.pgen_b, 0));
  out.pgen = tp.sigmoid_(pgen_in);
  std::vector<int> span_ext_ids;
  span_ext_ids.reserve(att.span_rows.size());
  for (int i : att.span_rows) {
    int ext = enc.source_ext_ids[static_cast<size_t>(i)];
    // The end-of-segment symbol can never be copied; the tokenizer keeps
    // it out of raw source text.
    assert(ext != Vocabulary::kEndOfSegment);
    span_ext_ids.push_back(ext);
  }
  out.log_probs = tp.mix_copy_log(pvocab, att.weights, out.pgen, span_ext_ids,
                                  enc.ext_size);
  return out;
}

LstmState decoder_step(Tape& tp, const Bound& b, const LstmState& prev,
                       int token_vocab_id) {
  assert(token_vocab_id != Vocabulary::kEndOfSegment);
  Var x = tp.lookup(b.embed, token_vocab_id);
  return lstm_step(tp, b.dec, x, prev);
}

DecoderChain build_decoder_chain(Tape& tp, const Bound& b,
                                 const ModelParams& mp,
                                 const EncodedInstance& enc,
                                 const SourceEncoding& src, bool train,
                                 Rng& drop_rng) {
  const double rate = mp.cfg.dropout;
  DecoderChain chain;
  chain.states.push_back(src.dec_init);
  chain.views.push_back(
      tp.dropout(src.dec_init.h, rate, drop_rng, train));
  for (int t = 0; t < enc.m; ++t) {
    Var x = tp.lookup(b.embed, enc.target_ids[static_cast<size_t>(t)]);
    x = tp.dropout(x, rate, drop_rng, train);
    LstmState next = lstm_step(tp, b.dec, x, chain.states.back());
    chain.states.push_back(next);
    chain.views.push_back(tp.dropout(next.h, rate, drop_rng, train));
  }
  return chain;
}

Var segment_logprob(Tape& tp, const Bound& b, const EncodedInstance& enc,
                    const SourceEncoding& src,
                    const std::vector<Var>& chain_views, int a, int b_, int j,
                    EvalCounter* counter) {
  assert(1 <= a && a <= b_ && b_ <= enc.m);
  std::vector<Var> terms;
  for (int t = a; t <= b_; ++t) {
    Var d = chain_views[static_cast<size_t>(t - 1)];
    Attention att = masked_attention(tp, b, src, d, j, counter);
    OutputDist dist = output_distribution(tp, b, enc, d, att);
    terms.push_back(
        tp.pick(dist.log_probs, enc.target_ext_ids[static_cast<size_t>(t - 1)]));
  }
  Var d_end = chain_views[static_cast<size_t>(b_)];
  Attention att = masked_attention(tp, b, src, d_end, j, counter);
  OutputDist dist = output_distribution(tp, b, enc, d_end, att);
  terms.push_back(tp.pick(dist.log_probs, Vocabulary::kEndOfSegment));
  return tp.s_sum(terms);
}

}  // namespace segen
