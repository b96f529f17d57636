#include "segen/decoder.h"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "segen/logspace.h"

namespace segen {

namespace {

struct Candidate {
  size_t parent;
  DecodeStep::Kind kind;
  int value;
  double score;         // child total after taking this decision
  double lp = 0.0;      // this decision's own log-probability
  ad::Var att_context;  // kToken only: context active at this emission
  long att_delta = 0;
  long trans_delta = 0;
};

// Deterministic beam order: higher score first. Totals pinned at -inf
// (forced repeats) fall back to the per-decision probability so emission
// still follows the model. Remaining ties prefer continuing over
// finishing, then the lower record index or token id.
bool candidate_before(const Candidate& x, const Candidate& y) {
  if (x.score != y.score) return x.score > y.score;
  if (x.lp != y.lp) return x.lp > y.lp;
  bool xt = x.kind == DecodeStep::kTerminal;
  bool yt = y.kind == DecodeStep::kTerminal;
  if (xt != yt) return yt;
  if (x.value != y.value) return x.value < y.value;
  return x.parent < y.parent;
}

struct Ctx {
  ad::Tape tp;
  Bound b;
  const EncodedInstance& enc;
  const ModelParams& mp;
  SourceEncoding src;
  EvalCounter* counter;
  int L;
  bool allow_null_self;

  Ctx(const EncodedInstance& e, const ModelParams& m, EvalCounter* c)
      : enc(e), mp(m), counter(c) {
    b = bind(tp, mp);
    Rng rr(0);
    src = encode_source(tp, b, mp, enc, false, rr);
    L = mp.cfg.max_segment_len;
    allow_null_self = mp.cfg.allow_null_self_transition;
  }

  Hypothesis root() {
    Hypothesis h;
    h.state = src.dec_init;
    h.used.assign(static_cast<size_t>(enc.K) + 1, false);
    h.last_att = tp.zeros(tp.tensor(src.H).cols);
    return h;
  }

  bool record_legal(const Hypothesis& h, int j, DecodeMode mode) const {
    int prev = h.labels.empty() ? -1 : h.labels.back();
    if (j == prev && !(j == 0 && allow_null_self)) return false;
    if (mode != DecodeMode::kBase && j > 0 && h.used[static_cast<size_t>(j)])
      return false;
    return true;
  }

  bool coverage_met(const Hypothesis& h, DecodeMode mode) const {
    if (mode != DecodeMode::kRM) return true;
    for (int j = 1; j <= enc.K; ++j)
      if (!h.used[static_cast<size_t>(j)]) return false;
    return true;
  }

  // Record scores with the terminal choice appended; masked log-softmax in
  // plain doubles (nothing at decode time needs gradients).
  std::vector<double> transition_choice_logprobs(
      const Hypothesis& h, const std::vector<bool>& allowed) {
    ad::Var logits =
        transition_logits(tp, b, src, h.last_att, h.state.h, counter);
    std::vector<double> scores = tp.tensor(logits).v;
    scores.push_back(tp.val(b.terminal_logit));
    double hi = logspace::kNegInf;
    for (size_t i = 0; i < scores.size(); ++i)
      if (allowed[i]) hi = std::max(hi, scores[i]);
    std::vector<double> lp(scores.size(), logspace::kNegInf);
    if (std::isinf(hi)) return lp;
    double z = 0.0;
    for (size_t i = 0; i < scores.size(); ++i)
      if (allowed[i]) z += std::exp(scores[i] - hi);
    for (size_t i = 0; i < scores.size(); ++i)
      if (allowed[i]) lp[i] = scores[i] - hi - std::log(z);
    return lp;
  }

  void expand_transition(const Hypothesis& h, size_t parent, DecodeMode mode,
                         int max_len, std::vector<Candidate>& out) {
    long att0 = counter ? counter->attention_scores : 0;
    long trans0 = counter ? counter->transition_scores : 0;
    bool can_open = static_cast<int>(h.tokens.size()) < max_len;
    std::vector<bool> allowed(static_cast<size_t>(enc.K) + 2, false);
    for (int j = 0; j <= enc.K; ++j)
      allowed[static_cast<size_t>(j)] = can_open && record_legal(h, j, mode);
    allowed[static_cast<size_t>(enc.K) + 1] =
        !h.labels.empty() && coverage_met(h, mode);
    bool any = false;
    for (bool a : allowed) any = any || a;
    if (!any) return;

    std::vector<double> lp = transition_choice_logprobs(h, allowed);
    long att_delta = counter ? counter->attention_scores - att0 : 0;
    long trans_delta = counter ? counter->transition_scores - trans0 : 0;
    for (int j = 0; j <= enc.K + 1; ++j) {
      if (!allowed[static_cast<size_t>(j)] ||
          std::isinf(lp[static_cast<size_t>(j)]))
        continue;
      Candidate c;
      c.parent = parent;
      c.kind = (j == enc.K + 1) ? DecodeStep::kTerminal : DecodeStep::kTransition;
      c.value = (j == enc.K + 1) ? -1 : j;
      c.lp = lp[static_cast<size_t>(j)];
      c.score = h.score + c.lp;
      c.att_delta = att_delta;
      c.trans_delta = trans_delta;
      out.push_back(c);
    }
  }

  // Forced structures take the next record from the caller's order and
  // keep the training-time transition distribution (self-move ban, no
  // terminal competitor); only the closing terminal choice is scored the
  // way free decoding scores it. A forced consecutive repeat keeps its
  // -inf score rather than being rejected.
  void expand_forced_transition(const Hypothesis& h, size_t parent,
                                const std::vector<int>& order, int max_len,
                                std::vector<Candidate>& out) {
    long att0 = counter ? counter->attention_scores : 0;
    long trans0 = counter ? counter->transition_scores : 0;
    size_t next = h.labels.size();
    bool can_open = static_cast<int>(h.tokens.size()) < max_len;
    std::vector<bool> allowed(static_cast<size_t>(enc.K) + 2, false);
    for (int j = 0; j <= enc.K; ++j)
      allowed[static_cast<size_t>(j)] =
          record_legal(h, j, DecodeMode::kBase) && can_open;
    if (next >= order.size()) {
      allowed[static_cast<size_t>(enc.K) + 1] = true;
      std::vector<double> lp = transition_choice_logprobs(h, allowed);
      Candidate c;
      c.parent = parent;
      c.kind = DecodeStep::kTerminal;
      c.value = -1;
      c.lp = lp[static_cast<size_t>(enc.K) + 1];
      c.score = h.score + c.lp;
      c.att_delta = counter ? counter->attention_scores - att0 : 0;
      c.trans_delta = counter ? counter->transition_scores - trans0 : 0;
      out.push_back(c);
      return;
    }
    std::vector<double> lp = transition_choice_logprobs(h, allowed);
    int j = order[next];
    Candidate c;
    c.parent = parent;
    c.kind = DecodeStep::kTransition;
    c.value = j;
    c.lp = lp[static_cast<size_t>(j)];
    c.score = h.score + c.lp;
    c.att_delta = counter ? counter->attention_scores - att0 : 0;
    c.trans_delta = counter ? counter->transition_scores - trans0 : 0;
    out.push_back(c);
  }

  void expand_emission(const Hypothesis& h, size_t parent, int max_len,
                       std::vector<Candidate>& out) {
    long att0 = counter ? counter->attention_scores : 0;
    Attention att = masked_attention(tp, b, src, h.state.h, h.open_record,
                                     counter);
    OutputDist dist = output_distribution(tp, b, enc, h.state.h, att);
    long att_delta = counter ? counter->attention_scores - att0 : 0;
    const std::vector<double>& lp = tp.tensor(dist.log_probs).v;
    bool close_legal = h.open_len >= 1;
    bool token_legal = h.open_len < L &&
                       static_cast<int>(h.tokens.size()) < max_len;
    for (int w = 0; w < enc.ext_size; ++w) {
      if (w == Vocabulary::kEndOfText) continue;  // reserved for terminal
      bool is_close = (w == Vocabulary::kEndOfSegment);
      if (is_close ? !close_legal : !token_legal) continue;
      if (std::isinf(lp[static_cast<size_t>(w)])) continue;
      Candidate c;
      c.parent = parent;
      c.kind = is_close ? DecodeStep::kCloseSegment : DecodeStep::kToken;
      c.value = w;
      c.lp = lp[static_cast<size_t>(w)];
      c.score = h.score + c.lp;
      c.att_context = att.context;
      c.att_delta = att_delta;
      out.push_back(c);
    }
  }

  Hypothesis apply(const Hypothesis& parent, const Candidate& c) {
    Hypothesis child = parent;
    child.score = c.score;
    child.steps.push_back(
        {c.kind, c.value, c.att_delta, c.trans_delta});
    switch (c.kind) {
      case DecodeStep::kTransition:
        child.open_record = c.value;
        child.open_len = 0;
        child.labels.push_back(c.value);
        if (c.value > 0) child.used[static_cast<size_t>(c.value)] = true;
        break;
      case DecodeStep::kTerminal:
        child.finished = true;
        break;
      case DecodeStep::kCloseSegment:
        child.boundaries.push_back(static_cast<int>(child.tokens.size()));
        child.open_record = -1;
        child.open_len = 0;
        break;
      case DecodeStep::kToken: {
        child.tokens.push_back(c.value);
        child.open_len += 1;
        child.last_att = c.att_context;
        int vocab_id = c.value < mp.vocab_size ? c.value : Vocabulary::kUnk;
        child.state = decoder_step(tp, b, child.state, vocab_id);
        break;
      }
    }
    return child;
  }
};

Hypothesis best_of(const std::vector<Hypothesis>& hyps) {
  size_t best = 0;
  for (size_t i = 1; i < hyps.size(); ++i)
    if (hyps[i].score > hyps[best].score) best = i;
  return hyps[best];
}

Hypothesis search(Ctx& ctx, DecodeMode mode, int beam, int max_len,
                  const std::vector<int>* forced_order) {
  assert(beam >= 1);
  assert(max_len >= 1);
  std::vector<Hypothesis> active{ctx.root()};
  std::vector<Hypothesis> done;
  std::vector<Hypothesis> dead;

  while (!active.empty()) {
    std::vector<Candidate> cands;
    for (size_t i = 0; i < active.size(); ++i) {
      const Hypothesis& h = active[i];
      size_t before = cands.size();
      if (h.open_record < 0) {
        if (forced_order) {
          ctx.expand_forced_transition(h, i, *forced_order, max_len, cands);
        } else {
          ctx.expand_transition(h, i, mode, max_len, cands);
        }
      } else {
        ctx.expand_emission(h, i, max_len, cands);
      }
      if (cands.size() == before) dead.push_back(h);
    }
    std::sort(cands.begin(), cands.end(), candidate_before);
    if (static_cast<size_t>(beam) < cands.size()) cands.resize(static_cast<size_t>(beam));

    std::vector<Hypothesis> next;
    for (const Candidate& c : cands) {
      Hypothesis child = ctx.apply(active[c.parent], c);
      if (child.finished)
        done.push_back(std::move(child));
      else
        next.push_back(std::move(child));
    }
    if (!done.empty()) {
      double bar = best_of(done).score;
      std::vector<Hypothesis> kept;
      for (Hypothesis& h : next)
        if (h.score > bar) kept.push_back(std::move(h));
      next = std::move(kept);
    }
    active = std::move(next);
  }

  if (done.empty()) {
    Hypothesis partial = dead.empty() ? ctx.root() : best_of(dead);
    throw IncompleteCoverageError(
        "decode: no hypothesis satisfied the coverage requirement within the "
        "token budget",
        std::move(partial));
  }
  return best_of(done);
}

}  // namespace

Hypothesis decode(const EncodedInstance& enc, const ModelParams& mp,
                  DecodeMode mode, int beam, int max_len,
                  EvalCounter* counter) {
  Ctx ctx(enc, mp, counter);
  return search(ctx, mode, beam, max_len, nullptr);
}

Hypothesis forced_structure_decode(const EncodedInstance& enc,
                                   const ModelParams& mp,
                                   const std::vector<int>& record_order,
                                   int beam, int max_len,
                                   EvalCounter* counter) {
  if (record_order.empty())
    throw std::invalid_argument("forced_structure_decode: empty record order");
  for (int j : record_order)
    if (j < 0 || j > enc.K)
      throw std::invalid_argument(
          "forced_structure_decode: record index " + std::to_string(j) +
          " outside [0.." + std::to_string(enc.K) + "]");
  Ctx ctx(enc, mp, counter);
  Hypothesis out = search(ctx, DecodeMode::kBase, beam, max_len,
                          &record_order);
  std::vector<int> seen(static_cast<size_t>(enc.K) + 1, 0);
  for (int j : record_order)
    if (j > 0 && ++seen[static_cast<size_t>(j)] == 2) out.has_repeat = true;
  return out;
}

LabeledSegmentation viterbi_align(const EncodedInstance& enc,
                                  const ModelParams& mp, int L,
                                  double* score) {
  ad::Tape tp;
  Bound b = bind(tp, mp);
  Rng rr(0);
  SourceEncoding src = encode_source(tp, b, mp, enc, false, rr);
  DecoderChain chain = build_decoder_chain(tp, b, mp, enc, src, false, rr);
  SegmentScoreCache cache =
      precompute_segment_scores(tp, b, enc, src, chain, L,
                                mp.cfg.allow_null_self_transition);
  const int m = enc.m, K = enc.K;
  const double ninf = logspace::kNegInf;
  std::vector<std::vector<double>> best(
      static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(K) + 1, ninf));
  // Backpointer: previous boundary and record; -1 marks the base case.
  std::vector<std::vector<std::pair<int, int>>> from(
      static_cast<size_t>(m),
      std::vector<std::pair<int, int>>(static_cast<size_t>(K) + 1, {-1, -1}));

  for (int i = 1; i <= m; ++i) {
    for (int j = 0; j <= K; ++j) {
      double& cell = best[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
      if (i <= L) {
        cell = tp.tensor(cache.prior).v[static_cast<size_t>(j)] +
               tp.val(cache.gen_at(1, i, j));
      }
      for (int p = std::max(1, i - L); p <= i - 1; ++p) {
        double seg = tp.val(cache.gen_at(p + 1, i - p, j));
        for (int q = 0; q <= K; ++q) {
          double cand =
              best[static_cast<size_t>(p - 1)][static_cast<size_t>(q)] +
              tp.tensor(cache.trans_at(p, q)).v[static_cast<size_t>(j)];
          cand += seg;
          if (cand > cell) {
            cell = cand;
            from[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] = {p, q};
          }
        }
      }
    }
  }

  int arg = 0;
  for (int j = 1; j <= K; ++j)
    if (best[static_cast<size_t>(m - 1)][static_cast<size_t>(j)] >
        best[static_cast<size_t>(m - 1)][static_cast<size_t>(arg)])
      arg = j;
  if (score) *score = best[static_cast<size_t>(m - 1)][static_cast<size_t>(arg)];

  LabeledSegmentation ls;
  int i = m, j = arg;
  while (i > 0) {
    ls.boundaries.push_back(i);
    ls.labels.push_back(j);
    auto [p, q] = from[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
    if (p < 0) break;
    i = p;
    j = q;
  }
  std::reverse(ls.boundaries.begin(), ls.boundaries.end());
  std::reverse(ls.labels.begin(), ls.labels.end());
  return ls;
}

std::string surface_of(int ext_id, const Vocabulary& vocab,
                       const EncodedInstance& enc) {
  if (ext_id < vocab.size()) return vocab.token(ext_id);
  return enc.ext_surfaces[static_cast<size_t>(ext_id - vocab.size())];
}

}  // namespace segen
