#include "segen/model.h"

namespace segen {

using ad::Tape;
using ad::Var;

namespace {

BoundLstm bind_lstm(Tape& tp, const ParamStore& s, const LstmParamIds& ids) {
  BoundLstm b;
  auto p = [&](int id) { return tp.param(s.value(id), id); };
  b.Wi = p(ids.Wi);
  b.Wf = p(ids.Wf);
  b.Wo = p(ids.Wo);
  b.Wg = p(ids.Wg);
  b.Ui = p(ids.Ui);
  b.Uf = p(ids.Uf);
  b.Uo = p(ids.Uo);
  b.Ug = p(ids.Ug);
  b.bi = p(ids.bi);
  b.bf = p(ids.bf);
  b.bo = p(ids.bo);
  b.bg = p(ids.bg);
  return b;
}

}  // namespace

Bound bind(Tape& tp, const ModelParams& mp) {
  const ParamStore& s = mp.store;
  auto p = [&](int id) { return tp.param(s.value(id), id); };
  Bound b;
  b.embed = p(mp.embed);
  b.enc_fw = bind_lstm(tp, s, mp.enc_fw);
  b.enc_bw = bind_lstm(tp, s, mp.enc_bw);
  b.dec = bind_lstm(tp, s, mp.dec);
  b.init_h_W = p(mp.init_h_W);
  b.init_h_b = p(mp.init_h_b);
  b.init_c_W = p(mp.init_c_W);
  b.init_c_b = p(mp.init_c_b);
  b.att_W = p(mp.att_W);
  b.out_W1 = p(mp.out_W1);
  b.out_W2 = p(mp.out_W2);
  b.out_b = p(mp.out_b);
  b.pgen_wd = p(mp.pgen_wd);
  b.pgen_wa = p(mp.pgen_wa);
  b.pgen_b = p(mp.pgen_b);
  b.trans_M = p(mp.trans_M);
  b.trans_N = p(mp.trans_N);
  b.terminal_logit = p(mp.terminal_logit);
  return b;
}

LstmState lstm_step(Tape& tp, const BoundLstm& p, Var x,
                    const LstmState& prev) {
  auto gate = [&](Var W, Var U, Var b) {
    return tp.add(tp.add(tp.matvec(W, x), tp.matvec(U, prev.h)), b);
  };
  Var i = tp.sigmoid_(gate(p.Wi, p.Ui, p.bi));
  Var f = tp.sigmoid_(gate(p.Wf, p.Uf, p.bf));
  Var o = tp.sigmoid_(gate(p.Wo, p.Uo, p.bo));
  Var g = tp.tanh_(gate(p.Wg, p.Ug, p.bg));
  LstmState next;
  next.c = tp.add(tp.cmul(f, prev.c), tp.cmul(i, g));
  next.h = tp.cmul(o, tp.tanh_(next.c));
  return next;
}

}  // namespace segen
