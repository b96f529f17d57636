#include "segen/params.h"

namespace segen {

namespace {

void fill_uniform(ad::Tensor& t, Rng& rng) {
  for (double& x : t.v) x = rng.uniform(-0.1, 0.1);
}

LstmParamIds add_lstm(ParamStore& store, const std::string& prefix, int hidden,
                      int input, Rng& rng) {
  LstmParamIds ids;
  auto weight = [&](const std::string& n, int r, int c) {
    int id = store.add(prefix + "_" + n, r, c);
    fill_uniform(store.value(id), rng);
    return id;
  };
  auto bias = [&](const std::string& n) { return store.add(prefix + "_" + n, hidden, 1); };
  ids.Wi = weight("Wi", hidden, input);
  ids.Wf = weight("Wf", hidden, input);
  ids.Wo = weight("Wo", hidden, input);
  ids.Wg = weight("Wg", hidden, input);
  ids.Ui = weight("Ui", hidden, hidden);
  ids.Uf = weight("Uf", hidden, hidden);
  ids.Uo = weight("Uo", hidden, hidden);
  ids.Ug = weight("Ug", hidden, hidden);
  ids.bi = bias("bi");
  ids.bf = bias("bf");
  ids.bo = bias("bo");
  ids.bg = bias("bg");
  return ids;
}

}  // namespace

ModelParams ModelParams::init(const Config& cfg, int vocab_size, Rng& rng) {
  ModelParams mp;
  mp.cfg = cfg;
  mp.vocab_size = vocab_size;
  const int H = cfg.hidden;
  const int E = cfg.embedding;
  const int V = vocab_size;
  ParamStore& s = mp.store;

  auto weight = [&](const std::string& n, int r, int c) {
    int id = s.add(n, r, c);
    fill_uniform(s.value(id), rng);
    return id;
  };
  auto bias = [&](const std::string& n, int r) { return s.add(n, r, 1); };

  mp.embed = weight("embed", V, E);
  mp.enc_fw = add_lstm(s, "enc_fw", H, E, rng);
  mp.enc_bw = add_lstm(s, "enc_bw", H, E, rng);
  mp.dec = add_lstm(s, "dec", H, E, rng);
  mp.init_h_W = weight("init_h_W", H, 2 * H);
  mp.init_h_b = bias("init_h_b", H);
  mp.init_c_W = weight("init_c_W", H, 2 * H);
  mp.init_c_b = bias("init_c_b", H);
  mp.att_W = weight("att_W", 2 * H, H);
  mp.out_W1 = weight("out_W1", V, H);
  mp.out_W2 = weight("out_W2", V, 2 * H);
  mp.out_b = bias("out_b", V);
  mp.pgen_wd = weight("pgen_wd", H, 1);
  mp.pgen_wa = weight("pgen_wa", 2 * H, 1);
  mp.pgen_b = bias("pgen_b", 1);
  mp.trans_M = weight("trans_M", E, 2 * H);
  mp.trans_N = weight("trans_N", E, H);
  mp.terminal_logit = bias("terminal_logit", 1);
  mp.quantize_f32();
  return mp;
}

void ModelParams::quantize_f32() {
  for (int i = 0; i < store.count(); ++i)
    for (double& x : store.value(i).v)
      x = static_cast<double>(static_cast<float>(x));
}

}  // namespace segen
