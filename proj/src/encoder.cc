#include "segen/encoder.h"

#include <cassert>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace segen {

using ad::Tape;
using ad::Var;

Var record_repr(Tape& tp, Var embed_table, int emb_size,
                const std::vector<int>& token_ids) {
  if (token_ids.empty()) return tp.zeros(emb_size);
  std::vector<Var> rows;
  rows.reserve(token_ids.size());
  for (int id : token_ids) rows.push_back(tp.lookup(embed_table, id));
  return tp.maxpool(rows);
}

SourceEncoding encode_source(Tape& tp, const Bound& b, const ModelParams& mp,
                             const EncodedInstance& enc, bool train,
                             Rng& drop_rng) {
  const int n = static_cast<int>(enc.source_ids.size());
  assert(n >= 1);
  const int H = mp.cfg.hidden;
  const double rate = mp.cfg.dropout;

  std::vector<Var> emb(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Var e = tp.lookup(b.embed, enc.source_ids[static_cast<size_t>(i)]);
    emb[static_cast<size_t>(i)] = tp.dropout(e, rate, drop_rng, train);
  }

  std::vector<Var> fw(static_cast<size_t>(n)), bw(static_cast<size_t>(n));
  LstmState st{tp.zeros(H), tp.zeros(H)};
  for (int i = 0; i < n; ++i) {
    st = lstm_step(tp, b.enc_fw, emb[static_cast<size_t>(i)], st);
    fw[static_cast<size_t>(i)] = st.h;
  }
  LstmState fw_final = st;
  st = LstmState{tp.zeros(H), tp.zeros(H)};
  for (int i = n - 1; i >= 0; --i) {
    st = lstm_step(tp, b.enc_bw, emb[static_cast<size_t>(i)], st);
    bw[static_cast<size_t>(i)] = st.h;
  }
  LstmState bw_final = st;

  std::vector<Var> h_rows(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Var h = tp.concat(fw[static_cast<size_t>(i)], bw[static_cast<size_t>(i)]);
    h_rows[static_cast<size_t>(i)] = tp.dropout(h, rate, drop_rng, train);
  }

  SourceEncoding out;
  out.n = n;
  out.H = tp.stack_rows(h_rows);

  // Record representations pool over raw embeddings, not the dropped-out
  // encoder inputs, so they stay deterministic given parameters.
  out.record_reprs.reserve(enc.spans.size());
  for (const auto& [begin, end] : enc.spans) {
    std::vector<int> ids;
    for (int i = begin; i < end; ++i)
      ids.push_back(enc.source_ids[static_cast<size_t>(i)]);
    out.record_reprs.push_back(record_repr(tp, b.embed, mp.cfg.embedding, ids));
  }
  out.record_matrix = tp.stack_rows(out.record_reprs);

  out.record_masks.resize(enc.spans.size());
  for (size_t j = 0; j < enc.spans.size(); ++j) {
    out.record_masks[j].assign(static_cast<size_t>(n), false);
    for (int i = enc.spans[j].first; i < enc.spans[j].second; ++i)
      out.record_masks[j][static_cast<size_t>(i)] = true;
  }

  Var finals = tp.concat(fw_final.h, bw_final.h);
  out.dec_init.h =
      tp.tanh_(tp.add(tp.matvec(b.init_h_W, finals), b.init_h_b));
  Var finals_c = tp.concat(fw_final.c, bw_final.c);
  out.dec_init.c =
      tp.tanh_(tp.add(tp.matvec(b.init_c_W, finals_c), b.init_c_b));
  return out;
}

int load_embeddings(const std::string& path, const Vocabulary& vocab,
                    ModelParams& mp) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("load_embeddings: cannot open " + path);
  ad::Tensor& table = mp.store.value(mp.embed);
  const int E = mp.cfg.embedding;
  std::string line;
  int matched = 0;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    int id = vocab.id(token);
    bool is_unk_surface = token == vocab.token(Vocabulary::kUnk);
    if (id == Vocabulary::kUnk && !is_unk_surface) continue;
    std::vector<double> vals;
    double x;
    while (row >> x) vals.push_back(x);
    if (static_cast<int>(vals.size()) != E)
      throw std::invalid_argument(
          "load_embeddings: line " + std::to_string(lineno) + " has " +
          std::to_string(vals.size()) + " dims, expected " +
          std::to_string(E));
    for (int j = 0; j < E; ++j) table.at(id, j) = vals[static_cast<size_t>(j)];
    ++matched;
  }
  mp.quantize_f32();
  return matched;
}

}  // namespace segen
