#include "segen/randgen.h"

namespace segen {

TinyCase make_tiny_case(Rng& rng, const TinyCaseLimits& lim) {
  // Small pools keep the vocabulary at or below 10 entries (3 reserved,
  // 2 attributes, 3 values, 2 fillers) while still colliding often enough
  // that records share tokens and targets copy from the source.
  static const char* kAttrs[] = {"a", "b"};
  static const char* kValues[] = {"u", "v", "w"};
  static const char* kFillers[] = {"y", "z"};

  TinyCase tc;
  int K = rng.uniform_int(1, lim.max_K);
  std::vector<Record> records;
  records.emplace_back();  // null record
  for (int k = 0; k < K; ++k) {
    Record r;
    r.attribute = {kAttrs[rng.uniform_int(0, 1)]};
    int nv = rng.uniform_int(1, 2);
    for (int i = 0; i < nv; ++i)
      r.value.push_back(kValues[rng.uniform_int(0, 2)]);
    records.push_back(std::move(r));
  }
  int m = rng.uniform_int(1, lim.max_m);
  std::vector<std::string> target;
  for (int t = 0; t < m; ++t) {
    if (rng.bernoulli(0.5))
      target.push_back(kValues[rng.uniform_int(0, 2)]);
    else
      target.push_back(kFillers[rng.uniform_int(0, 1)]);
  }
  tc.inst = make_instance(std::move(records), std::move(target));

  // Leave some source tokens out of the vocabulary so instances carry
  // extended copy slots, and some target tokens out so unknowns occur.
  for (const std::string& s : tc.inst.source)
    if (rng.bernoulli(0.75)) tc.vocab.add(s);
  for (const std::string& s : tc.inst.target)
    if (rng.bernoulli(0.8)) tc.vocab.add(s);

  Config cfg;
  cfg.hidden = rng.uniform_int(2, lim.max_hidden);
  cfg.embedding = rng.uniform_int(2, lim.max_embedding);
  cfg.dropout = 0.0;
  cfg.allow_null_self_transition = rng.bernoulli(lim.null_self_rate);
  tc.L = rng.uniform_int(1, lim.max_L);
  cfg.max_segment_len = tc.L;
  tc.mp = ModelParams::init(cfg, tc.vocab.size(), rng);
  tc.enc = encode_instance(tc.inst, tc.vocab);
  return tc;
}

}  // namespace segen
