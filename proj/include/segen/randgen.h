#ifndef SEGEN_RANDGEN_H
#define SEGEN_RANDGEN_H

#include "segen/corpus.h"
#include "segen/params.h"
#include "segen/rng.h"

namespace segen {

// A randomly drawn miniature problem: a record set and target small enough
// for exhaustive enumeration, a vocabulary that leaves some target tokens
// unknown (so copy and unk paths both occur), and a freshly initialized
// model. Used by property tests and the self-check command.
struct TinyCase {
  DataInstance inst;
  Vocabulary vocab;
  ModelParams mp;
  EncodedInstance enc;
  int L = 1;  // segment-length bound, mirrored into mp.cfg.max_segment_len
};

struct TinyCaseLimits {
  int max_m = 6;
  int max_K = 3;
  int max_L = 3;
  int max_hidden = 8;
  int max_embedding = 4;
  double null_self_rate = 0.2;  // fraction of cases allowing null self-moves
};

TinyCase make_tiny_case(Rng& rng, const TinyCaseLimits& lim = TinyCaseLimits());

}  // namespace segen

#endif
