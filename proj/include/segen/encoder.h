#ifndef SEGEN_ENCODER_H
#define SEGEN_ENCODER_H

#include <string>
#include <vector>

#include "segen/corpus.h"
#include "segen/model.h"

namespace segen {

struct SourceEncoding {
  ad::Var H;                           // (n x 2H), row i = [fw_i ; bw_i]
  std::vector<ad::Var> record_reprs;   // K+1 embedding-space vectors
  ad::Var record_matrix;               // (K+1 x E), rows = record_reprs
  std::vector<std::vector<bool>> record_masks;  // (K+1) x n, [0] all-false
  LstmState dec_init;                  // projected encoder finals
  int n = 0;
};

// Runs the bidirectional encoder over the linearized source and derives
// per-record representations (elementwise max over the embeddings of the
// record's attribute and value tokens; zero vector for the null record).
SourceEncoding encode_source(ad::Tape& tp, const Bound& b,
                             const ModelParams& mp, const EncodedInstance& enc,
                             bool train, Rng& drop_rng);

// Max-pool of embedding rows; empty id list yields the zero vector.
ad::Var record_repr(ad::Tape& tp, ad::Var embed_table, int emb_size,
                    const std::vector<int>& token_ids);

// Glove-format text embeddings: `token v1 .. vE` per line. Rows of the
// embedding table whose token matches are overwritten; everything else
// keeps its initialization. Returns the number of tokens matched.
int load_embeddings(const std::string& path, const Vocabulary& vocab,
                    ModelParams& mp);

}  // namespace segen

#endif
