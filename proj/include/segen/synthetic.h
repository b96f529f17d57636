#ifndef SEGEN_SYNTHETIC_H
#define SEGEN_SYNTHETIC_H

#include <string>
#include <vector>

#include "segen/corpus.h"
#include "segen/rng.h"

namespace segen {

// A generated instance together with its planted token-level alignment:
// gold[t] is the index of the record that produced target token t, with 0
// for filler tokens owned by no record.
struct SyntheticInstance {
  DataInstance inst;
  std::vector<int> gold;
};

// Copy-style corpus for alignment studies. Each instance draws K in [2,4]
// records over distinct attributes; value tokens are single words drawn
// from per-attribute pools that are disjoint across attributes, so every
// value token in an instance is distinct. The target realizes each
// record's value verbatim, in a random record order, with a short filler
// run (0..4 words, skewed short) before each value and one or two fillers
// after the last. Gold alignments are
// exact by construction: value tokens carry their record's index, filler
// tokens carry 0.
std::vector<SyntheticInstance> make_synthetic_corpus(int n, Rng& rng);

// Writes the instances as a CSV with header `mr,ref` (loadable with
// load_e2e_csv) and, when gold_path is nonempty, a parallel file with one
// line per instance of space-separated record indices, one per target
// token.
void write_synthetic_corpus(const std::vector<SyntheticInstance>& corpus,
                            const std::string& csv_path,
                            const std::string& gold_path);

// Reads a gold-label file back: one vector of record indices per line.
std::vector<std::vector<int>> load_gold_labels(const std::string& path);

}  // namespace segen

#endif
