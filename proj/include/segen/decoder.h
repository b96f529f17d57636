#ifndef SEGEN_DECODER_H
#define SEGEN_DECODER_H

#include <stdexcept>
#include <string>
#include <vector>

#include "segen/lattice.h"
#include "segen/oracle.h"

namespace segen {

enum class DecodeMode {
  kBase,  // segments nonempty, nothing else constrained
  kR,     // + no non-null record labels two segments
  kRM     // + every non-null record labeled before finishing
};

// One committed decode decision, kept for cost audits and traces.
struct DecodeStep {
  enum Kind { kToken, kCloseSegment, kTransition, kTerminal };
  Kind kind;
  int value;  // ext token id, or record index for transitions
  long att_delta = 0;    // attention scores spent on this decision
  long trans_delta = 0;  // transition scores spent on this decision
};

struct Hypothesis {
  std::vector<int> tokens;      // emitted extended-vocabulary ids, no "$"
  std::vector<int> boundaries;  // 1-based segment end positions
  std::vector<int> labels;      // record index per closed segment
  LstmState state;              // decoder state after the emitted tokens
  std::vector<bool> used;       // non-null records realized so far
  double score = 0.0;           // sum of decision log-probabilities
  bool finished = false;
  bool has_repeat = false;      // a forced order repeated a non-null record

  std::vector<DecodeStep> steps;

  // In-flight segment; record -1 means the next decision is a transition.
  int open_record = -1;
  int open_len = 0;
  ad::Var last_att;  // attention context under which the last token was emitted
};

// Raised when coverage cannot be met within the length budget; carries the
// best-scoring partial hypothesis for inspection.
struct IncompleteCoverageError : std::runtime_error {
  IncompleteCoverageError(const std::string& msg, Hypothesis partial)
      : std::runtime_error(msg), best_partial(std::move(partial)) {}
  Hypothesis best_partial;
};

// One-pass constrained decoding, alternating record choice and in-segment
// token emission. beam = 1 is greedy. Finishing is a reserved terminal
// choice appended to the transition softmax, legal only once the mode's
// coverage condition holds. Ties break toward the lower record index,
// then the lower token id.
Hypothesis decode(const EncodedInstance& enc, const ModelParams& mp,
                  DecodeMode mode, int beam, int max_len,
                  EvalCounter* counter = nullptr);

// Token emission under a caller-fixed record order; the constraint system
// is bypassed (repeats permitted and flagged). Null records may be placed
// anywhere in the order. Record indices outside [0..K] are rejected.
Hypothesis forced_structure_decode(const EncodedInstance& enc,
                                   const ModelParams& mp,
                                   const std::vector<int>& record_order,
                                   int beam, int max_len,
                                   EvalCounter* counter = nullptr);

// Max-product counterpart of the forward recursion over the reference
// tokens: the single highest-scoring labeled segmentation, from the same
// cached scores the marginal uses.
LabeledSegmentation viterbi_align(const EncodedInstance& enc,
                                  const ModelParams& mp, int L,
                                  double* score = nullptr);

// Rendering helper: extended id to surface form.
std::string surface_of(int ext_id, const Vocabulary& vocab,
                       const EncodedInstance& enc);

}  // namespace segen

#endif
