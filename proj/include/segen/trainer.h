#ifndef SEGEN_TRAINER_H
#define SEGEN_TRAINER_H

#include <iosfwd>
#include <vector>

#include "segen/corpus.h"
#include "segen/lattice.h"
#include "segen/params.h"

namespace segen {

// First and second moment accumulators, kept in double alongside the
// float-quantized parameters. Sized lazily on the first step.
struct AdamState {
  std::vector<ad::Tensor> m, v;
  long t = 0;
};

// Standard Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with bias
// correction. Gradients ride the tensors' grad channel, as grads_into
// leaves them; an unallocated channel counts as zero. A non-finite
// gradient aborts with the offending parameter's name.
void adam_step(ParamStore& store, const std::vector<ad::Tensor>& grads,
               AdamState& state, double lr);

// Scales the grad channels in place so their joint L2 norm is at most
// max_norm; max_norm <= 0 disables clipping. Returns the pre-clip norm.
double clip_global_norm(std::vector<ad::Tensor>& grads, double max_norm);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double mean_expected_segments = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  bool aborted = false;  // a non-finite loss or parameter appeared; the
                         // parameters were restored to the end of the
                         // last finished epoch
  double final_lr = 0.0;
};

// Mean held-out objective: negative log-likelihood per instance, with the
// segment-count penalty added only when the config asks for it. Optionally
// reports the mean expected segment count over the split.
double validation_loss(const ModelParams& mp,
                       const std::vector<EncodedInstance>& val,
                       double* mean_expected_segments = nullptr);

// Optimization loop over encoded instances. Batch gradients average the
// per-instance losses and are clipped at a joint norm; the learning rate
// decays tenfold whenever held-out loss rises; the loop stops at
// max_epochs or once lr falls below 1e-6. Metrics stream as CSV rows
// `epoch,train_loss,val_loss,lr,mean_expected_segments`, one per epoch,
// logging the rate in effect during that epoch.
TrainResult train(ModelParams& mp,
                  const std::vector<EncodedInstance>& train_set,
                  const std::vector<EncodedInstance>& val_set,
                  std::ostream* metrics_csv = nullptr);

}  // namespace segen

#endif
