#include "segen/trainer.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "segen/model.h"
#include "segen/tape.h"

namespace segen {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kMinLr = 1e-6;

}  // namespace

void adam_step(ParamStore& store, const std::vector<ad::Tensor>& grads,
               AdamState& state, double lr) {
  int n = store.count();
  assert(static_cast<int>(grads.size()) == n);
  if (state.m.empty()) {
    state.m.reserve(static_cast<size_t>(n));
    state.v.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const ad::Tensor& p = store.value(i);
      state.m.emplace_back(p.rows, p.cols);
      state.v.emplace_back(p.rows, p.cols);
    }
  }
  state.t += 1;
  double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (int i = 0; i < n; ++i) {
    ad::Tensor& p = store.value(i);
    // The gradient payload rides the grad channel, as grads_into leaves
    // it; a tensor with no allocated channel contributed nothing.
    const ad::Tensor& g = grads[static_cast<size_t>(i)];
    assert(g.rows == p.rows && g.cols == p.cols);
    assert(!g.has_grad() || g.g.size() == p.v.size());
    ad::Tensor& m = state.m[static_cast<size_t>(i)];
    ad::Tensor& v = state.v[static_cast<size_t>(i)];
    for (size_t k = 0; k < p.v.size(); ++k) {
      double gk = g.has_grad() ? g.g[k] : 0.0;
      if (!std::isfinite(gk))
        throw std::runtime_error(
            "adam_step: non-finite gradient for parameter '" + store.name(i) +
            "'");
      m.v[k] = kBeta1 * m.v[k] + (1.0 - kBeta1) * gk;
      v.v[k] = kBeta2 * v.v[k] + (1.0 - kBeta2) * gk * gk;
      p.v[k] -= lr * (m.v[k] / c1) / (std::sqrt(v.v[k] / c2) + kAdamEps);
    }
  }
}

double clip_global_norm(std::vector<ad::Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const ad::Tensor& g : grads) {
    if (!g.has_grad()) continue;
    for (double x : g.g) sq += x * x;
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double scale = max_norm / norm;
    for (ad::Tensor& g : grads) {
      if (!g.has_grad()) continue;
      for (double& x : g.g) x *= scale;
    }
  }
  return norm;
}

double validation_loss(const ModelParams& mp,
                       const std::vector<EncodedInstance>& val,
                       double* mean_expected_segments) {
  assert(!val.empty());
  double loss_sum = 0.0;
  double expected_sum = 0.0;
  Rng unused(0);
  for (const EncodedInstance& enc : val) {
    ad::Tape tp;
    Bound b = bind(tp, mp);
    InstanceObjective obj = instance_objective(tp, b, mp, enc, mp.cfg.eta,
                                               mp.cfg.gamma, false, unused);
    double l = -obj.loglik_value;
    if (mp.cfg.val_include_regularizer) l += obj.regularizer_value;
    loss_sum += l;
    expected_sum += obj.expected_value;
  }
  double n = static_cast<double>(val.size());
  if (mean_expected_segments) *mean_expected_segments = expected_sum / n;
  return loss_sum / n;
}

TrainResult train(ModelParams& mp,
                  const std::vector<EncodedInstance>& train_set,
                  const std::vector<EncodedInstance>& val_set,
                  std::ostream* metrics_csv) {
  if (train_set.empty())
    throw std::invalid_argument("train: empty training split");
  if (val_set.empty())
    throw std::invalid_argument("train: empty validation split");
  const Config& cfg = mp.cfg;
  assert(cfg.batch_size >= 1);

  if (metrics_csv)
    (*metrics_csv) << "epoch,train_loss,val_loss,lr,mean_expected_segments\n";

  TrainResult out;
  Rng order_rng(Rng::mix(static_cast<uint64_t>(cfg.seed), 0x5e17, 1));
  Rng drop_rng(Rng::mix(static_cast<uint64_t>(cfg.seed), 0xd207, 2));
  AdamState adam;
  double lr = cfg.lr;
  double prev_val = std::numeric_limits<double>::infinity();

  // Parameters at the end of the last finished epoch; a non-finite loss
  // later on rolls back to this point.
  std::vector<ad::Tensor> good;
  auto snapshot = [&]() {
    good.clear();
    for (int i = 0; i < mp.store.count(); ++i)
      good.push_back(mp.store.value(i));
  };
  snapshot();

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto params_finite = [&]() {
    for (int i = 0; i < mp.store.count(); ++i)
      for (double x : mp.store.value(i).v)
        if (!std::isfinite(x)) return false;
    return true;
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t at = 0; at < order.size();) {
      // Divergence can also surface as a parameter overflowing the f32
      // range during quantization; catch it before scoring dereferences
      // the poisoned value.
      if (!params_finite()) {
        for (int i = 0; i < mp.store.count(); ++i)
          mp.store.value(i) = good[static_cast<size_t>(i)];
        out.aborted = true;
        out.final_lr = lr;
        return out;
      }
      size_t bsz = std::min(static_cast<size_t>(cfg.batch_size),
                            order.size() - at);
      std::vector<ad::Tensor> sink = mp.store.zero_grads();
      for (size_t k = 0; k < bsz; ++k, ++at) {
        const EncodedInstance& enc = train_set[order[at]];
        ad::Tape tp;
        Bound b = bind(tp, mp);
        InstanceObjective obj = instance_objective(
            tp, b, mp, enc, cfg.eta, cfg.gamma, true, drop_rng);
        double lv = tp.val(obj.loss);
        if (!std::isfinite(lv)) {
          for (int i = 0; i < mp.store.count(); ++i)
            mp.store.value(i) = good[static_cast<size_t>(i)];
          out.aborted = true;
          out.final_lr = lr;
          return out;
        }
        loss_sum += lv;
        tp.backward(obj.loss, 1.0 / static_cast<double>(bsz));
        tp.grads_into(sink);
      }
      clip_global_norm(sink, cfg.grad_clip);
      adam_step(mp.store, sink, adam, lr);
      mp.quantize_f32();
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(train_set.size());
    st.val_loss = validation_loss(mp, val_set, &st.mean_expected_segments);
    st.lr = lr;
    out.history.push_back(st);
    if (metrics_csv) {
      (*metrics_csv) << st.epoch << ',' << std::setprecision(12)
                     << st.train_loss << ',' << st.val_loss << ',' << st.lr
                     << ',' << st.mean_expected_segments << '\n';
    }
    snapshot();
    if (st.val_loss > prev_val) lr *= cfg.lr_decay;
    prev_val = st.val_loss;
    if (lr < kMinLr) break;
  }
  out.final_lr = lr;
  return out;
}

}  // namespace segen
