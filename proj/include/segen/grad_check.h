#ifndef SEGEN_GRAD_CHECK_H
#define SEGEN_GRAD_CHECK_H

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "segen/tensor.h"

namespace segen::ad {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_param = -1;
  int worst_elem = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// eval(params, grads) returns the loss; when grads is non-null it must add
// the full analytic gradient into the supplied same-shaped tensors. The
// evaluation must be deterministic across calls (dropout disabled).
using LossEval =
    std::function<double(const std::vector<Tensor>&, std::vector<Tensor>*)>;

// Central finite differences against reverse-mode gradients, every element
// of every parameter. Relative error uses a 1e-6 denominator floor so that
// near-zero gradient pairs compare on absolute terms.
inline GradCheckResult grad_check(std::vector<Tensor> params,
                                  const LossEval& eval, double eps) {
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const Tensor& p : params) grads.emplace_back(p.rows, p.cols);
  double loss = eval(params, &grads);
  if (!std::isfinite(loss))
    throw std::runtime_error("grad_check: non-finite loss " +
                             std::to_string(loss));
  GradCheckResult res;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (size_t k = 0; k < params[pi].v.size(); ++k) {
      double saved = params[pi].v[k];
      params[pi].v[k] = saved + eps;
      double up = eval(params, nullptr);
      params[pi].v[k] = saved - eps;
      double dn = eval(params, nullptr);
      params[pi].v[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw std::runtime_error("grad_check: non-finite perturbed loss");
      double numeric = (up - dn) / (2.0 * eps);
      double analytic =
          grads[pi].has_grad() ? grads[pi].g[k] : 0.0;
      double denom = std::max(std::max(std::abs(analytic), std::abs(numeric)),
                              1e-6);
      double rel = std::abs(analytic - numeric) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = static_cast<int>(pi);
        res.worst_elem = static_cast<int>(k);
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace segen::ad

#endif
