#include "segen/tape.h"

#include <algorithm>
#include <cmath>

#include "segen/logspace.h"

namespace segen::ad {

namespace {
std::string shape_msg(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
         b.shape_str();
}
}  // namespace

Var Tape::push(Tensor t, std::function<void(Tape&)> back, int param_id) {
  nodes_.push_back(Node{std::move(t), std::move(back), param_id});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_shape(const char* op, Var a, Var b) const {
  const Tensor& ta = node(a).t;
  const Tensor& tb = node(b).t;
  if (ta.rows != tb.rows || ta.cols != tb.cols)
    throw ShapeError(shape_msg(op, ta, tb));
}

void Tape::check_vector(const char* op, Var a) const {
  const Tensor& t = node(a).t;
  if (t.cols != 1)
    throw ShapeError(std::string(op) + ": expected column vector, got " +
                     t.shape_str());
}

void Tape::check_scalar(const char* op, Var a) const {
  const Tensor& t = node(a).t;
  if (t.rows != 1 || t.cols != 1)
    throw ShapeError(std::string(op) + ": expected scalar, got " +
                     t.shape_str());
}

// --- leaves ---

Var Tape::param(const Tensor& value, int param_id) {
  return push(Tensor(value), nullptr, param_id);
}

Var Tape::constant(Tensor value) { return push(std::move(value)); }

Var Tape::constant_vector(const std::vector<double>& v) {
  Tensor t(static_cast<int>(v.size()), 1);
  t.v = v;
  return push(std::move(t));
}

Var Tape::scalar(double x) {
  Tensor t(1, 1);
  t.v[0] = x;
  return push(std::move(t));
}

Var Tape::zeros(int rows, int cols) { return push(Tensor(rows, cols)); }

// --- tensor primitives ---

Var Tape::matvec(Var W, Var x) {
  const Tensor& w = node(W).t;
  const Tensor& xv = node(x).t;
  if (xv.cols != 1 || w.cols != xv.rows)
    throw ShapeError(shape_msg("matvec", w, xv));
  Tensor y(w.rows, 1);
  for (int i = 0; i < w.rows; ++i) {
    double s = 0.0;
    const double* wr = &w.v[static_cast<size_t>(i) * w.cols];
    for (int j = 0; j < w.cols; ++j) s += wr[j] * xv.v[j];
    y.v[i] = s;
  }
  Var out = push(std::move(y));
  node(out).back = [out, W, x](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    const Tensor& wt = tp.node(W).t;
    const Tensor& xv = tp.node(x).t;
    std::vector<double>& gw = tp.grad(W);
    std::vector<double>& gx = tp.grad(x);
    for (int i = 0; i < wt.rows; ++i) {
      double gyi = gy[i];
      if (gyi == 0.0) continue;
      const double* wr = &wt.v[static_cast<size_t>(i) * wt.cols];
      double* gwr = &gw[static_cast<size_t>(i) * wt.cols];
      for (int j = 0; j < wt.cols; ++j) {
        gwr[j] += gyi * xv.v[j];
        gx[j] += gyi * wr[j];
      }
    }
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  check_same_shape("add", a, b);
  Tensor y = node(a).t;
  const Tensor& tb = node(b).t;
  for (int i = 0; i < y.size(); ++i) y.v[i] += tb.v[i];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    std::vector<double>& ga = tp.grad(a);
    std::vector<double>& gb = tp.grad(b);
    for (size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape("sub", a, b);
  Tensor y = node(a).t;
  const Tensor& tb = node(b).t;
  for (int i = 0; i < y.size(); ++i) y.v[i] -= tb.v[i];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    std::vector<double>& ga = tp.grad(a);
    std::vector<double>& gb = tp.grad(b);
    for (size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  };
  return out;
}

Var Tape::cmul(Var a, Var b) {
  check_same_shape("cmul", a, b);
  Tensor y = node(a).t;
  const Tensor& tb = node(b).t;
  for (int i = 0; i < y.size(); ++i) y.v[i] *= tb.v[i];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    const Tensor& ta = tp.node(a).t;
    const Tensor& tb2 = tp.node(b).t;
    std::vector<double>& ga = tp.grad(a);
    std::vector<double>& gb = tp.grad(b);
    for (size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i] * tb2.v[i];
      gb[i] += gy[i] * ta.v[i];
    }
  };
  return out;
}

Var Tape::tanh_(Var a) {
  Tensor y = node(a).t;
  for (double& x : y.v) x = std::tanh(x);
  Var out = push(std::move(y));
  node(out).back = [out, a](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& ga = tp.grad(a);
    for (size_t i = 0; i < ty.v.size(); ++i)
      ga[i] += ty.g[i] * (1.0 - ty.v[i] * ty.v[i]);
  };
  return out;
}

Var Tape::sigmoid_(Var a) {
  Tensor y = node(a).t;
  for (double& x : y.v) x = 1.0 / (1.0 + std::exp(-x));
  Var out = push(std::move(y));
  node(out).back = [out, a](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& ga = tp.grad(a);
    for (size_t i = 0; i < ty.v.size(); ++i)
      ga[i] += ty.g[i] * ty.v[i] * (1.0 - ty.v[i]);
  };
  return out;
}

Var Tape::concat(Var a, Var b) {
  check_vector("concat", a);
  check_vector("concat", b);
  const Tensor& ta = node(a).t;
  const Tensor& tb = node(b).t;
  Tensor y(ta.rows + tb.rows, 1);
  std::copy(ta.v.begin(), ta.v.end(), y.v.begin());
  std::copy(tb.v.begin(), tb.v.end(), y.v.begin() + ta.rows);
  int na = ta.rows;
  Var out = push(std::move(y));
  node(out).back = [out, a, b, na](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    std::vector<double>& ga = tp.grad(a);
    std::vector<double>& gb = tp.grad(b);
    for (int i = 0; i < na; ++i) ga[i] += gy[i];
    for (size_t i = na; i < gy.size(); ++i) gb[i - na] += gy[i];
  };
  return out;
}

Var Tape::lookup(Var table, int row) {
  const Tensor& t = node(table).t;
  if (row < 0 || row >= t.rows)
    throw ShapeError("lookup: row " + std::to_string(row) +
                     " out of range for " + t.shape_str());
  Tensor y(t.cols, 1);
  for (int j = 0; j < t.cols; ++j) y.v[j] = t.at(row, j);
  Var out = push(std::move(y));
  node(out).back = [out, table, row](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    const Tensor& t = tp.node(table).t;
    std::vector<double>& gt = tp.grad(table);
    double* gr = &gt[static_cast<size_t>(row) * t.cols];
    for (int j = 0; j < t.cols; ++j) gr[j] += gy[j];
  };
  return out;
}

Var Tape::maxpool(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("maxpool: empty input list");
  for (size_t k = 1; k < xs.size(); ++k)
    check_same_shape("maxpool", xs[0], xs[k]);
  const Tensor& t0 = node(xs[0]).t;
  Tensor y = t0;
  std::vector<int> argmax(t0.v.size(), 0);
  for (size_t k = 1; k < xs.size(); ++k) {
    const Tensor& tk = node(xs[k]).t;
    for (size_t i = 0; i < y.v.size(); ++i) {
      if (tk.v[i] > y.v[i]) {
        y.v[i] = tk.v[i];
        argmax[i] = static_cast<int>(k);
      }
    }
  }
  Var out = push(std::move(y));
  node(out).back = [out, xs, argmax = std::move(argmax)](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    for (size_t i = 0; i < gy.size(); ++i)
      tp.grad(xs[static_cast<size_t>(argmax[i])])[i] += gy[i];
  };
  return out;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: empty input list");
  for (const Var& r : rows) check_vector("stack_rows", r);
  int cols = node(rows[0]).t.rows;
  Tensor y(static_cast<int>(rows.size()), cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    const Tensor& ti = node(rows[i]).t;
    if (ti.rows != cols) throw ShapeError(shape_msg("stack_rows", node(rows[0]).t, ti));
    for (int j = 0; j < cols; ++j) y.at(static_cast<int>(i), j) = ti.v[j];
  }
  Var out = push(std::move(y));
  node(out).back = [out, rows, cols](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    for (size_t i = 0; i < rows.size(); ++i) {
      std::vector<double>& gr = tp.grad(rows[i]);
      for (int j = 0; j < cols; ++j)
        gr[j] += ty.g[i * static_cast<size_t>(cols) + j];
    }
  };
  return out;
}

Var Tape::row_scores(Var H, Var u, const std::vector<int>& rows) {
  const Tensor& h = node(H).t;
  const Tensor& uv = node(u).t;
  if (uv.cols != 1 || uv.rows != h.cols)
    throw ShapeError(shape_msg("row_scores", h, uv));
  if (rows.empty()) throw ShapeError("row_scores: empty row list");
  Tensor y(static_cast<int>(rows.size()), 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= h.rows)
      throw ShapeError("row_scores: row " + std::to_string(rows[i]) +
                       " out of range for " + h.shape_str());
    const double* hr = &h.v[static_cast<size_t>(rows[i]) * h.cols];
    double s = 0.0;
    for (int j = 0; j < h.cols; ++j) s += hr[j] * uv.v[j];
    y.v[i] = s;
  }
  Var out = push(std::move(y));
  node(out).back = [out, H, u, rows](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    const Tensor& h = tp.node(H).t;
    const Tensor& uv = tp.node(u).t;
    std::vector<double>& gh = tp.grad(H);
    std::vector<double>& gu = tp.grad(u);
    for (size_t i = 0; i < rows.size(); ++i) {
      double gyi = gy[i];
      if (gyi == 0.0) continue;
      const double* hr = &h.v[static_cast<size_t>(rows[i]) * h.cols];
      double* ghr = &gh[static_cast<size_t>(rows[i]) * h.cols];
      for (int j = 0; j < h.cols; ++j) {
        ghr[j] += gyi * uv.v[j];
        gu[j] += gyi * hr[j];
      }
    }
  };
  return out;
}

Var Tape::weighted_rows(Var H, Var w, const std::vector<int>& rows) {
  const Tensor& h = node(H).t;
  const Tensor& wv = node(w).t;
  if (wv.cols != 1 || wv.rows != static_cast<int>(rows.size()))
    throw ShapeError("weighted_rows: weight shape " + wv.shape_str() +
                     " does not match " + std::to_string(rows.size()) +
                     " rows");
  Tensor y(h.cols, 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= h.rows)
      throw ShapeError("weighted_rows: row " + std::to_string(rows[i]) +
                       " out of range for " + h.shape_str());
    const double* hr = &h.v[static_cast<size_t>(rows[i]) * h.cols];
    for (int j = 0; j < h.cols; ++j) y.v[j] += wv.v[i] * hr[j];
  }
  Var out = push(std::move(y));
  node(out).back = [out, H, w, rows](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    const Tensor& h = tp.node(H).t;
    const Tensor& wv = tp.node(w).t;
    std::vector<double>& gh = tp.grad(H);
    std::vector<double>& gw = tp.grad(w);
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* hr = &h.v[static_cast<size_t>(rows[i]) * h.cols];
      double* ghr = &gh[static_cast<size_t>(rows[i]) * h.cols];
      double acc = 0.0;
      for (int j = 0; j < h.cols; ++j) {
        acc += gy[j] * hr[j];
        ghr[j] += gy[j] * wv.v[i];
      }
      gw[i] += acc;
    }
  };
  return out;
}

Var Tape::softmax(Var s) {
  check_vector("softmax", s);
  const Tensor& ts = node(s).t;
  Tensor y(ts.rows, 1);
  double hi = *std::max_element(ts.v.begin(), ts.v.end());
  double z = 0.0;
  for (int i = 0; i < ts.rows; ++i) {
    y.v[i] = std::exp(ts.v[i] - hi);
    z += y.v[i];
  }
  for (double& p : y.v) p /= z;
  Var out = push(std::move(y));
  node(out).back = [out, s](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& gs = tp.grad(s);
    double dot = 0.0;
    for (size_t i = 0; i < ty.v.size(); ++i) dot += ty.g[i] * ty.v[i];
    for (size_t i = 0; i < ty.v.size(); ++i)
      gs[i] += ty.v[i] * (ty.g[i] - dot);
  };
  return out;
}

Var Tape::softmax_masked(Var s, const std::vector<bool>& allowed) {
  check_vector("softmax_masked", s);
  const Tensor& ts = node(s).t;
  if (static_cast<int>(allowed.size()) != ts.rows)
    throw ShapeError("softmax_masked: mask size " +
                     std::to_string(allowed.size()) + " vs scores " +
                     ts.shape_str());
  double hi = logspace::kNegInf;
  for (int i = 0; i < ts.rows; ++i)
    if (allowed[static_cast<size_t>(i)] && ts.v[i] > hi) hi = ts.v[i];
  if (std::isinf(hi) && hi < 0)
    throw std::invalid_argument("softmax_masked: all entries masked");
  Tensor y(ts.rows, 1);
  double z = 0.0;
  for (int i = 0; i < ts.rows; ++i) {
    if (!allowed[static_cast<size_t>(i)]) continue;
    y.v[i] = std::exp(ts.v[i] - hi);
    z += y.v[i];
  }
  for (double& p : y.v) p /= z;
  Var out = push(std::move(y));
  // Masked entries hold exactly zero probability; the standard softmax
  // Jacobian then yields exactly zero gradient for them as well.
  node(out).back = [out, s](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& gs = tp.grad(s);
    double dot = 0.0;
    for (size_t i = 0; i < ty.v.size(); ++i) dot += ty.g[i] * ty.v[i];
    for (size_t i = 0; i < ty.v.size(); ++i)
      gs[i] += ty.v[i] * (ty.g[i] - dot);
  };
  return out;
}

Var Tape::log_softmax(Var s) {
  check_vector("log_softmax", s);
  const Tensor& ts = node(s).t;
  double lse = logspace::log_sum_exp(std::span<const double>(ts.v));
  Tensor y(ts.rows, 1);
  for (int i = 0; i < ts.rows; ++i) y.v[i] = ts.v[i] - lse;
  Var out = push(std::move(y));
  node(out).back = [out, s](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& gs = tp.grad(s);
    double gsum = 0.0;
    for (double gi : ty.g) gsum += gi;
    for (size_t i = 0; i < ty.v.size(); ++i)
      gs[i] += ty.g[i] - std::exp(ty.v[i]) * gsum;
  };
  return out;
}

Var Tape::log_softmax_masked(Var s, const std::vector<bool>& allowed) {
  check_vector("log_softmax_masked", s);
  const Tensor& ts = node(s).t;
  if (static_cast<int>(allowed.size()) != ts.rows)
    throw ShapeError("log_softmax_masked: mask size " +
                     std::to_string(allowed.size()) + " vs scores " +
                     ts.shape_str());
  std::vector<double> kept;
  kept.reserve(ts.v.size());
  for (int i = 0; i < ts.rows; ++i)
    if (allowed[static_cast<size_t>(i)]) kept.push_back(ts.v[i]);
  if (kept.empty())
    throw std::invalid_argument("log_softmax_masked: all entries masked");
  double lse = logspace::log_sum_exp(kept);
  Tensor y(ts.rows, 1);
  for (int i = 0; i < ts.rows; ++i)
    y.v[i] = allowed[static_cast<size_t>(i)] ? ts.v[i] - lse
                                             : logspace::kNegInf;
  Var out = push(std::move(y));
  node(out).back = [out, s, allowed](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& gs = tp.grad(s);
    double gsum = 0.0;
    for (size_t i = 0; i < ty.v.size(); ++i)
      if (allowed[i]) gsum += ty.g[i];
    for (size_t i = 0; i < ty.v.size(); ++i)
      if (allowed[i]) gs[i] += ty.g[i] - std::exp(ty.v[i]) * gsum;
  };
  return out;
}

Var Tape::mix_copy_log(Var pvocab, Var alpha, Var pgen,
                       const std::vector<int>& span_ext_ids, int ext_size) {
  check_vector("mix_copy_log", pvocab);
  check_vector("mix_copy_log", alpha);
  check_scalar("mix_copy_log", pgen);
  const Tensor& pv = node(pvocab).t;
  const Tensor& al = node(alpha).t;
  if (al.rows != static_cast<int>(span_ext_ids.size()))
    throw ShapeError("mix_copy_log: attention shape " + al.shape_str() +
                     " vs span of " + std::to_string(span_ext_ids.size()));
  if (pv.rows > ext_size)
    throw ShapeError("mix_copy_log: vocab " + pv.shape_str() +
                     " exceeds extended size " + std::to_string(ext_size));
  for (int id : span_ext_ids)
    if (id < 0 || id >= ext_size)
      throw ShapeError("mix_copy_log: extended id " + std::to_string(id) +
                       " out of range " + std::to_string(ext_size));
  double g = node(pgen).t.v[0];
  std::vector<double> pext(static_cast<size_t>(ext_size), 0.0);
  std::vector<double> copy_mass(static_cast<size_t>(ext_size), 0.0);
  for (int i = 0; i < pv.rows; ++i) pext[static_cast<size_t>(i)] = g * pv.v[i];
  for (size_t i = 0; i < span_ext_ids.size(); ++i)
    copy_mass[static_cast<size_t>(span_ext_ids[i])] += al.v[i];
  for (int w = 0; w < ext_size; ++w)
    pext[static_cast<size_t>(w)] += (1.0 - g) * copy_mass[static_cast<size_t>(w)];
  Tensor y(ext_size, 1);
  for (int w = 0; w < ext_size; ++w)
    y.v[w] = pext[static_cast<size_t>(w)] > 0.0
                 ? std::log(pext[static_cast<size_t>(w)])
                 : logspace::kNegInf;
  Var out = push(std::move(y));
  node(out).back = [out, pvocab, alpha, pgen, span_ext_ids,
                    pext = std::move(pext),
                    copy_mass = std::move(copy_mass)](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    const Tensor& pv = tp.node(pvocab).t;
    double g = tp.node(pgen).t.v[0];
    std::vector<double>& gpv = tp.grad(pvocab);
    std::vector<double>& gal = tp.grad(alpha);
    std::vector<double>& gg = tp.grad(pgen);
    // d log p / d p = 1/p; zero-probability entries carry no gradient.
    std::vector<double> dpext(pext.size(), 0.0);
    for (size_t w = 0; w < pext.size(); ++w)
      if (ty.g[w] != 0.0 && pext[w] > 0.0) dpext[w] = ty.g[w] / pext[w];
    for (int w = 0; w < pv.rows; ++w) {
      if (dpext[static_cast<size_t>(w)] == 0.0) continue;
      gpv[w] += dpext[static_cast<size_t>(w)] * g;
    }
    double dg = 0.0;
    for (size_t w = 0; w < dpext.size(); ++w) {
      if (dpext[w] == 0.0) continue;
      double pvw = static_cast<int>(w) < pv.rows ? pv.v[w] : 0.0;
      dg += dpext[w] * (pvw - copy_mass[w]);
    }
    gg[0] += dg;
    for (size_t i = 0; i < span_ext_ids.size(); ++i) {
      double d = dpext[static_cast<size_t>(span_ext_ids[i])];
      if (d != 0.0) gal[i] += d * (1.0 - g);
    }
  };
  return out;
}

Var Tape::log_softmax_ext(Var s, int ext_size) {
  check_vector("log_softmax_ext", s);
  const Tensor& ts = node(s).t;
  if (ts.rows > ext_size)
    throw ShapeError("log_softmax_ext: scores " + ts.shape_str() +
                     " exceed extended size " + std::to_string(ext_size));
  double lse = logspace::log_sum_exp(std::span<const double>(ts.v));
  Tensor y(ext_size, 1);
  for (int i = 0; i < ext_size; ++i)
    y.v[i] = i < ts.rows ? ts.v[i] - lse : logspace::kNegInf;
  int n = ts.rows;
  Var out = push(std::move(y));
  node(out).back = [out, s, n](Tape& tp) {
    const Tensor& ty = tp.node(out).t;
    std::vector<double>& gs = tp.grad(s);
    double gsum = 0.0;
    for (int i = 0; i < n; ++i) gsum += ty.g[i];
    for (int i = 0; i < n; ++i)
      gs[i] += ty.g[i] - std::exp(ty.v[i]) * gsum;
  };
  return out;
}

Var Tape::dropout(Var a, double rate, Rng& rng, bool train) {
  if (!train || rate == 0.0) return a;
  const Tensor& ta = node(a).t;
  double keep = 1.0 - rate;
  std::vector<double> mask(ta.v.size());
  Tensor y(ta.rows, ta.cols);
  for (size_t i = 0; i < ta.v.size(); ++i) {
    mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    y.v[i] = ta.v[i] * mask[i];
  }
  Var out = push(std::move(y));
  node(out).back = [out, a, mask = std::move(mask)](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    std::vector<double>& ga = tp.grad(a);
    for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * mask[i];
  };
  return out;
}

// --- scalar primitives ---

Var Tape::pick(Var v, int i) {
  check_vector("pick", v);
  const Tensor& tv = node(v).t;
  if (i < 0 || i >= tv.rows)
    throw ShapeError("pick: index " + std::to_string(i) +
                     " out of range for " + tv.shape_str());
  Tensor y(1, 1);
  y.v[0] = tv.v[i];
  Var out = push(std::move(y));
  node(out).back = [out, v, i](Tape& tp) {
    tp.grad(v)[static_cast<size_t>(i)] += tp.node(out).t.g[0];
  };
  return out;
}

Var Tape::s_dot_const(Var a, const std::vector<double>& coef) {
  const Tensor& ta = node(a).t;
  if (static_cast<int>(coef.size()) != ta.size())
    throw ShapeError("s_dot_const: " + std::to_string(coef.size()) +
                     " coefficients vs " + ta.shape_str());
  Tensor y(1, 1);
  for (size_t i = 0; i < coef.size(); ++i) y.v[0] += coef[i] * ta.v[i];
  Var out = push(std::move(y));
  node(out).back = [out, a, coef](Tape& tp) {
    double g = tp.node(out).t.g[0];
    std::vector<double>& ga = tp.grad(a);
    for (size_t i = 0; i < coef.size(); ++i) ga[i] += g * coef[i];
  };
  return out;
}

Var Tape::s_dot(Var a, Var b) {
  check_same_shape("s_dot", a, b);
  const Tensor& ta = node(a).t;
  const Tensor& tb = node(b).t;
  Tensor y(1, 1);
  for (size_t i = 0; i < ta.v.size(); ++i) y.v[0] += ta.v[i] * tb.v[i];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    double g = tp.node(out).t.g[0];
    const Tensor& ta = tp.node(a).t;
    const Tensor& tb = tp.node(b).t;
    std::vector<double>& ga = tp.grad(a);
    std::vector<double>& gb = tp.grad(b);
    for (size_t i = 0; i < ta.v.size(); ++i) {
      ga[i] += g * tb.v[i];
      gb[i] += g * ta.v[i];
    }
  };
  return out;
}

Var Tape::s_add(Var a, Var b) {
  check_scalar("s_add", a);
  check_scalar("s_add", b);
  Tensor y(1, 1);
  y.v[0] = node(a).t.v[0] + node(b).t.v[0];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    double g = tp.node(out).t.g[0];
    tp.grad(a)[0] += g;
    tp.grad(b)[0] += g;
  };
  return out;
}

Var Tape::s_sub(Var a, Var b) {
  check_scalar("s_sub", a);
  check_scalar("s_sub", b);
  Tensor y(1, 1);
  y.v[0] = node(a).t.v[0] - node(b).t.v[0];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    double g = tp.node(out).t.g[0];
    tp.grad(a)[0] += g;
    tp.grad(b)[0] -= g;
  };
  return out;
}

Var Tape::s_mul(Var a, Var b) {
  check_scalar("s_mul", a);
  check_scalar("s_mul", b);
  Tensor y(1, 1);
  y.v[0] = node(a).t.v[0] * node(b).t.v[0];
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    double g = tp.node(out).t.g[0];
    tp.grad(a)[0] += g * tp.node(b).t.v[0];
    tp.grad(b)[0] += g * tp.node(a).t.v[0];
  };
  return out;
}

Var Tape::s_neg(Var a) {
  check_scalar("s_neg", a);
  Tensor y(1, 1);
  y.v[0] = -node(a).t.v[0];
  Var out = push(std::move(y));
  node(out).back = [out, a](Tape& tp) {
    tp.grad(a)[0] -= tp.node(out).t.g[0];
  };
  return out;
}

Var Tape::s_exp(Var a) {
  check_scalar("s_exp", a);
  Tensor y(1, 1);
  y.v[0] = std::exp(node(a).t.v[0]);
  Var out = push(std::move(y));
  node(out).back = [out, a](Tape& tp) {
    tp.grad(a)[0] += tp.node(out).t.g[0] * tp.node(out).t.v[0];
  };
  return out;
}

Var Tape::s_abs(Var a) {
  check_scalar("s_abs", a);
  Tensor y(1, 1);
  double x = node(a).t.v[0];
  y.v[0] = std::abs(x);
  Var out = push(std::move(y));
  node(out).back = [out, a, x](Tape& tp) {
    double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    tp.grad(a)[0] += tp.node(out).t.g[0] * sign;
  };
  return out;
}

Var Tape::s_max(Var a, Var b) {
  check_scalar("s_max", a);
  check_scalar("s_max", b);
  double xa = node(a).t.v[0];
  double xb = node(b).t.v[0];
  Tensor y(1, 1);
  y.v[0] = std::max(xa, xb);
  // Ties route to b so that clamping against a constant threshold produces
  // a zero gradient at the boundary.
  bool take_a = xa > xb;
  Var out = push(std::move(y));
  node(out).back = [out, a, b, take_a](Tape& tp) {
    double g = tp.node(out).t.g[0];
    if (take_a)
      tp.grad(a)[0] += g;
    else
      tp.grad(b)[0] += g;
  };
  return out;
}

Var Tape::s_sum(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("s_sum: empty input list");
  double s = 0.0;
  for (const Var& x : xs) {
    check_scalar("s_sum", x);
    s += node(x).t.v[0];
  }
  Tensor y(1, 1);
  y.v[0] = s;
  Var out = push(std::move(y));
  node(out).back = [out, xs](Tape& tp) {
    double g = tp.node(out).t.g[0];
    for (const Var& x : xs) tp.grad(x)[0] += g;
  };
  return out;
}

Var Tape::add_const(Var a, double c) {
  Tensor y = node(a).t;
  for (double& x : y.v) x += c;
  Var out = push(std::move(y));
  node(out).back = [out, a](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    std::vector<double>& ga = tp.grad(a);
    for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
  };
  return out;
}

Var Tape::scale_const(Var a, double c) {
  Tensor y = node(a).t;
  for (double& x : y.v) x *= c;
  Var out = push(std::move(y));
  node(out).back = [out, a, c](Tape& tp) {
    const std::vector<double>& gy = tp.node(out).t.g;
    std::vector<double>& ga = tp.grad(a);
    for (size_t i = 0; i < gy.size(); ++i) ga[i] += c * gy[i];
  };
  return out;
}

Var Tape::log_add(Var a, Var b) {
  check_scalar("log_add", a);
  check_scalar("log_add", b);
  double xa = node(a).t.v[0];
  double xb = node(b).t.v[0];
  Tensor y(1, 1);
  y.v[0] = logspace::log_add(xa, xb);
  Var out = push(std::move(y));
  node(out).back = [out, a, b](Tape& tp) {
    double g = tp.node(out).t.g[0];
    double yv = tp.node(out).t.v[0];
    if (std::isinf(yv) && yv < 0) return;
    double xa = tp.node(a).t.v[0];
    double xb = tp.node(b).t.v[0];
    if (!(std::isinf(xa) && xa < 0)) tp.grad(a)[0] += g * std::exp(xa - yv);
    if (!(std::isinf(xb) && xb < 0)) tp.grad(b)[0] += g * std::exp(xb - yv);
  };
  return out;
}

Var Tape::log_sum_exp(const std::vector<Var>& xs) {
  if (xs.empty())
    throw std::invalid_argument("log_sum_exp: empty sequence");
  std::vector<double> vals;
  vals.reserve(xs.size());
  for (const Var& x : xs) {
    check_scalar("log_sum_exp", x);
    vals.push_back(node(x).t.v[0]);
  }
  Tensor y(1, 1);
  y.v[0] = logspace::log_sum_exp(vals);
  Var out = push(std::move(y));
  node(out).back = [out, xs](Tape& tp) {
    double g = tp.node(out).t.g[0];
    double yv = tp.node(out).t.v[0];
    if (std::isinf(yv) && yv < 0) return;
    for (const Var& x : xs) {
      double xv = tp.node(x).t.v[0];
      if (!(std::isinf(xv) && xv < 0))
        tp.grad(x)[0] += g * std::exp(xv - yv);
    }
  };
  return out;
}

// --- backward ---

void Tape::backward(Var loss, double seed) {
  check_scalar("backward", loss);
  grad(loss)[0] += seed;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back && n.t.has_grad()) n.back(*this);
  }
}

void Tape::grads_into(std::vector<Tensor>& sink) const {
  for (const Node& n : nodes_) {
    if (n.param_id < 0 || !n.t.has_grad()) continue;
    Tensor& dst = sink[static_cast<size_t>(n.param_id)];
    std::vector<double>& dg = dst.grad();
    for (size_t i = 0; i < n.t.g.size(); ++i) dg[i] += n.t.g[i];
  }
}

}  // namespace segen::ad
