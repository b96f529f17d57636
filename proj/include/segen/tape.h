#ifndef SEGEN_TAPE_H
#define SEGEN_TAPE_H

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "segen/rng.h"
#include "segen/tensor.h"

namespace segen::ad {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Handle into a Tape's node list.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// list is already a topological order and backward() is a single reverse
// sweep. One tape per instance; tapes are not thread-safe but distinct
// tapes may run concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- leaves ---
  // Tracked parameter leaf. `param_id` tags the node so that grads_into()
  // can route the accumulated gradient back to external storage.
  Var param(const Tensor& value, int param_id);
  Var constant(Tensor value);
  Var constant_vector(const std::vector<double>& v);
  Var scalar(double x);
  Var zeros(int rows, int cols = 1);

  // --- tensor primitives ---
  Var matvec(Var W, Var x);               // (r x c) * (c x 1) -> (r x 1)
  Var add(Var a, Var b);                  // elementwise
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);                 // elementwise product
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var concat(Var a, Var b);               // column vectors
  Var lookup(Var table, int row);         // table row as column vector
  Var maxpool(const std::vector<Var>& xs);
  Var stack_rows(const std::vector<Var>& rows);
  // s_i = dot(H[rows[i]], u) for each listed row.
  Var row_scores(Var H, Var u, const std::vector<int>& rows);
  // sum_i w_i * H[rows[i]]
  Var weighted_rows(Var H, Var w, const std::vector<int>& rows);
  Var softmax(Var s);
  // Softmax with an additive mask: entries with allowed=false receive
  // exactly zero probability and zero gradient.
  Var softmax_masked(Var s, const std::vector<bool>& allowed);
  Var log_softmax(Var s);
  Var log_softmax_masked(Var s, const std::vector<bool>& allowed);
  // Pointer-generator mixture, returned as log-probabilities over the
  // extended vocabulary [0, ext_size): for w < V,
  //   p(w) = pgen * pvocab[w] + (1-pgen) * sum_{i: ext_ids[i]=w} alpha[i];
  // for w >= V only the copy term contributes.
  Var mix_copy_log(Var pvocab, Var alpha, Var pgen,
                   const std::vector<int>& span_ext_ids, int ext_size);
  // log_softmax over scores, padded with -inf up to ext_size (pure
  // vocabulary path, used for the null record).
  Var log_softmax_ext(Var s, int ext_size);
  // Inverted dropout: train=true scales kept entries by 1/(1-rate).
  Var dropout(Var a, double rate, Rng& rng, bool train);

  // --- scalar primitives ---
  Var pick(Var v, int i);
  // Fixed-coefficient weighted sum over all elements (row-major order).
  Var s_dot_const(Var a, const std::vector<double>& coef);
  Var s_dot(Var a, Var b);  // inner product of same-shape tensors
  Var s_add(Var a, Var b);
  Var s_sub(Var a, Var b);
  Var s_mul(Var a, Var b);
  Var s_neg(Var a);
  Var s_exp(Var a);
  Var s_abs(Var a);
  // max(a, b); exact ties route the gradient to b (the constant branch in
  // the granularity loss).
  Var s_max(Var a, Var b);
  Var s_sum(const std::vector<Var>& xs);
  Var add_const(Var a, double c);
  Var scale_const(Var a, double c);
  Var log_add(Var a, Var b);
  Var log_sum_exp(const std::vector<Var>& xs);

  // --- access ---
  double val(Var x) const { return node(x).t.v[0]; }
  const Tensor& tensor(Var x) const { return node(x).t; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // --- backward ---
  void backward(Var loss, double seed = 1.0);
  // Adds accumulated parameter-leaf gradients into `sink[param_id]`.
  void grads_into(std::vector<Tensor>& sink) const;

  // Forward-only scratch control: rewind drops nodes appended after mark.
  size_t mark() const { return nodes_.size(); }
  void rewind(size_t m) { nodes_.resize(m); }

 private:
  struct Node {
    Tensor t;
    std::function<void(Tape&)> back;
    int param_id = -1;
  };

  Node& node(Var x) { return nodes_[static_cast<size_t>(x.idx)]; }
  const Node& node(Var x) const { return nodes_[static_cast<size_t>(x.idx)]; }
  Tensor& value(Var x) { return node(x).t; }
  std::vector<double>& grad(Var x) { return node(x).t.grad(); }
  bool touched(Var x) const { return node(x).t.has_grad(); }

  Var push(Tensor t, std::function<void(Tape&)> back = nullptr,
           int param_id = -1);
  void check_same_shape(const char* op, Var a, Var b) const;
  void check_vector(const char* op, Var a) const;
  void check_scalar(const char* op, Var a) const;

  std::vector<Node> nodes_;
};

}  // namespace segen::ad

#endif
